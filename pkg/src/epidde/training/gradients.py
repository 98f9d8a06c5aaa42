"""Exact loss gradients by reverse accumulation through the unrolled Euler steps.

Forward, each substep computes ``z' = clamp(z + dt * F(z, rates, beta_star * Eff(z[1:] / N)))``.
Backward carries the adjoint ``a = dL/dz`` from the last recorded day to day 0,
adding the loss sensitivity of every recorded day as it passes, and collects
``a^T dF/drates``, ``a^T dF/dbeta_star`` and the network gradients on the way.
This is the discrete counterpart of solving the adjoint ODE backwards, and it is
the exact derivative of the loss the forward pass computes.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from ..compartments import CompartmentState, ModelVariant, RateParameters, get_variant, rhs_vjp
from ..effect_net import EffectNetwork, NetworkGradients, backward, effect_rate, forward
from ..errors import NumericError, StructuralError
from ..integrator import TRAINING_INTEGRATOR, IntegratorConfig, euler_update, integrate
from .loss import LossValue, loss_and_adjoint, observed_targets, trajectory_loss


@dataclass(frozen=True)
class ParameterGradients:
    rates: dict[str, float]  # active rates including beta_star
    network: NetworkGradients | None = None

    def flat(self, variant: ModelVariant) -> np.ndarray:
        head = np.array([self.rates[name] for name in variant.active_rates])
        if self.network is None:
            return head
        return np.concatenate([head, self.network.flat()])


class FitProblem:
    """Loss over a flat parameter vector ``[beta_star, *variant.rates, *network]``.

    The integration path is fixed-step Euler so that :meth:`loss_and_grad`
    returns the exact gradient of the computed loss.
    """

    def __init__(
        self,
        variant: ModelVariant | str,
        initial: CompartmentState | np.ndarray,
        population: float,
        observed,
        network: EffectNetwork | None = None,
        config: IntegratorConfig = TRAINING_INTEGRATOR,
        dtype=np.float64,
    ):
        self.variant = get_variant(variant)
        if config.scheme != "euler":
            raise StructuralError("gradient path requires the Euler scheme")
        self.config = config
        self.dtype = np.dtype(dtype)
        z0 = initial.values if isinstance(initial, CompartmentState) else np.asarray(initial, dtype=float)
        if z0.shape != (self.variant.dim,):
            raise StructuralError(f"{self.variant.tag} initial state needs {self.variant.dim} compartments")
        self.z0 = z0.astype(self.dtype)
        self.population = float(population)
        self.targets = {k: v.astype(self.dtype) for k, v in observed_targets(self.variant, observed).items()}
        self.days = len(self.targets["I"])
        if self.days < 1:
            raise StructuralError("need at least one observed day")
        if network is not None and network.input_size != self.variant.dim - 1:
            raise StructuralError(
                f"{self.variant.tag} network needs {self.variant.dim - 1} inputs, got {network.input_size}"
            )
        self.network = network
        self.n_rates = len(self.variant.active_rates)
        self.size = self.n_rates + (network.n_parameters if network is not None else 0)

    # parameter packing -------------------------------------------------------

    def pack(self, params: RateParameters, network: EffectNetwork | None = None) -> np.ndarray:
        active = params.active(self.variant)
        head = np.array([active[name] for name in self.variant.active_rates], dtype=float)
        if self.network is None:
            return head
        net = network if network is not None else self.network
        return np.concatenate([head, net.flat()])

    def unpack(self, flat: np.ndarray) -> tuple[RateParameters, EffectNetwork | None]:
        flat = np.asarray(flat, dtype=float)
        rates = dict(zip(self.variant.active_rates, flat[: self.n_rates].tolist()))
        params = RateParameters.for_variant(self.variant, self.population, **rates)
        net = None if self.network is None else self.network.with_flat(flat[self.n_rates :].copy())
        return params, net

    def _split(self, flat):
        flat = np.asarray(flat).astype(self.dtype)
        if flat.shape != (self.size,):
            raise StructuralError(f"expected {self.size} parameters, got {flat.shape}")
        beta = flat[0]
        rates = flat[1 : self.n_rates]
        net = None if self.network is None else self.network.with_flat(flat[self.n_rates :])
        return beta, rates, net

    # evaluation --------------------------------------------------------------

    def trajectory(self, flat) -> np.ndarray:
        """Recorded daily states (days, dim), integrated exactly like :meth:`loss_and_grad`."""
        beta, rates, net = self._split(flat)
        values, _ = self._forward(beta, rates, net, record=False)
        return values

    def loss(self, flat) -> float:
        values = self.trajectory(flat)
        loss, _ = loss_and_adjoint(self.variant, values, self.targets)
        return loss.total

    def _forward(self, beta, rates, net, record):
        variant, n = self.variant, self.population
        dt = self.dtype.type(self.config.step_size)
        z = self.z0.copy()
        values = np.empty((self.days, variant.dim), dtype=self.dtype)
        values[0] = z
        tape = []
        for day in range(self.days - 1):
            for _ in range(self.config.substeps_per_day):
                if net is not None:
                    eff, cache = forward(net, z[1:] / n)
                    beta_eff = beta * eff
                else:
                    eff, cache, beta_eff = None, None, beta
                nxt = euler_update(variant, z, rates, beta_eff, n, dt, day)
                keep = nxt >= 0
                if not keep.all():
                    nxt = np.where(keep, nxt, 0.0).astype(self.dtype)
                if record:
                    tape.append((z, beta_eff, eff, cache, keep))
                z = nxt
            values[day + 1] = z
        return values, tape

    def loss_and_grad(self, flat) -> tuple[LossValue, np.ndarray]:
        beta, rates, net = self._split(flat)
        variant, n, dt = self.variant, self.population, self.dtype.type(self.config.step_size)
        values, tape = self._forward(beta, rates, net, record=True)
        loss, day_adj = loss_and_adjoint(variant, values, self.targets)

        g_beta = self.dtype.type(0.0)
        g_rates = np.zeros_like(rates)
        if net is not None:
            g_w = [np.zeros_like(w) for w in net.weights]
            g_b = [np.zeros_like(b) for b in net.biases]
        a = day_adj[-1].copy()
        sub_n = self.config.substeps_per_day
        for k in range(len(tape) - 1, -1, -1):
            z, beta_eff, eff, cache, keep = tape[k]
            a = a * keep
            gz, gr, gbe = rhs_vjp(variant, z, rates, beta_eff, n, dt * a)
            g_rates += gr
            if net is not None:
                g_beta += gbe * eff
                ng = backward(net, cache, gbe * beta)
                for i in range(len(g_w)):
                    g_w[i] += ng.weights[i]
                    g_b[i] += ng.biases[i]
                gz[1:] += ng.input_gradient / n
            else:
                g_beta += gbe
            a = a + gz
            if k % sub_n == 0:
                a += day_adj[k // sub_n]
        parts = [np.array([g_beta]), g_rates]
        if net is not None:
            parts += [np.concatenate([w.ravel(), b]) for w, b in zip(g_w, g_b)]
        grad = np.concatenate(parts)
        if not np.all(np.isfinite(grad)):
            raise NumericError("non-finite gradient")
        return loss, grad

    def gradients(self, flat) -> tuple[LossValue, ParameterGradients]:
        loss, grad = self.loss_and_grad(flat)
        rates = dict(zip(self.variant.active_rates, grad[: self.n_rates].tolist()))
        net_grads = None
        if self.network is not None:
            shaped = self.network.with_flat(grad[self.n_rates :])
            net_grads = NetworkGradients(shaped.weights, shaped.biases, np.zeros(self.network.input_size))
        return loss, ParameterGradients(rates, net_grads)


def fit_gradients(
    variant: ModelVariant | str,
    initial: CompartmentState,
    params: RateParameters,
    net: EffectNetwork | None,
    observed,
    config: IntegratorConfig = TRAINING_INTEGRATOR,
) -> tuple[LossValue, ParameterGradients]:
    """Loss and its gradient w.r.t. every active rate (incl. beta_star) and network parameter."""
    problem = FitProblem(variant, initial, params.population, observed, net, config)
    return problem.gradients(problem.pack(params, net))


def forward_loss(
    variant: ModelVariant | str,
    initial: CompartmentState,
    params: RateParameters,
    net: EffectNetwork | None,
    observed,
    config: IntegratorConfig = TRAINING_INTEGRATOR,
) -> LossValue:
    """Loss from a plain :func:`integrate` run, independent of the gradient code."""
    variant = get_variant(variant)
    targets = observed_targets(variant, observed)
    provider = params.beta_star if net is None else effect_rate(net, params.beta_star, params.population)
    traj = integrate(variant, initial, params, provider, len(targets["I"]) - 1, config)
    return trajectory_loss(traj, targets, variant)
