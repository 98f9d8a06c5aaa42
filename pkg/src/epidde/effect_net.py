"""Perceptron producing the infection-rate multiplier ``Eff`` in (0, 1).

The input is every compartment except S, divided by the population. Hidden
layers use ELU, the single output unit uses the logistic sigmoid. Weights are
stored as ``(fan_in, fan_out)`` matrices so a layer is ``h @ W + b``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import NumericError, StructuralError

WEIGHT_STD = 0.01
BIAS_INIT = 0.5
DEFAULT_HIDDEN = (16, 16)


def elu(x):
    return np.where(x >= 0, x, np.expm1(np.minimum(x, 0)))


def elu_grad(x):
    return np.where(x >= 0, 1.0, np.exp(np.minimum(x, 0)))


def sigmoid(x):
    x = np.asarray(x)
    # split by sign so exp never overflows
    e = np.exp(-np.abs(x))
    out = np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))
    # saturated values round onto 0 or 1; keep them on the nearest float inside the open interval
    dtype = out.dtype
    return np.clip(out, np.finfo(dtype).tiny, np.nextafter(dtype.type(1), dtype.type(0)))


@dataclass(frozen=True)
class EffectNetwork:
    layer_sizes: tuple[int, ...]
    weights: tuple[np.ndarray, ...]
    biases: tuple[np.ndarray, ...]
    seed: int | None = None

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.layer_sizes)
        object.__setattr__(self, "layer_sizes", sizes)
        _check_sizes(sizes)
        if len(self.weights) != len(sizes) - 1 or len(self.biases) != len(sizes) - 1:
            raise StructuralError("need one weight matrix and one bias vector per connection")
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            if np.shape(w) != (sizes[k], sizes[k + 1]) or np.shape(b) != (sizes[k + 1],):
                raise StructuralError(f"layer {k} has shapes {np.shape(w)}, {np.shape(b)}")

    @property
    def input_size(self) -> int:
        return self.layer_sizes[0]

    @property
    def n_parameters(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))

    def to_dict(self) -> dict:
        return {
            "layer_sizes": list(self.layer_sizes),
            "weights": [np.asarray(w).tolist() for w in self.weights],
            "biases": [np.asarray(b).tolist() for b in self.biases],
            "activations": {"hidden": "elu", "output": "sigmoid"},
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "EffectNetwork":
        acts = data.get("activations", {"hidden": "elu", "output": "sigmoid"})
        if acts != {"hidden": "elu", "output": "sigmoid"}:
            raise StructuralError(f"unsupported activations {acts}")
        sizes = tuple(data["layer_sizes"])
        weights = tuple(np.array(w, dtype=float).reshape(sizes[k], sizes[k + 1]) for k, w in enumerate(data["weights"]))
        biases = tuple(np.array(b, dtype=float).reshape(sizes[k + 1]) for k, b in enumerate(data["biases"]))
        return cls(sizes, weights, biases, data.get("seed"))

    def flat(self) -> np.ndarray:
        return np.concatenate([np.concatenate([w.ravel(), b]) for w, b in zip(self.weights, self.biases)])

    def with_flat(self, flat: np.ndarray) -> "EffectNetwork":
        flat = np.asarray(flat)
        if flat.shape != (self.n_parameters,):
            raise StructuralError(f"expected {self.n_parameters} parameters, got {flat.shape}")
        weights, biases, pos = [], [], 0
        for w, b in zip(self.weights, self.biases):
            weights.append(flat[pos : pos + w.size].reshape(w.shape))
            pos += w.size
            biases.append(flat[pos : pos + b.size])
            pos += b.size
        return EffectNetwork(self.layer_sizes, tuple(weights), tuple(biases), self.seed)

    def astype(self, dtype) -> "EffectNetwork":
        return EffectNetwork(
            self.layer_sizes,
            tuple(w.astype(dtype) for w in self.weights),
            tuple(b.astype(dtype) for b in self.biases),
            self.seed,
        )


@dataclass(frozen=True)
class NetworkGradients:
    weights: tuple[np.ndarray, ...]
    biases: tuple[np.ndarray, ...]
    input_gradient: np.ndarray

    def flat(self) -> np.ndarray:
        return np.concatenate([np.concatenate([w.ravel(), b]) for w, b in zip(self.weights, self.biases)])


@dataclass(frozen=True)
class ForwardCache:
    inputs: tuple[np.ndarray, ...]  # input to each layer
    pre: tuple[np.ndarray, ...]  # pre-activation of each layer
    output: float


def _check_sizes(sizes: Sequence[int]) -> None:
    if len(sizes) < 3:
        raise StructuralError("effect network needs at least one hidden layer")
    if sizes[-1] != 1:
        raise StructuralError("effect network output must have exactly one unit")
    if any(s < 1 for s in sizes):
        raise StructuralError(f"layer sizes must be positive, got {sizes}")


def layer_sizes_for(input_size: int, hidden: Sequence[int] = DEFAULT_HIDDEN) -> tuple[int, ...]:
    return (int(input_size), *(int(h) for h in hidden), 1)


def init_network(layer_sizes: Sequence[int], seed: int | None = 0) -> EffectNetwork:
    """Weights ~ Normal(0, 0.01^2), every bias 0.5. Deterministic in ``seed``."""
    sizes = tuple(int(s) for s in layer_sizes)
    _check_sizes(sizes)
    rng = np.random.default_rng(seed)
    weights = tuple(rng.normal(0.0, WEIGHT_STD, size=(sizes[k], sizes[k + 1])) for k in range(len(sizes) - 1))
    biases = tuple(np.full(sizes[k + 1], BIAS_INIT) for k in range(len(sizes) - 1))
    return EffectNetwork(sizes, weights, biases, seed)


def forward(net: EffectNetwork, x) -> tuple[float, ForwardCache]:
    x = np.asarray(x)
    if x.shape != (net.input_size,):
        raise StructuralError(f"network expects {net.input_size} inputs, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise NumericError("non-finite network input")
    inputs, pres = [], []
    h = x
    last = len(net.weights) - 1
    for k, (w, b) in enumerate(zip(net.weights, net.biases)):
        inputs.append(h)
        z = h @ w + b
        pres.append(z)
        h = elu(z) if k < last else sigmoid(z)
    out = h[0]
    return out, ForwardCache(tuple(inputs), tuple(pres), out)


def backward(net: EffectNetwork, cache: ForwardCache, upstream: float) -> NetworkGradients:
    """Reverse pass: gradients of ``upstream * Eff`` w.r.t. weights, biases and input."""
    n = len(net.weights)
    if len(cache.pre) != n or any(p.shape != (w.shape[1],) for p, w in zip(cache.pre, net.weights)):
        raise StructuralError("forward cache does not match this network")
    gw = [None] * n
    gb = [None] * n
    eff = cache.output
    g = np.array([upstream * eff * (1.0 - eff)], dtype=cache.pre[-1].dtype)
    for k in range(n - 1, -1, -1):
        if k < n - 1:
            g = g * elu_grad(cache.pre[k])
        gw[k] = np.outer(cache.inputs[k], g)
        gb[k] = g
        g = net.weights[k] @ g
    return NetworkGradients(tuple(gw), tuple(gb), g)


def effect_rate(net: EffectNetwork, beta_star: float, population: float):
    """Rate provider ``z -> beta_star * Eff(z[1:] / N)`` for the integrator."""

    def provider(z):
        return beta_star * forward(net, z[1:] / population)[0]

    return provider
