"""Finite-difference reference for the training gradients.

Central differences are taken on the forward loss evaluated in extended
precision (``np.longdouble``), which keeps roundoff well below the tolerance
of the comparison. Only the forward pass is reused; the reverse pass under
test plays no part in the reference.
"""

import numpy as np

from epidde.compartments import RateParameters, initial_state
from epidde.effect_net import init_network
from epidde.training.gradients import FitProblem

POPULATION = 1000.0


def random_instance(rng, variant, days=10, hidden=(4,), with_network=True):
    rates = {k: float(rng.uniform(0.05, 0.6)) for k in variant.active_rates}
    params = RateParameters.for_variant(variant, POPULATION, **rates)
    z0 = initial_state(variant, (rng.uniform(5, 80), rng.uniform(0, 20), rng.uniform(0, 5)), params)
    net = None
    if with_network:
        base = init_network((variant.dim - 1, *hidden, 1), seed=int(rng.integers(1 << 31)))
        # larger weights than the default init so every path carries signal
        net = base.with_flat(base.flat() + rng.normal(0, 0.5, base.n_parameters))
    observed = {k: rng.uniform(1, 200, days) for k in "IRD"}
    return z0, params, net, observed


def fd_gradient(problem: FitProblem, flat: np.ndarray, rel_step: float = 1e-6) -> np.ndarray:
    flat = np.asarray(flat, dtype=np.longdouble)
    out = np.empty(flat.size, dtype=np.longdouble)
    for k in range(flat.size):
        h = np.longdouble(rel_step) * max(np.longdouble(1), abs(flat[k]))
        up, down = flat.copy(), flat.copy()
        up[k] += h
        down[k] -= h
        out[k] = (problem.loss(up) - problem.loss(down)) / (2 * h)
    return out.astype(float)


def extended_problem(variant, z0, params, net, observed):
    ld_net = None if net is None else net.astype(np.longdouble)
    return FitProblem(variant, z0, params.population, observed, ld_net, dtype=np.longdouble)


def worst_relative_error(grad, ref, floor=1e-10):
    return float(np.max(np.abs(grad - ref) / np.maximum(np.maximum(np.abs(grad), np.abs(ref)), floor)))


def pack(variant, params, net):
    head = [params.active(variant)[k] for k in variant.active_rates]
    if net is None:
        return np.array(head)
    return np.concatenate([head, net.flat()])



def network_fd_gradient(net, x, digits=60, step="1e-20"):
    """Central differences of the network output, weights then inputs, in decimal arithmetic.

    Gradients of a saturated net can be ~1e-11 against an O(1) output, which
    is beyond even longdouble differences at a 1e-6 relative tolerance. The
    forward pass here is the scalar oracle, so no package code is involved.
    """
    import decimal

    from oracles import mlp_forward

    ctx = decimal.Context(prec=digits)
    D = ctx.create_decimal_from_float
    h = decimal.Decimal(step)
    weights = [[[D(float(v)) for v in row] for row in w] for w in net.weights]
    biases = [[D(float(v)) for v in b] for b in net.biases]
    xs = [D(float(v)) for v in x]

    def f():
        with decimal.localcontext(ctx):
            return mlp_forward(weights, biases, xs, exp=lambda p: p.exp())

    def central(container, idx):
        base = container[idx]
        container[idx] = base + h
        up = f()
        container[idx] = base - h
        down = f()
        container[idx] = base
        return float((up - down) / (2 * h))

    # same order as NetworkParams.flat(): each layer's weights row-major, then its biases
    grad = []
    for w, b in zip(weights, biases):
        grad += [central(row, j) for row in w for j in range(len(row))]
        grad += [central(b, j) for j in range(len(b))]
    return np.array(grad), np.array([central(xs, i) for i in range(len(xs))])
