"""Adam with step decay, and a plain Nelder-Mead simplex minimizer."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


@dataclass(frozen=True)
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0

    @classmethod
    def zeros(cls, size: int) -> "AdamState":
        return cls(np.zeros(size), np.zeros(size), 0)


def adam_step(
    params: np.ndarray,
    grads: np.ndarray,
    state: AdamState,
    lr: float,
    n_bounded: int = 0,
) -> tuple[np.ndarray, AdamState]:
    """One bias-corrected Adam update. The first ``n_bounded`` entries are projected onto [0, 1]."""
    params = np.asarray(params, dtype=float)
    grads = np.asarray(grads, dtype=float)
    if params.shape != grads.shape or state.m.shape != params.shape:
        raise ValueError(f"shape mismatch: params {params.shape}, grads {grads.shape}, state {state.m.shape}")
    t = state.t + 1
    m = ADAM_BETA1 * state.m + (1.0 - ADAM_BETA1) * grads
    v = ADAM_BETA2 * state.v + (1.0 - ADAM_BETA2) * grads * grads
    m_hat = m / (1.0 - ADAM_BETA1**t)
    v_hat = v / (1.0 - ADAM_BETA2**t)
    new = params - lr * m_hat / (np.sqrt(v_hat) + ADAM_EPS)
    if n_bounded:
        new[:n_bounded] = np.clip(new[:n_bounded], 0.0, 1.0)
    return new, AdamState(m, v, t)


def lr_schedule(base_lr: float, iteration: int, decay: float = 0.95, every: int = 400) -> float:
    """Step decay: ``base_lr * decay ** (iteration // every)``."""
    if iteration < 0:
        raise ValueError("iteration must be >= 0")
    return base_lr * decay ** (iteration // every)


# Nelder-Mead -----------------------------------------------------------------

NM_REFLECT = 1.0
NM_EXPAND = 2.0
NM_CONTRACT = 0.5
NM_SHRINK = 0.5


@dataclass
class SimplexResult:
    x: np.ndarray
    fun: float
    nit: int
    nfev: int
    converged: bool
    history: list[float] = field(default_factory=list)  # best value after each iteration


def initial_simplex(x0: np.ndarray, rel_step: float = 0.05, zero_step: float = 0.00025) -> np.ndarray:
    x0 = np.asarray(x0, dtype=float)
    sim = np.tile(x0, (x0.size + 1, 1))
    for k in range(x0.size):
        sim[k + 1, k] = (1.0 + rel_step) * x0[k] if x0[k] != 0 else zero_step
    return sim


def nelder_mead(
    fun: Callable[[np.ndarray], float],
    x0,
    max_iters: int = 2000,
    xatol: float = 1e-8,
    fatol: float = 1e-8,
    simplex: np.ndarray | None = None,
) -> SimplexResult:
    """Minimize ``fun`` with the standard simplex moves (reflect 1, expand 2, contract 0.5, shrink 0.5).

    Stops when every vertex lies within ``xatol`` (max-norm) of the best one and
    their values within ``fatol``, or after ``max_iters`` iterations.
    """
    sim = initial_simplex(x0) if simplex is None else np.array(simplex, dtype=float)
    n = sim.shape[1]
    if sim.shape != (n + 1, n):
        raise ValueError("simplex must have n + 1 vertices of dimension n")
    fs = np.array([fun(x) for x in sim])
    nfev = n + 1
    history: list[float] = []
    it = 0
    converged = False
    while True:
        order = np.argsort(fs, kind="stable")
        sim, fs = sim[order], fs[order]
        if np.max(np.abs(sim[1:] - sim[0])) <= xatol and np.max(np.abs(fs[1:] - fs[0])) <= fatol:
            converged = True
            break
        if it >= max_iters:
            break
        it += 1
        centroid = sim[:-1].mean(axis=0)
        worst = sim[-1]
        xr = centroid + NM_REFLECT * (centroid - worst)
        fr = fun(xr)
        nfev += 1
        shrink = False
        if fr < fs[0]:
            xe = centroid + NM_EXPAND * (xr - centroid)
            fe = fun(xe)
            nfev += 1
            sim[-1], fs[-1] = (xe, fe) if fe < fr else (xr, fr)
        elif fr < fs[-2]:
            sim[-1], fs[-1] = xr, fr
        elif fr < fs[-1]:
            xc = centroid + NM_CONTRACT * (xr - centroid)
            fc = fun(xc)
            nfev += 1
            if fc <= fr:
                sim[-1], fs[-1] = xc, fc
            else:
                shrink = True
        else:
            xcc = centroid + NM_CONTRACT * (worst - centroid)
            fcc = fun(xcc)
            nfev += 1
            if fcc < fs[-1]:
                sim[-1], fs[-1] = xcc, fcc
            else:
                shrink = True
        if shrink:
            for k in range(1, n + 1):
                sim[k] = sim[0] + NM_SHRINK * (sim[k] - sim[0])
                fs[k] = fun(sim[k])
            nfev += n
        history.append(float(np.min(fs)))
    best = int(np.argmin(fs))
    return SimplexResult(sim[best].copy(), float(fs[best]), it, nfev, converged, history)
