"""Linear weak learners: prediction, scaled SGD step, weighted NM (RLS) step.

The ``*_inplace`` kernels are the arithmetic used by the boosting engine;
the public functions wrap them and return fresh states, so stand-alone use
and ensemble use share one code path.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .core import Sample

__all__ = [
    "NmState",
    "NumericalError",
    "SgdState",
    "batch_ls_oracle",
    "nm_forward_fit",
    "nm_weighted_step",
    "predict",
    "sgd_step",
]


class NumericalError(RuntimeError):
    """A learner's state became numerically unusable."""


@dataclass
class SgdState:
    w: np.ndarray
    mu: float

    @classmethod
    def zeros(cls, r: int, mu: float) -> "SgdState":
        return cls(np.zeros(r), float(mu))


@dataclass
class NmState:
    w: np.ndarray
    P: np.ndarray
    beta: float = 1.0

    @classmethod
    def initial(cls, r: int, v: float, beta: float = 1.0) -> "NmState":
        """Zero coefficients with ``P = I / v``."""
        return cls(np.zeros(r), np.eye(r) / v, float(beta))


@njit(cache=True)
def dot(w, x):
    acc = 0.0
    for i in range(x.shape[0]):
        acc += w[i] * x[i]
    return acc


@njit(cache=True)
def sgd_inplace(w, x, d, step):
    """``w += step * (d - w.x) * x``; returns the pre-update error."""
    e = d - dot(w, x)
    g = step * e
    for i in range(x.shape[0]):
        w[i] += g * x[i]
    return e


@njit(cache=True)
def nm_inplace(w, P, px, x, d, lam, beta):
    """Weighted RLS step with forgetting; ``px`` is scratch of length r.

    Returns ``(e, denom)``; a nonpositive ``denom`` means P is broken and
    nothing was modified.
    """
    r = x.shape[0]
    e = d - dot(w, x)
    for i in range(r):
        acc = 0.0
        for j in range(r):
            acc += P[i, j] * x[j]
        px[i] = acc
    xpx = dot(x, px)
    denom = beta + lam * xpx
    if not denom > 0.0:
        return e, denom
    scale = lam / denom
    # g = scale * P x ; x^T P = (P x)^T by symmetry of P
    for i in range(r):
        w[i] += e * scale * px[i]
    inv_beta = 1.0 / beta
    for i in range(r):
        gi = scale * px[i]
        for j in range(r):
            P[i, j] = (P[i, j] - gi * px[j]) * inv_beta
    for i in range(r):
        for j in range(i + 1, r):
            s = 0.5 * (P[i, j] + P[j, i])
            P[i, j] = s
            P[j, i] = s
    return e, denom


def _check_dim(w: np.ndarray, x: np.ndarray):
    if w.shape != x.shape:
        raise ValueError(f"dimension mismatch: coefficients {w.shape}, regressor {x.shape}")


def predict(state: SgdState | NmState, x) -> float:
    """Unclamped linear prediction ``w . x``."""
    x = np.asarray(x, dtype=float)
    _check_dim(state.w, x)
    return float(dot(state.w, x))


def sgd_step(state: SgdState, sample: Sample, lam: float = 1.0) -> SgdState:
    """One SGD step with the learning rate scaled by ``lam``."""
    if not 0.0 < lam <= 1.0:
        raise ValueError(f"lambda must lie in (0, 1], got {lam}")
    _check_dim(state.w, sample.x)
    w = state.w.copy()
    sgd_inplace(w, sample.x, sample.d, state.mu * lam)
    return SgdState(w, state.mu)


def nm_weighted_step(state: NmState, sample: Sample, lam: float = 1.0) -> tuple[NmState, float]:
    """One weighted NM step; returns the new state and the pre-update error.

    ``lam = 0`` is the continuous limit: coefficients unchanged, ``P / beta``.
    """
    if not 0.0 <= lam <= 1.0:
        raise ValueError(f"lambda must lie in [0, 1], got {lam}")
    if not 0.0 < state.beta <= 1.0:
        raise ValueError(f"beta must lie in (0, 1], got {state.beta}")
    _check_dim(state.w, sample.x)
    if not np.all(np.isfinite(state.P)):
        raise NumericalError("P contains non-finite entries")
    w = state.w.copy()
    P = np.array(state.P, dtype=float, copy=True)
    e, denom = nm_inplace(w, P, np.empty_like(w), sample.x, sample.d, lam, state.beta)
    if not denom > 0.0:
        raise NumericalError(
            f"gain denominator beta + lam x'Px = {denom!r} <= 0 "
            f"(beta={state.beta}, lam={lam}, max|P|={np.abs(state.P).max():.3e})"
        )
    return NmState(w, P, state.beta), float(e)


def _as_arrays(history) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(history, tuple) and len(history) == 2:
        return np.atleast_2d(np.asarray(history[0], float)), np.asarray(history[1], float)
    history = list(history)
    if not history:
        return np.empty((0, 0)), np.empty(0)
    return np.array([s.x for s in history]), np.array([s.d for s in history])


def batch_ls_oracle(history, ridge: float = 0.0) -> np.ndarray:
    """Fixed coefficients minimizing ``sum (d - x.w)^2 + ridge |w|^2``.

    ``history`` is a sequence of samples or an ``(X, d)`` pair.
    """
    if ridge < 0:
        raise ValueError("ridge must be nonnegative")
    X, d = _as_arrays(history)
    if X.size == 0:
        raise ValueError("empty history")
    G = X.T @ X + ridge * np.eye(X.shape[1])
    try:
        cond = np.linalg.cond(G)
    except np.linalg.LinAlgError:
        cond = np.inf
    if not np.isfinite(cond) or cond > 1e14:
        raise np.linalg.LinAlgError(f"batch system is singular (cond={cond:.3e})")
    return np.linalg.solve(G, X.T @ d)


def nm_forward_fit(history, x_new, v: float = 0.0) -> float:
    """Forward-NM prediction: the Gram sum includes ``x_new`` itself.

    ``w = (v I + sum_{l<=t} x_l x_l' )^-1 sum_{l<t} x_l d_l`` with
    ``x_t = x_new``; returns ``x_new . w``.
    """
    x_new = np.asarray(x_new, dtype=float)
    X, d = _as_arrays(history)
    r = x_new.shape[0]
    G = np.outer(x_new, x_new) + v * np.eye(r)
    b = np.zeros(r)
    if X.size:
        if X.shape[1] != r:
            raise ValueError(f"dimension mismatch: history {X.shape[1]}, x_new {r}")
        G += X.T @ X
        b = X.T @ d
    if not b.any():
        return 0.0
    if np.linalg.matrix_rank(G) < r:
        raise np.linalg.LinAlgError("forward Gram matrix is singular; pass v > 0")
    return float(x_new @ np.linalg.solve(G, b))
