"""Boosted online regression engine.

Each round: all learners predict with their current coefficients, the
combiner mixes the outputs, then learners are visited top to bottom. The
k-th learner gets an importance weight from the running loss ladder and its
own thresholded MSE estimate, is updated according to the scheduling mode,
and passes the ladder on. The combiner is updated last with normalized SGD.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace

import numpy as np
from numba import njit

from .core import BoostConfig, MODES, RngStream, Sample, clamp_unit, rng_bernoulli, rng_poisson
from .learners import NmState, NumericalError, SgdState, dot, nm_inplace, sgd_inplace
from .metrics import RunReport

__all__ = [
    "EnsembleState",
    "LearnerSlot",
    "RoundLog",
    "combiner_predict",
    "combiner_update",
    "compute_weight",
    "compute_weight_known_sigma",
    "run_round",
    "run_stream",
    "schedule_updates",
    "update_delta",
    "update_loss",
]

WEIGHT_FLOOR = 1e-300

_MODE_CODE = {name: i for i, name in enumerate(MODES)}
_WEIGHTED, _DATA_REUSE, _OZA, _RANDOM = range(4)


# ---------------------------------------------------------------- scalar rules


@njit(cache=True)
def _loss(l, sigma_m2, e):
    return l + (sigma_m2 - e * e)


@njit(cache=True)
def _weight(delta_prev, c, l, floor):
    b = min(1.0, max(floor, delta_prev))
    expo = c * l * math.log(b)
    if expo >= 0.0:
        return 1.0
    return max(WEIGHT_FLOOR, math.exp(expo))


@njit(cache=True)
def _weight_known(sigma2, l):
    expo = 0.5 * l * math.log(sigma2)
    if expo >= 0.0:
        return 1.0
    return max(WEIGHT_FLOOR, math.exp(expo))


@njit(cache=True)
def _delta(delta_prev, lam_prev, lam, d, f):
    fc = min(1.0, max(-1.0, f))
    r = d - fc
    total = lam_prev + lam
    return (lam_prev * delta_prev + 0.25 * lam * r * r) / total, total


def update_loss(l: float, sigma_m2: float, e: float) -> float:
    """Next rung of the loss ladder: ``l + sigma_m2 - e**2``."""
    return float(_loss(l, sigma_m2, e))


def compute_weight(delta_prev: float, c: float, l: float, floor: float = 1e-6) -> float:
    """Importance weight ``min(1, delta_prev ** (c * l))``.

    The base is clipped into ``[floor, 1]`` and the power is taken in log
    space, saturating at 1 and never dropping below 1e-300.
    """
    if c < 0:
        raise ValueError("c must be nonnegative")
    if not 0.0 < floor < 1.0:
        raise ValueError("floor must lie in (0, 1)")
    return float(_weight(delta_prev, c, l, floor))


def compute_weight_known_sigma(sigma2: float, l: float) -> float:
    """Weight from an a-priori weighted-MSE bound: ``min(1, sigma2 ** (l/2))``."""
    if not 0.0 < sigma2 <= 1.0:
        raise ValueError(f"sigma2 must lie in (0, 1], got {sigma2}")
    return float(_weight_known(sigma2, l))


def update_delta(delta_prev: float, capital_lambda_prev: float, lam: float,
                 d: float, f: float) -> tuple[float, float]:
    """Recursive weighted, thresholded MSE and its weight total."""
    if not lam > 0:
        raise ValueError("lambda must be positive")
    if capital_lambda_prev < 0:
        raise ValueError("accumulated weight must be nonnegative")
    clamp_unit(f)
    delta, total = _delta(delta_prev, capital_lambda_prev, lam, d, f)
    return float(delta), float(total)


def schedule_updates(mode: str, lam: float, K: int = 5, rng: RngStream | None = None) -> int:
    """Number of learner updates to apply for weight ``lam``.

    ``weighted`` always gives one (the weight scales that update);
    ``data_reuse`` gives ``ceil(K * lam)`` unit updates; ``oza_poisson``
    draws Poisson(lam); ``random`` draws Bernoulli(lam).
    """
    if not 0.0 < lam <= 1.0:
        raise ValueError(f"lambda must lie in (0, 1], got {lam}")
    if mode == "weighted":
        return 1
    if mode == "data_reuse":
        return math.ceil(K * lam)
    if rng is None:
        raise ValueError(f"mode {mode!r} needs a random stream")
    if mode == "oza_poisson":
        return int(rng_poisson(rng.state, lam))
    if mode == "random":
        return int(rng_bernoulli(rng.state, lam))
    raise ValueError(f"unknown mode {mode!r}")


def combiner_predict(z, y) -> float:
    z = np.asarray(z, dtype=float)
    y = np.asarray(y, dtype=float)
    if z.shape != y.shape:
        raise ValueError(f"dimension mismatch: z {z.shape}, y {y.shape}")
    return float(dot(z, y))


@njit(cache=True)
def _combiner_inplace(z, y, e, mu_z, eps):
    yy = dot(y, y)
    if yy < eps:
        return
    g = mu_z * e / yy
    for i in range(z.shape[0]):
        z[i] += g * y[i]


def combiner_update(z, y, e: float, mu_z: float, eps: float = 1e-12) -> np.ndarray:
    """Normalized SGD step ``z + mu_z * e * y / |y|^2`` (no-op when |y|^2 < eps)."""
    if mu_z <= 0:
        raise ValueError("mu_z must be positive")
    z = np.array(z, dtype=float, copy=True)
    y = np.asarray(y, dtype=float)
    if z.shape != y.shape:
        raise ValueError(f"dimension mismatch: z {z.shape}, y {y.shape}")
    _combiner_inplace(z, y, e, mu_z, eps)
    return z


# ---------------------------------------------------------------- round kernel

# fparams: sigma_m2, c, mu, mu_z, beta, delta_floor, sigma2 (0 = adaptive), eps
# iparams: learner (0 sgd, 1 nm), mode, K, freeze_combiner


@njit(cache=True)
def _round(W, P, delta, Lam, z, counts, x, d, fp, ip, rng, scratch,
           y, lambdas, losses, errors, applied):
    """One boosting round in place.

    Returns ``(status, prediction)``; status is -1, or the index of a learner
    whose RLS update broke down.
    """
    m = W.shape[0]
    sigma_m2 = fp[0]
    c = fp[1]
    mu = fp[2]
    beta = fp[4]
    floor = fp[5]
    sigma2 = fp[6]
    nm = ip[0] == 1
    mode = ip[1]
    K = ip[2]

    for k in range(m):
        y[k] = dot(W[k], x)
    dhat = dot(z, y)

    l = 0.0
    losses[0] = 0.0
    for k in range(m):
        if k == 0:
            lam = 1.0
        elif sigma2 > 0.0:
            lam = _weight_known(sigma2, l)
        elif Lam[k] == 0.0:
            lam = 1.0
        else:
            lam = _weight(delta[k], c, l, floor)
        lambdas[k] = lam

        if mode == _WEIGHTED:
            n = 1
        elif mode == _DATA_REUSE:
            n = int(math.ceil(K * lam))
        elif mode == _OZA:
            n = rng_poisson(rng, lam)
        else:
            n = rng_bernoulli(rng, lam)

        if nm:
            step_lam = lam if mode == _WEIGHTED else 1.0
            for _ in range(n):
                _, denom = nm_inplace(W[k], P[k], scratch, x, d, step_lam, beta)
                if not denom > 0.0:
                    return k, dhat
        else:
            if mode == _WEIGHTED:
                step = mu * lam
            elif mode == _DATA_REUSE:
                step = mu / K
            else:
                step = mu
            for _ in range(n):
                sgd_inplace(W[k], x, d, step)
        applied[k] = n
        counts[k] += n

        e = d - y[k]
        errors[k] = e
        delta[k], Lam[k] = _delta(delta[k], Lam[k], lam, d, y[k])
        l = _loss(l, sigma_m2, e)
        losses[k + 1] = l

    if ip[3] == 0:
        _combiner_inplace(z, y, d - dhat, fp[3], fp[7])
    return -1, dhat


@njit(cache=True)
def _run(X, D, W, P, delta, Lam, z, counts, fp, ip, rng,
         err, sum_lam, sum_lam_e2, sum_e2, sum_delta, trace_every, trace,
         keep, log_y, log_lam, log_loss, log_err, log_applied):
    T = X.shape[0]
    m = W.shape[0]
    r = X.shape[1]
    scratch = np.empty(r)
    y = np.empty(m)
    lambdas = np.empty(m)
    losses = np.empty(m + 1)
    errors = np.empty(m)
    applied = np.zeros(m, dtype=np.int64)
    for t in range(T):
        for k in range(m):
            sum_delta[k] += delta[k]
        bad, dhat = _round(W, P, delta, Lam, z, counts, X[t], D[t], fp, ip, rng, scratch,
                           y, lambdas, losses, errors, applied)
        if bad >= 0:
            return t, bad
        err[t] = D[t] - dhat
        for k in range(m):
            sum_lam[k] += lambdas[k]
            sum_lam_e2[k] += lambdas[k] * errors[k] * errors[k]
            sum_e2[k] += errors[k] * errors[k]
        if t % trace_every == 0:
            row = t // trace_every
            for k in range(m):
                trace[row, k] = lambdas[k]
        if keep:
            for k in range(m):
                log_y[t, k] = y[k]
                log_lam[t, k] = lambdas[k]
                log_err[t, k] = errors[k]
                log_applied[t, k] = applied[k]
            for k in range(m + 1):
                log_loss[t, k] = losses[k]
    return -1, -1


# ---------------------------------------------------------------- state


@dataclass
class LearnerSlot:
    state: SgdState | NmState
    delta: float
    capital_lambda: float
    update_count: int


@dataclass
class RoundLog:
    t: int
    lambdas: np.ndarray
    losses: np.ndarray
    learner_errors: np.ndarray
    learner_outputs: np.ndarray
    final_error: float
    updates_applied: np.ndarray
    prediction: float = float("nan")


@dataclass
class EnsembleState:
    """Coefficients and accumulators of all learners plus the combiner.

    Learner coefficients are stored row-wise in ``W`` (and ``P`` for NM) so
    the compiled round kernel can update them in place.
    """

    config: BoostConfig
    W: np.ndarray
    P: np.ndarray
    delta: np.ndarray
    Lam: np.ndarray
    z: np.ndarray
    counts: np.ndarray
    rng: RngStream
    t: int = 0
    _fp: np.ndarray = field(default=None, repr=False)
    _ip: np.ndarray = field(default=None, repr=False)

    @classmethod
    def initial(cls, config: BoostConfig, r: int) -> "EnsembleState":
        config.validate()
        m = config.m
        if config.learner == "nm":
            P = np.repeat((np.eye(r) / config.v)[None], m, axis=0)
        else:
            P = np.zeros((m, 0, 0))
        return cls(
            config=config,
            W=np.zeros((m, r)),
            P=P,
            delta=np.zeros(m),
            Lam=np.zeros(m),
            z=np.full(m, 1.0 / m),
            counts=np.zeros(m, dtype=np.int64),
            rng=RngStream(config.seed),
        )

    def __post_init__(self):
        cfg = self.config
        self._fp = np.array([
            cfg.sigma_m2, cfg.c, cfg.mu, cfg.mu_z, cfg.beta, cfg.delta_floor,
            0.0 if cfg.sigma2 is None else cfg.sigma2, cfg.combiner_eps,
        ])
        # a single learner is its own ensemble: the combiner stays at z = [1]
        self._ip = np.array([
            1 if cfg.learner == "nm" else 0, _MODE_CODE[cfg.mode], cfg.K,
            1 if cfg.m == 1 else 0,
        ], dtype=np.int64)

    @property
    def m(self) -> int:
        return self.W.shape[0]

    @property
    def r(self) -> int:
        return self.W.shape[1]

    @property
    def slots(self) -> list[LearnerSlot]:
        out = []
        for k in range(self.m):
            if self.config.learner == "nm":
                st = NmState(self.W[k].copy(), self.P[k].copy(), self.config.beta)
            else:
                step = self.config.mu
                st = SgdState(self.W[k].copy(), step)
            out.append(LearnerSlot(st, float(self.delta[k]), float(self.Lam[k]),
                                   int(self.counts[k])))
        return out

    def outputs(self, x) -> np.ndarray:
        return self.W @ np.asarray(x, dtype=float)

    def predict(self, x) -> float:
        return float(self.z @ self.outputs(x))

    def copy(self) -> "EnsembleState":
        return replace(
            self, W=self.W.copy(), P=self.P.copy(), delta=self.delta.copy(),
            Lam=self.Lam.copy(), z=self.z.copy(), counts=self.counts.copy(),
            rng=self.rng.copy(),
        )


def _raise_numerical(state: EnsembleState, t: int, k: int):
    raise NumericalError(
        f"learner {k + 1} failed at round {t + 1}: nonpositive RLS gain denominator "
        f"(max|P|={np.abs(state.P[k]).max():.3e}, beta={state.config.beta})"
    )


def run_round(state: EnsembleState, sample: Sample) -> tuple[EnsembleState, RoundLog]:
    """Apply one round to a copy of ``state``; returns it with the round log."""
    if sample.x.shape[0] != state.r:
        raise ValueError(f"sample has {sample.x.shape[0]} features, state expects {state.r}")
    new = state.copy()
    m = new.m
    y, lambdas, errors = np.empty(m), np.empty(m), np.empty(m)
    losses = np.empty(m + 1)
    applied = np.zeros(m, dtype=np.int64)
    bad, dhat = _round(new.W, new.P, new.delta, new.Lam, new.z, new.counts,
                       sample.x, sample.d,
                       new._fp, new._ip, new.rng.state, np.empty(new.r),
                       y, lambdas, losses, errors, applied)
    if bad >= 0:
        _raise_numerical(new, new.t, bad)
    log = RoundLog(new.t + 1, lambdas, losses, errors, y, sample.d - dhat, applied, float(dhat))
    new.t += 1
    return new, log


def _stream_arrays(stream) -> tuple[np.ndarray, np.ndarray]:
    if hasattr(stream, "X") and hasattr(stream, "d"):
        return np.ascontiguousarray(stream.X, float), np.ascontiguousarray(stream.d, float)
    if isinstance(stream, tuple) and len(stream) == 2:
        return np.ascontiguousarray(stream[0], float), np.ascontiguousarray(stream[1], float)
    samples = list(stream)
    if not samples:
        return np.empty((0, 0)), np.empty(0)
    return np.array([s.x for s in samples]), np.array([s.d for s in samples])


def advance(state: EnsembleState, X: np.ndarray, D: np.ndarray, keep_logs: bool = False) -> dict:
    """Run the compiled loop over ``(X, D)``, mutating ``state``; returns raw accumulators."""
    T, r = X.shape
    if r != state.r:
        raise ValueError(f"stream has {r} features, state expects {state.r}")
    m = state.m
    every = state.config.trace_every
    acc = {
        "err": np.empty(T),
        "sum_lam": np.zeros(m),
        "sum_lam_e2": np.zeros(m),
        "sum_e2": np.zeros(m),
        "sum_delta": np.zeros(m),
        "trace": np.empty(((T + every - 1) // every, m)),
    }
    shape = (T, m) if keep_logs else (0, m)
    logs = {
        "y": np.empty(shape), "lambdas": np.empty(shape),
        "losses": np.empty((shape[0], m + 1)), "errors": np.empty(shape),
        "applied": np.empty(shape, dtype=np.int64),
    }
    bad_t, bad_k = _run(X, D, state.W, state.P, state.delta, state.Lam, state.z, state.counts,
                        state._fp, state._ip, state.rng.state,
                        acc["err"], acc["sum_lam"], acc["sum_lam_e2"], acc["sum_e2"],
                        acc["sum_delta"], every, acc["trace"], keep_logs,
                        logs["y"], logs["lambdas"], logs["losses"], logs["errors"],
                        logs["applied"])
    if bad_t >= 0:
        _raise_numerical(state, state.t + bad_t, bad_k)
    state.t += T
    if keep_logs:
        acc["logs"] = logs
    return acc


def run_stream(config: BoostConfig, stream) -> RunReport:
    """Run a fresh ensemble over ``stream`` and summarize it.

    ``stream`` may be a sequence of samples, a ``Stream`` or an ``(X, d)``
    pair.
    """
    X, D = _stream_arrays(stream)
    if X.shape[0] == 0:
        raise ValueError("cannot run on an empty stream")
    start = time.perf_counter()
    state = EnsembleState.initial(config, X.shape[1])
    acc = advance(state, X, D, keep_logs=config.keep_logs)
    wall = time.perf_counter() - start
    T = X.shape[0]
    return RunReport.from_accumulators(acc, T=T, counts=state.counts.copy(), wall_time=wall,
                                       trace_every=config.trace_every, state=state)
