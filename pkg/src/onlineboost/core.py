"""Shared types, seeded randomness and small parameter utilities.

Random streams use xoshiro256** seeded through SplitMix64. Derived draws:

* uniform: top 53 bits of the next output, scaled into [0, 1)
* normal: Marsaglia polar method; the second variate of each accepted
  pair is discarded so the stream state is a plain 4-word array
* Bernoulli(p): ``uniform() < p``
* Poisson(lam): inversion by sequential search of the CDF

All generator arithmetic lives in numba kernels so the boosting engine can
draw from the same stream without leaving compiled code.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields

import numpy as np
from numba import njit, uint64

__all__ = [
    "BoostConfig",
    "RngStream",
    "Sample",
    "clamp_unit",
    "derive_trial_seed",
    "sigma_m_from_target",
    "splitmix64",
]

MASK64 = (1 << 64) - 1
GOLDEN_GAMMA = 0x9E3779B97F4A7C15

LEARNERS = ("sgd", "nm")
MODES = ("weighted", "data_reuse", "oza_poisson", "random")


@dataclass(frozen=True)
class Sample:
    """One regressor vector (bias last) and its desired output."""

    x: np.ndarray
    d: float

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        if x.ndim != 1:
            raise ValueError(f"regressor must be 1-d, got shape {x.shape}")
        if not (np.all(np.isfinite(x)) and math.isfinite(self.d)):
            raise ValueError("sample entries must be finite")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "d", float(self.d))


@dataclass
class BoostConfig:
    """Tunables of the boosted online regressor.

    ``sigma2`` switches the weights to the known-bound rule
    ``min(1, sigma2 ** (l / 2))``; when ``None`` the adaptive rule based on
    each learner's running thresholded MSE is used.
    """

    m: int = 20
    sigma_m2: float = 0.02
    c: float = 1.0
    K: int = 5
    mu: float = 0.1
    mu_z: float = 1e-4
    beta: float = 0.9999
    v: float = 0.01
    mode: str = "weighted"
    learner: str = "sgd"
    seed: int = 0
    delta_floor: float = 1e-6
    sigma2: float | None = None
    combiner_eps: float = 1e-12
    trace_every: int = 10
    keep_logs: bool = False

    def __post_init__(self):
        self.validate()

    def validate(self):
        if int(self.m) != self.m or self.m < 1:
            raise ValueError(f"m must be a positive integer, got {self.m}")
        if int(self.K) != self.K or self.K < 1:
            raise ValueError(f"K must be a positive integer, got {self.K}")
        if not 0.0 < self.beta <= 1.0:
            raise ValueError(f"beta must lie in (0, 1], got {self.beta}")
        if self.v <= 0:
            raise ValueError(f"v must be positive, got {self.v}")
        if self.mu <= 0 or self.mu_z <= 0:
            raise ValueError("step sizes mu and mu_z must be positive")
        if self.sigma_m2 < 0 or self.c < 0:
            raise ValueError("sigma_m2 and c must be nonnegative")
        if not 0.0 < self.delta_floor < 1.0:
            raise ValueError(f"delta_floor must lie in (0, 1), got {self.delta_floor}")
        if self.sigma2 is not None and not 0.0 < self.sigma2 <= 1.0:
            raise ValueError(f"sigma2 must lie in (0, 1], got {self.sigma2}")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.learner not in LEARNERS:
            raise ValueError(f"learner must be one of {LEARNERS}, got {self.learner!r}")
        if self.trace_every < 1:
            raise ValueError("trace_every must be >= 1")
        if not 0 <= int(self.seed) <= MASK64:
            raise ValueError("seed must fit in 64 unsigned bits")

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def clamp_unit(y: float) -> float:
    """Clip ``y`` into [-1, 1]."""
    if not math.isfinite(y):
        raise ValueError(f"clamp_unit needs a finite value, got {y}")
    return min(1.0, max(-1.0, y))


def sigma_m_from_target(sigma_d2: float, kappa: float) -> float:
    """Modified per-learner MSE target ``(sigma_d2 - kappa) / (1 - kappa)``."""
    if not 0.0 <= kappa < 1.0:
        raise ValueError(f"kappa must lie in [0, 1), got {kappa}")
    if not kappa < sigma_d2 <= 1.0:
        raise ValueError(
            f"need kappa < sigma_d2 <= 1, got kappa={kappa}, sigma_d2={sigma_d2}"
        )
    return (sigma_d2 - kappa) / (1.0 - kappa)


def splitmix64(state: int) -> tuple[int, int]:
    """One SplitMix64 step: returns ``(new_state, output)``."""
    state = (state + GOLDEN_GAMMA) & MASK64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return state, z ^ (z >> 31)


def derive_trial_seed(base: int, trial: int) -> int:
    """Seed for trial ``trial``: output number ``trial + 1`` of SplitMix64(base).

    The finalizer is a bijection on 64-bit words and the pre-images
    ``base + (trial + 1) * gamma`` are distinct for distinct trials, so the
    map is injective in ``trial``.
    """
    if trial < 0:
        raise ValueError(f"trial must be >= 0, got {trial}")
    state = (int(base) + trial * GOLDEN_GAMMA) & MASK64
    return splitmix64(state)[1]


def _seed_state(seed: int) -> np.ndarray:
    s = int(seed) & MASK64
    words = []
    for _ in range(4):
        s, out = splitmix64(s)
        words.append(out)
    return np.array(words, dtype=np.uint64)


@njit(cache=True)
def _rotl(x, k):
    return (x << uint64(k)) | (x >> uint64(64 - k))


@njit(cache=True)
def rng_next(s):
    result = _rotl(s[1] * uint64(5), 7) * uint64(9)
    t = s[1] << uint64(17)
    s[2] ^= s[0]
    s[3] ^= s[1]
    s[1] ^= s[2]
    s[0] ^= s[3]
    s[2] ^= t
    s[3] = _rotl(s[3], 45)
    return result


@njit(cache=True)
def rng_uniform(s):
    return float(rng_next(s) >> uint64(11)) * (1.0 / 9007199254740992.0)


@njit(cache=True)
def rng_normal(s):
    while True:
        u = 2.0 * rng_uniform(s) - 1.0
        v = 2.0 * rng_uniform(s) - 1.0
        q = u * u + v * v
        if 0.0 < q < 1.0:
            return u * math.sqrt(-2.0 * math.log(q) / q)


@njit(cache=True)
def rng_bernoulli(s, p):
    return 1 if rng_uniform(s) < p else 0


@njit(cache=True)
def rng_poisson(s, lam):
    u = rng_uniform(s)
    p = math.exp(-lam)
    cdf = p
    n = 0
    # the cap only matters for pathological rounding at cdf ~ 1
    while u > cdf and n < 10000:
        n += 1
        p *= lam / n
        cdf += p
    return n


@njit(cache=True)
def _fill_normal(s, out):
    for i in range(out.shape[0]):
        out[i] = rng_normal(s)


@njit(cache=True)
def _fill_uniform(s, out):
    for i in range(out.shape[0]):
        out[i] = rng_uniform(s)


@dataclass
class RngStream:
    """Deterministic single-owner random stream."""

    seed: int
    state: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.state = _seed_state(self.seed)

    def next_u64(self) -> int:
        return int(rng_next(self.state))

    def uniform(self) -> float:
        return rng_uniform(self.state)

    def normal(self, size: int | None = None):
        if size is None:
            return rng_normal(self.state)
        out = np.empty(size)
        _fill_normal(self.state, out)
        return out

    def uniforms(self, size: int) -> np.ndarray:
        out = np.empty(size)
        _fill_uniform(self.state, out)
        return out

    def bernoulli(self, p: float) -> int:
        return rng_bernoulli(self.state, p)

    def poisson(self, lam: float) -> int:
        return rng_poisson(self.state, lam)

    def copy(self) -> "RngStream":
        other = RngStream.__new__(RngStream)
        other.seed = self.seed
        other.state = self.state.copy()
        return other
