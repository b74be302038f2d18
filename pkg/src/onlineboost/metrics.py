"""Error accumulation, run reports and the theory diagnostics."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

__all__ = [
    "Lemma1Certificate",
    "RunReport",
    "ase_curve",
    "complexity_report",
    "lemma1_certificate",
    "lemma2_learner_bound",
    "lemma2_learner_bound_raw",
    "theorem2_lambda_bound",
    "weighted_mse",
]


def ase_curve(errors) -> np.ndarray:
    """Accumulated squared error: prefix sums of ``e**2``."""
    e = np.asarray(errors, dtype=float)
    if e.size == 0:
        raise ValueError("need at least one error")
    return np.cumsum(e * e)


def weighted_mse(lambdas, errors) -> float:
    """``sum(lam * e**2) / (4 * sum(lam))``."""
    lam = np.asarray(lambdas, dtype=float)
    e = np.asarray(errors, dtype=float)
    if lam.shape != e.shape:
        raise ValueError(f"length mismatch: {lam.shape} vs {e.shape}")
    total = math.fsum(lam)
    if total <= 0:
        raise ValueError("weights sum to zero")
    return math.fsum(lam * e * e) / (4.0 * total)


@dataclass
class RunReport:
    """Summary of one run of the boosted regressor.

    ``ase`` holds the accumulated squared error after every round;
    ``mean_delta`` and ``learner_mse`` are the per-learner time averages
    used as plug-in estimates for the expected weight bound.
    """

    errors: np.ndarray
    ase: np.ndarray
    final_mse: float
    mean_lambda: np.ndarray
    sum_lambda: np.ndarray
    update_counts: np.ndarray
    wmse: np.ndarray
    mean_delta: np.ndarray
    learner_mse: np.ndarray
    lambda_trace: np.ndarray
    trace_every: int
    wall_time: float
    logs: dict | None = None
    state: Any = field(default=None, repr=False)

    @classmethod
    def from_accumulators(cls, acc: dict, *, T: int, counts, wall_time: float,
                          trace_every: int, state=None) -> "RunReport":
        err = acc["err"]
        ase = np.cumsum(err * err)
        sum_lam = acc["sum_lam"]
        with np.errstate(invalid="ignore", divide="ignore"):
            wmse = acc["sum_lam_e2"] / (4.0 * sum_lam)
        return cls(
            errors=err,
            ase=ase,
            final_mse=float(ase[-1] / T),
            mean_lambda=sum_lam / T,
            sum_lambda=sum_lam,
            update_counts=np.asarray(counts),
            wmse=wmse,
            mean_delta=acc["sum_delta"] / T,
            learner_mse=acc["sum_e2"] / T,
            lambda_trace=acc["trace"],
            trace_every=trace_every,
            wall_time=wall_time,
            logs=acc.get("logs"),
            state=state,
        )

    @property
    def T(self) -> int:
        return int(self.ase.shape[0])

    @property
    def m(self) -> int:
        return int(self.mean_lambda.shape[0])

    @property
    def ase_curve(self) -> list[tuple[int, float]]:
        return [(t + 1, float(a)) for t, a in enumerate(self.ase)]

    def round_logs(self) -> list:
        """Per-round logs; the run must have been made with ``keep_logs=True``."""
        from .boosting import RoundLog

        if self.logs is None:
            raise ValueError("run was made without keep_logs")
        lg = self.logs
        return [
            RoundLog(t + 1, lg["lambdas"][t], lg["losses"][t], lg["errors"][t], lg["y"][t],
                     float(self.errors[t]), lg["applied"][t])
            for t in range(self.T)
        ]


@dataclass
class Lemma1Certificate:
    M: int
    T: int
    implication_holds: bool
    violations: list[int]
    exceed_fraction: float
    lambda_fraction: float
    premises_held: bool
    premise_fractions: np.ndarray
    tail_premise_held: bool
    kappa: float
    implied_bound: float
    observed_mse: float

    @property
    def bound_verified(self) -> bool:
        """Premises held and the uniform-combination MSE respects the bound."""
        return (self.implication_holds and self.premises_held and self.tail_premise_held
                and self.observed_mse <= self.implied_bound)

    @property
    def status(self) -> str:
        if not self.implication_holds:
            return "failed"
        if self.premises_held and self.tail_premise_held:
            return "verified" if self.observed_mse <= self.implied_bound else "bound exceeded"
        return "vacuous"


def lemma1_certificate(round_logs: Sequence, M: int, kappa: float,
                       sigma_m2: float) -> Lemma1Certificate:
    """Check the uniform-combination argument on recorded rounds.

    With ``e_t`` the mean of the first ``M`` learner errors, every round with
    ``e_t**2 > sigma_m2`` must have given learner ``M + 1`` weight exactly 1.
    The premise ``sum_t lambda^(k) >= kappa T`` (k <= M) and its failure for
    ``k = M + 1`` are reported rather than assumed.
    """
    logs = list(round_logs)
    if not logs:
        raise ValueError("no rounds to certify")
    m = len(logs[0].lambdas)
    if not 1 <= M < m:
        raise ValueError(f"M must satisfy 1 <= M < m={m}; lambda^(M+1) is not logged otherwise")
    if not 0.0 < kappa < 1.0:
        raise ValueError("kappa must lie in (0, 1)")
    T = len(logs)
    errs = np.array([lg.learner_errors[:M] for lg in logs])
    lam = np.array([lg.lambdas[: M + 1] for lg in logs])
    e_mean = errs.mean(axis=1)
    exceed = e_mean ** 2 > sigma_m2
    violations = [logs[i].t for i in np.flatnonzero(exceed & (lam[:, M] != 1.0))]
    fractions = lam.sum(axis=0) / T
    return Lemma1Certificate(
        M=M,
        T=T,
        implication_holds=not violations,
        violations=violations,
        exceed_fraction=float(exceed.mean()),
        lambda_fraction=float(fractions[M]),
        premises_held=bool(np.all(fractions[:M] >= kappa)),
        premise_fractions=fractions,
        tail_premise_held=bool(fractions[M] < kappa),
        kappa=kappa,
        implied_bound=(1.0 - kappa) * sigma_m2 + kappa,
        observed_mse=float(np.mean(e_mean ** 2)),
    )


def lemma2_learner_bound_raw(kappa: float, sigma: float, sigma_m2: float) -> float:
    """``1 / ((kappa * s * ln(1/s)) * (1 - 4 s^2 + s^4 sigma_m2))`` for a given ``s``."""
    if not 0.0 < sigma < 1.0:
        raise ValueError(f"sigma must lie in (0, 1), got {sigma}")
    if kappa <= 0:
        raise ValueError("kappa must be positive")
    tail = 1.0 - 4.0 * sigma ** 2 + sigma ** 4 * sigma_m2
    denom = kappa * sigma * math.log(1.0 / sigma) * tail
    if not denom > 0:
        raise ValueError(
            f"learner bound undefined: denominator {denom:.6g} <= 0 "
            f"(1 - 4s^2 + s^4 sigma_m2 = {tail:.6g})"
        )
    return 1.0 / denom


def lemma2_learner_bound(kappa: float, sigma2: float, sigma_m2: float) -> float:
    """Upper bound on the number of learners needed, with ``s = sqrt(sigma2)``."""
    if not 0.0 < sigma2 < 1.0:
        raise ValueError(f"sigma2 must lie in (0, 1), got {sigma2}")
    return lemma2_learner_bound_raw(kappa, math.sqrt(sigma2), sigma_m2)


def theorem2_lambda_bound(gamma: float, zeta2: float, sigma_m2: float, k: int) -> float:
    """Bound on the expected weight of learner ``k`` (1-based).

    ``(gamma ** (-2 sigma_m2) * (1 + 2 zeta2 ln gamma)) ** ((1 - k) / 2)``
    """
    if not 0.0 < gamma < 1.0:
        raise ValueError(f"gamma must lie in (0, 1), got {gamma}")
    if k < 1:
        raise ValueError("k is 1-based")
    inner = 1.0 + 2.0 * zeta2 * math.log(gamma)
    if not inner > 0:
        raise ValueError(f"bound undefined: 1 + 2 zeta2 ln(gamma) = {inner:.6g} <= 0")
    A = gamma ** (-2.0 * sigma_m2) * inner
    return A ** ((1 - k) / 2)


def complexity_report(report: RunReport, r: int, mode: str, K: int = 5,
                      sigma_m2: float | None = None) -> dict:
    """Observed vs predicted update counts, with per-update cost scaling.

    Predictions: weighted ``T`` per learner, data reuse ``sum ceil(K lam)``
    (needs logs; otherwise bounded by ``K sum lam + T``), random
    ``sum lam``, Poisson ``sum lam`` in expectation.

    With ``sigma_m2`` given, the expected-weight bound is evaluated per
    learner with ``gamma`` the time-averaged ``delta`` and ``zeta2`` the
    learner's weighted MSE; learners where it is undefined get NaN.
    """
    T, m = report.T, report.m
    lam_sum = report.sum_lambda
    if mode == "weighted":
        predicted = np.full(m, float(T))
    elif mode == "data_reuse":
        if report.logs is not None:
            predicted = np.ceil(K * report.logs["lambdas"]).sum(axis=0)
        else:
            predicted = K * lam_sum
    elif mode in ("random", "oza_poisson"):
        predicted = lam_sum.copy()
    else:
        raise ValueError(f"unknown mode {mode!r}")
    observed = np.asarray(report.update_counts)
    out = {
        "mode": mode,
        "T": T,
        "m": m,
        "observed": observed,
        "predicted": predicted,
        "observed_total": int(observed.sum()),
        "predicted_total": float(predicted.sum()),
        "weighted_total": m * T,
        # binomial spread of a Bernoulli-gated count around sum(lam)
        "binomial_std": float(np.sqrt(np.sum(report.logs["lambdas"] * (1 - report.logs["lambdas"]))))
        if report.logs is not None else None,
        "cost_per_update_nm": r * r,
        "cost_per_update_sgd": r,
    }
    if sigma_m2 is not None:
        # zeta2 in the same /4 units as delta, so gamma and zeta2 are comparable
        bounds = []
        for k in range(1, m + 1):
            gamma = float(report.mean_delta[k - 1])
            zeta2 = float(report.wmse[k - 1])
            try:
                bounds.append(theorem2_lambda_bound(gamma, zeta2, sigma_m2, k))
            except ValueError:
                bounds.append(float("nan"))
        out["lambda_bound_estimated"] = np.array(bounds)
    return out
