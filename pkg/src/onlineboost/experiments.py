"""Multi-trial experiments, parameter sweeps and regret checks.

Trial ``i`` of an experiment with base seed ``s`` draws its stream from
``derive_trial_seed(s, 2 i)`` and its update-scheduling stream from
``derive_trial_seed(s, 2 i + 1)``. Streams therefore depend only on
``(s, i)``, so different algorithms see identical data trial by trial.
"""

from __future__ import annotations

import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from .boosting import EnsembleState, advance, run_stream
from .core import BoostConfig, derive_trial_seed
from .data import Stream, StreamSpec, format_number, make_stream
from .learners import batch_ls_oracle
from .metrics import RunReport

__all__ = [
    "ALGORITHMS",
    "ConfigError",
    "ExperimentConfig",
    "ExperimentResult",
    "family_defaults",
    "read_config_file",
    "regret_curve",
    "resolve_config",
    "run_experiment",
    "run_sweep",
    "write_experiment",
]

# label -> (learner, mode, boosted)
ALGORITHMS = {
    "sgd": ("sgd", "weighted", False),
    "nm": ("nm", "weighted", False),
    "bsgd-wu": ("sgd", "weighted", True),
    "bsgd-dr": ("sgd", "data_reuse", True),
    "bsgd-ru": ("sgd", "random", True),
    "bsgd-oza": ("sgd", "oza_poisson", True),
    "bnm-wu": ("nm", "weighted", True),
    "bnm-dr": ("nm", "data_reuse", True),
    "bnm-ru": ("nm", "random", True),
    "bnm-oza": ("nm", "oza_poisson", True),
}

SWEEP_PARAMETERS = ("sigma_m2", "c", "m")


class ConfigError(ValueError):
    """Inconsistent or unknown experiment settings."""


def family_defaults(stream_kind: str, learner: str) -> dict:
    """Default settings for the stationary and Duffing stream families."""
    base = {"m": 20, "mu": 0.1, "K": 5, "c": 1.0}
    if stream_kind == "duffing":
        base.update(beta=0.999, sigma_m2=0.25 if learner == "sgd" else 0.17, T=10000)
    else:
        base.update(beta=0.9999, sigma_m2=0.02 if learner == "sgd" else 0.004, T=10000)
    return base


def default_trials(stream_kind: str, mode: str) -> int:
    if stream_kind == "duffing":
        return 20 if mode in ("random", "oza_poisson") else 1
    return 100


@dataclass
class ExperimentConfig:
    algorithm: str = "bsgd-wu"
    stream: StreamSpec = field(default_factory=StreamSpec)
    trials: int = 1
    workers: int = 1
    seed: int = 0
    m: int = 20
    sigma_m2: float = 0.02
    c: float = 1.0
    K: int = 5
    mu: float = 0.1
    mu_z: float = 1e-4
    beta: float = 0.9999
    v: float = 0.01
    delta_floor: float = 1e-6
    trace: bool = False
    trace_every: int = 10

    @property
    def learner(self) -> str:
        return ALGORITHMS[self.algorithm][0]

    @property
    def mode(self) -> str:
        return ALGORITHMS[self.algorithm][1]

    def boost_config(self, seed: int) -> BoostConfig:
        return BoostConfig(
            m=self.m, sigma_m2=self.sigma_m2, c=self.c, K=self.K, mu=self.mu,
            mu_z=self.mu_z, beta=self.beta, v=self.v, mode=self.mode,
            learner=self.learner, seed=seed, delta_floor=self.delta_floor,
            trace_every=self.trace_every,
        )

    def as_items(self) -> list[tuple[str, object]]:
        s = self.stream
        items = [("algorithm", self.algorithm), ("stream", s.kind), ("T", s.T)]
        if s.kind == "stationary":
            items += [("noise_var", s.noise_var), ("rho", s.rho)]
        if s.kind == "csv":
            items += [("path", s.path), ("has_header", s.has_header),
                      ("target_column", s.target_column), ("normalize", s.normalize)]
        for f in fields(self):
            if f.name not in ("algorithm", "stream"):
                items.append((f.name, getattr(self, f.name)))
        return items


_STREAM_KEYS = {"T": int, "noise_var": float, "rho": float, "path": str,
                "has_header": "bool", "target_column": int, "normalize": "bool"}
_EXPERIMENT_KEYS = {"trials": int, "workers": int, "seed": int, "m": int, "sigma_m2": float,
                    "c": float, "K": int, "mu": float, "mu_z": float, "beta": float,
                    "v": float, "delta_floor": float, "trace": "bool", "trace_every": int}
KNOWN_KEYS = {"algorithm", "stream"} | set(_STREAM_KEYS) | set(_EXPERIMENT_KEYS)


def _coerce(key: str, value, kind):
    if isinstance(value, str):
        value = value.strip()
    try:
        if kind == "bool":
            if isinstance(value, bool):
                return value
            low = str(value).lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(value)
        if kind is int:
            f = float(value)
            if f != int(f):
                raise ValueError(value)
            return int(f)
        return kind(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{key}: cannot read {value!r} as {getattr(kind, '__name__', kind)}") from None


def read_config_file(path) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for n, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{n}: expected 'key = value', got {raw!r}")
        key, value = (p.strip() for p in line.split("=", 1))
        if key not in KNOWN_KEYS:
            raise ConfigError(f"{path}:{n}: unknown key {key!r}")
        out[key] = value
    return out


def resolve_config(settings: dict) -> ExperimentConfig:
    """Build a fully resolved config from raw settings over family defaults.

    Precedence, lowest first: built-in defaults for the stream family and
    learner, then ``settings`` (a config file merged with command-line flags
    by the caller, flags winning).
    """
    unknown = set(settings) - KNOWN_KEYS
    if unknown:
        raise ConfigError(f"unknown setting(s): {', '.join(sorted(unknown))}")
    algorithm = str(settings.get("algorithm", "bsgd-wu")).lower()
    if algorithm not in ALGORITHMS:
        raise ConfigError(f"unknown algorithm {algorithm!r}; choose from {', '.join(ALGORITHMS)}")
    learner, mode, boosted = ALGORITHMS[algorithm]
    kind = str(settings.get("stream", "stationary")).lower()
    if kind not in ("stationary", "duffing", "csv"):
        raise ConfigError(f"unknown stream {kind!r}")

    defaults = family_defaults(kind, learner)
    values = {k: v for k, v in defaults.items() if k in _EXPERIMENT_KEYS}
    values["trials"] = default_trials(kind, mode)
    stream_values = {"T": defaults["T"]}
    for key, raw in settings.items():
        if raw is None or key in ("algorithm", "stream"):
            continue
        if key in _STREAM_KEYS:
            stream_values[key] = _coerce(key, raw, _STREAM_KEYS[key])
        else:
            values[key] = _coerce(key, raw, _EXPERIMENT_KEYS[key])

    if not boosted:
        if "m" in settings and settings["m"] is not None and values["m"] != 1:
            raise ConfigError(f"{algorithm} is a single learner; m must be 1, got {values['m']}")
        values["m"] = 1
    if mode == "data_reuse" and values.get("K", 0) < 1:
        raise ConfigError(f"{algorithm} needs a reuse multiplier K >= 1")
    if values["trials"] < 1 or values.get("workers", 1) < 1:
        raise ConfigError("trials and workers must be >= 1")
    if kind == "csv" and not stream_values.get("path"):
        raise ConfigError("csv stream needs path")
    if kind == "stationary":
        stream_values.setdefault("noise_var", 0.01)

    try:
        spec = StreamSpec(kind=kind, seed=0, **stream_values)
        cfg = ExperimentConfig(algorithm=algorithm, stream=spec, **values)
        cfg.boost_config(0)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    return cfg


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    reports: list[RunReport]

    @property
    def final_mse(self) -> np.ndarray:
        return np.array([r.final_mse for r in self.reports])

    @property
    def mean_ase(self) -> np.ndarray:
        return np.mean([r.ase for r in self.reports], axis=0)

    @property
    def mean_lambda(self) -> np.ndarray:
        return np.mean([r.mean_lambda for r in self.reports], axis=0)

    def summary(self) -> str:
        mse = self.final_mse
        return (f"{self.config.algorithm}: final MSE {mse.mean():.6g} +/- {mse.std():.6g} "
                f"over {len(mse)} trial(s), T={self.reports[0].T}")


def trial_stream(spec: StreamSpec, base_seed: int, trial: int) -> Stream:
    seeded = StreamSpec(**{**spec.__dict__, "seed": derive_trial_seed(base_seed, 2 * trial)})
    return make_stream(seeded)


def _run_trial(args) -> RunReport:
    cfg, trial = args
    stream = trial_stream(cfg.stream, cfg.seed, trial)
    report = run_stream(cfg.boost_config(derive_trial_seed(cfg.seed, 2 * trial + 1)), stream)
    report.state = None
    return report


def run_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    """Run ``cfg.trials`` independent trials; results are in trial order."""
    jobs = [(cfg, i) for i in range(cfg.trials)]
    if cfg.workers > 1 and cfg.trials > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            reports = list(pool.map(_run_trial, jobs))
    else:
        reports = [_run_trial(j) for j in jobs]
    return ExperimentResult(cfg, reports)


def _write_rows(path: Path, header: str, rows) -> None:
    lines = [header]
    for row in rows:
        lines.append(",".join(v if isinstance(v, str) else
                              str(v) if isinstance(v, (int, np.integer)) else format_number(v)
                              for v in row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_config_echo(cfg: ExperimentConfig, path: Path) -> None:
    lines = ["# fully resolved settings; rerun with --config this-file"]
    for key, value in cfg.as_items():
        if isinstance(value, float):
            value = repr(value)
        lines.append(f"{key} = {value}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_experiment(result: ExperimentResult, out_dir) -> list[Path]:
    """Write ase.csv, report.csv, config.txt and, when tracing, lambda_trace.csv."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    ase = result.mean_ase
    t = np.arange(1, ase.shape[0] + 1)
    _write_rows(out / "ase.csv", "t,ase,mse_running",
                ((int(i), a, a / i) for i, a in zip(t, ase)))
    _write_rows(out / "report.csv", "trial,final_mse,updates_total,wall_time_s",
                ((i, r.final_mse, int(r.update_counts.sum()), r.wall_time)
                 for i, r in enumerate(result.reports)))
    write_config_echo(result.config, out / "config.txt")
    written = [out / "ase.csv", out / "report.csv", out / "config.txt"]
    if result.config.trace:
        first = result.reports[0]
        every = first.trace_every
        rows = ((int(row * every + 1), k + 1, lam)
                for row in range(first.lambda_trace.shape[0])
                for k, lam in enumerate(first.lambda_trace[row]))
        _write_rows(out / "lambda_trace.csv", "t,k,lambda", rows)
        written.append(out / "lambda_trace.csv")
    return written


def run_sweep(cfg: ExperimentConfig, parameter: str, grid) -> list[tuple]:
    """One experiment per grid value; failures give a NaN row and the sweep continues."""
    if parameter not in SWEEP_PARAMETERS:
        raise ConfigError(f"sweep parameter must be one of {SWEEP_PARAMETERS}")
    grid = list(grid)
    if not grid:
        raise ConfigError("sweep grid is empty")
    rows = []
    for value in grid:
        kwargs = {parameter: int(value) if parameter == "m" else float(value)}
        point = ExperimentConfig(**{**{f.name: getattr(cfg, f.name) for f in fields(cfg)}, **kwargs})
        try:
            res = run_experiment(point)
            mse = res.final_mse
            rows.append((value, float(mse.mean()), float(mse.std()), ""))
        except (ValueError, ArithmeticError, RuntimeError) as exc:
            print(f"sweep point {parameter}={value} failed: {exc}", file=sys.stderr)
            rows.append((value, math.nan, math.nan, str(exc)))
    return rows


def nm_online_ase(stream: Stream, v: float) -> float:
    """Accumulated squared error of one growing-window NM learner (no forgetting)."""
    cfg = BoostConfig(m=1, learner="nm", mode="weighted", beta=1.0, v=v)
    state = EnsembleState.initial(cfg, stream.r)
    acc = advance(state, stream.X, stream.d)
    return float(np.sum(acc["err"] ** 2))


def regret_curve(spec: StreamSpec, T_grid, v: float = 0.01, seed: int = 0,
                 trials: int = 1) -> list[tuple[int, float, float]]:
    """Rows ``(T, regret, regret / ln T)`` against the best fixed linear fit."""
    T_grid = [int(T) for T in T_grid]
    if any(b <= a for a, b in zip(T_grid, T_grid[1:])):
        raise ConfigError("T grid must be strictly increasing")
    rows = []
    for T in T_grid:
        regrets = []
        for trial in range(trials):
            stream = trial_stream(StreamSpec(**{**spec.__dict__, "T": T}), seed, trial)
            w = batch_ls_oracle((stream.X, stream.d), ridge=0.0)
            best = float(np.sum((stream.d - stream.X @ w) ** 2))
            regrets.append(nm_online_ase(stream, v) - best)
        regret = float(np.mean(regrets))
        rows.append((T, regret, regret / math.log(T) if T > 1 else math.nan))
    return rows
