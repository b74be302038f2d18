"""Synthetic streams, CSV ingestion and min-max normalization."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from numba import njit

from .core import RngStream, Sample, rng_normal

__all__ = [
    "DUFFING_X0",
    "DUFFING_X_PREV",
    "Stream",
    "StreamSpec",
    "duffing_next",
    "format_number",
    "gen_duffing",
    "gen_stationary",
    "load_csv",
    "make_stream",
    "normalize_minmax",
    "write_csv",
]

DUFFING_X_PREV = 0.9279
DUFFING_X0 = 0.1727
STREAM_KINDS = ("stationary", "duffing", "csv")


class DataError(ValueError):
    """Malformed input data; ``row`` is 1-based when known."""

    def __init__(self, message: str, row: int | None = None):
        super().__init__(message if row is None else f"row {row}: {message}")
        self.row = row


@dataclass
class StreamSpec:
    kind: str = "stationary"
    T: int = 1000
    noise_var: float = 0.01
    rho: float = 0.5
    seed: int = 0
    path: str | None = None
    has_header: bool = False
    target_column: int = -1
    normalize: bool = True

    def __post_init__(self):
        if self.kind not in STREAM_KINDS:
            raise ValueError(f"stream kind must be one of {STREAM_KINDS}, got {self.kind!r}")
        if self.T < 1:
            raise ValueError("T must be >= 1")
        if self.noise_var < 0:
            raise ValueError("noise_var must be nonnegative")
        if not -1.0 < self.rho < 1.0:
            raise ValueError("rho must lie in (-1, 1)")
        if self.kind == "csv" and not self.path:
            raise ValueError("csv streams need a path")


@dataclass
class Stream:
    """A finite stream held as arrays; indexing yields :class:`Sample`."""

    X: np.ndarray
    d: np.ndarray

    def __len__(self):
        return self.X.shape[0]

    def __getitem__(self, i):
        if isinstance(i, slice):
            return Stream(self.X[i], self.d[i])
        return Sample(self.X[i], float(self.d[i]))

    def __iter__(self):
        for i in range(len(self)):
            yield self[i]

    @property
    def r(self) -> int:
        return self.X.shape[1]

    @classmethod
    def from_samples(cls, samples) -> "Stream":
        samples = list(samples)
        if not samples:
            return cls(np.empty((0, 0)), np.empty(0))
        return cls(np.array([s.x for s in samples]), np.array([s.d for s in samples]))


@njit(cache=True)
def _stationary_draws(s, T, rho, noise_sd, out):
    a = math.sqrt(1.0 - rho * rho)
    for t in range(T):
        n1 = rng_normal(s)
        n2 = rng_normal(s)
        out[t, 0] = n1
        out[t, 1] = rho * n1 + a * n2
        out[t, 2] = noise_sd * rng_normal(s)


def gen_stationary(spec: StreamSpec) -> Stream:
    """Linear model ``d = x1 + x2 + 1 + noise`` on min-max scaled Gaussian inputs.

    Per sample the draws are (n1, n2, noise); ``x2 = rho n1 + sqrt(1-rho^2) n2``.
    Both coordinates are then scaled over the block onto exactly [0, 1].
    """
    if spec.T < 2:
        raise ValueError("stationary stream needs T >= 2 to define the scaling")
    rng = RngStream(spec.seed)
    raw = np.empty((spec.T, 3))
    _stationary_draws(rng.state, spec.T, spec.rho, math.sqrt(spec.noise_var), raw)
    X = np.ones((spec.T, 3))
    for j in range(2):
        col = raw[:, j]
        lo, hi = col.min(), col.max()
        if hi == lo:
            raise ValueError(f"degenerate block: coordinate {j + 1} is constant")
        X[:, j] = (col - lo) / (hi - lo)
    d = X[:, 0] + X[:, 1] + 1.0 + raw[:, 2]
    return Stream(X, d)


def duffing_next(x_t: float, x_prev: float) -> float:
    """``2.75 x_t - x_t**3 - 0.2 x_prev``."""
    return 2.75 * x_t - x_t ** 3 - 0.2 * x_prev


def gen_duffing(spec: StreamSpec) -> Stream:
    """Duffing-map stream: inputs ``[x_{t-1}, x_t, 1]``, target ``x_{t+1}``."""
    T = spec.T
    traj = np.empty(T + 2)
    traj[0], traj[1] = DUFFING_X_PREV, DUFFING_X0
    for i in range(T):
        nxt = duffing_next(traj[i + 1], traj[i])
        if not abs(nxt) <= 1e6:
            raise ArithmeticError(f"Duffing trajectory diverged at step {i + 1}: x = {nxt!r}")
        traj[i + 2] = nxt
    X = np.column_stack([traj[:T], traj[1:T + 1], np.ones(T)])
    return Stream(X, traj[2:].copy())


def _parse_float(cell: str, row: int, col: int) -> float:
    text = cell.strip()
    try:
        value = float(text)
    except ValueError:
        raise DataError(f"column {col + 1}: non-numeric cell {cell!r}", row) from None
    if not math.isfinite(value) or text.lower().lstrip("+-") in ("inf", "infinity", "nan"):
        raise DataError(f"column {col + 1}: non-finite cell {cell!r}", row)
    return value


def load_csv(path, has_header: bool = False, target_column: int = -1) -> Stream:
    """Read a numeric CSV; the target column becomes ``d``, the rest features.

    Rows are counted from 1 over the data rows (the header is not counted).
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if has_header and rows:
        rows = rows[1:]
    rows = [r for r in rows if r and any(c.strip() for c in r)]
    if not rows:
        raise DataError(f"{path}: no data rows")
    width = len(rows[0])
    if width < 2:
        raise DataError("need at least one feature and one target column", 1)
    tc = target_column if target_column >= 0 else width + target_column
    if not 0 <= tc < width:
        raise DataError(f"target column {target_column} out of range for width {width}")
    table = np.empty((len(rows), width))
    for i, row in enumerate(rows, start=1):
        if len(row) != width:
            raise DataError(f"expected {width} columns, found {len(row)}", i)
        for j, cell in enumerate(row):
            table[i - 1, j] = _parse_float(cell, i, j)
    features = np.delete(table, tc, axis=1)
    return Stream(features, table[:, tc].copy())


def _minmax_columns(A: np.ndarray) -> np.ndarray:
    lo = A.min(axis=0)
    hi = A.max(axis=0)
    span = hi - lo
    out = np.zeros_like(A)
    live = span > 0
    out[:, live] = 2.0 * (A[:, live] - lo[live]) / span[live] - 1.0
    return out


def normalize_minmax(samples) -> Stream:
    """Map every feature and the target onto [-1, 1]; append a bias column.

    Constant dimensions map to 0.
    """
    stream = samples if isinstance(samples, Stream) else Stream.from_samples(samples)
    if len(stream) == 0:
        raise ValueError("nothing to normalize")
    X = _minmax_columns(np.asarray(stream.X, float))
    d = _minmax_columns(np.asarray(stream.d, float)[:, None])[:, 0]
    return Stream(np.column_stack([X, np.ones(len(stream))]), d)


def make_stream(spec: StreamSpec) -> Stream:
    if spec.kind == "stationary":
        return gen_stationary(spec)
    if spec.kind == "duffing":
        return gen_duffing(spec)
    raw = load_csv(spec.path, spec.has_header, spec.target_column)
    stream = normalize_minmax(raw) if spec.normalize else Stream(
        np.column_stack([raw.X, np.ones(len(raw))]), raw.d)
    return stream[: spec.T] if spec.T < len(stream) else stream


def format_number(value: float) -> str:
    """Shortest round-trip rendering used in every CSV we write.

    Reading the text back gives the identical double; integral values drop
    the trailing ``.0``.
    """
    text = repr(float(value))
    return text[:-2] if text.endswith(".0") else text


def write_csv(stream: Stream, path, header: bool = False) -> None:
    """Write features then target, one sample per row."""
    buf = io.StringIO()
    if header:
        names = [f"x{i + 1}" for i in range(stream.r)] + ["d"]
        buf.write(",".join(names) + "\n")
    for x, d in zip(stream.X, stream.d):
        buf.write(",".join(format_number(v) for v in x) + "," + format_number(d) + "\n")
    Path(path).write_text(buf.getvalue(), encoding="utf-8")
