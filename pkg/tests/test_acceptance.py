"""End-to-end acceptance checks, one test per criterion.

Every experiment uses the stream lengths and settings below verbatim; the
measured quantity is attached to the test report and printed in the
``acceptance criteria`` summary section.
"""

import csv
import math
import time
from pathlib import Path

import mpmath
import numpy as np
import pytest

from onlineboost.boosting import EnsembleState, advance, run_stream
from onlineboost.cli import main
from onlineboost.core import BoostConfig
from onlineboost.data import StreamSpec, gen_duffing, load_csv, normalize_minmax
from onlineboost.experiments import regret_curve, resolve_config, run_experiment
from onlineboost.learners import (
    NmState,
    SgdState,
    batch_ls_oracle,
    nm_weighted_step,
    sgd_step,
)
from onlineboost.metrics import lemma1_certificate, lemma2_learner_bound, theorem2_lambda_bound

T_FULL = 10_000
DATA = Path(__file__).parent / "data"


class Budget:
    def __init__(self, seconds):
        self.seconds = seconds

    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.start
        if exc[0] is None:
            assert self.elapsed < self.seconds, f"took {self.elapsed:.1f}s > {self.seconds}s"


def _experiment(algorithm, stream, trials, **overrides):
    settings = {"algorithm": algorithm, "stream": stream, "T": T_FULL, "trials": trials}
    settings.update(overrides)
    return run_experiment(resolve_config(settings))


@pytest.fixture(scope="module", autouse=True)
def _warm():
    # compile the kernels outside the timed sections
    cfg = BoostConfig(m=2, learner="nm", mode="random")
    run_stream(cfg, gen_duffing(StreamSpec("duffing", T=20)))


# ---------------------------------------------------------------- 1


def test_criterion_01_reduction_identity(record_property):
    with Budget(1.0):
        spec = {"stream": "stationary", "T": 1000, "trials": 1}
        for label, single, learner in (("bsgd-wu", "sgd", "sgd"), ("bnm-wu", "nm", "nm")):
            boosted = run_experiment(resolve_config({**spec, "algorithm": label, "m": 1}))
            plain = run_experiment(resolve_config({**spec, "algorithm": single}))
            wb, wp = boosted.reports[0], plain.reports[0]
            assert wb.errors.tobytes() == wp.errors.tobytes()

            # independent per-step learner loop on the same stream
            from onlineboost.experiments import trial_stream

            stream = trial_stream(resolve_config({**spec, "algorithm": single}).stream, 0, 0)
            cfg = BoostConfig(m=1, learner=learner, beta=0.9999)
            state = EnsembleState.initial(cfg, stream.r)
            advance(state, stream.X, stream.d)
            st = SgdState.zeros(3, 0.1) if learner == "sgd" else NmState.initial(3, 0.01, 0.9999)
            for s in stream:
                st = sgd_step(st, s, 1.0) if learner == "sgd" else nm_weighted_step(st, s, 1.0)[0]
            assert state.W[0].tobytes() == st.w.tobytes(), label
    record_property("measured", "final coefficients bitwise equal for sgd and nm")


# ---------------------------------------------------------------- 2


def test_criterion_02_rls_batch_equivalence(record_property):
    worst = 0.0
    with Budget(1.0):
        for seed in range(5):
            rng = np.random.default_rng(seed)
            X = rng.uniform(-1, 1, size=(500, 5))
            d = X @ rng.normal(size=5) + 0.1 * rng.normal(size=500)
            cfg = BoostConfig(m=1, learner="nm", beta=1.0, v=0.01)
            state = EnsembleState.initial(cfg, 5)
            advance(state, X, d)
            w = batch_ls_oracle((X, d), ridge=0.01)
            worst = max(worst, np.linalg.norm(state.W[0] - w) / np.linalg.norm(w))
    record_property("measured", f"max relative error {worst:.2e}")
    assert worst <= 1e-8


# ---------------------------------------------------------------- 3


def test_criterion_03_regret_growth(record_property):
    with Budget(10.0):
        rows = regret_curve(StreamSpec("stationary"), [500, 5000], v=0.01, seed=0, trials=10)
    (_, r500, q500), (_, r5000, q5000) = rows
    factor = max(q500, q5000) / min(q500, q5000)
    record_property("measured", f"regret/lnT {q500:.3f} (T=500) vs {q5000:.3f} (T=5000), "
                                f"factor {factor:.2f}")
    assert q500 > 0 and q5000 > 0
    assert factor < 3


# ---------------------------------------------------------------- 4


def test_criterion_04_noise_floor(record_property):
    with Budget(30.0):
        res = _experiment("nm", "stationary", 20)
    q = T_FULL * 3 // 4
    tail = np.mean([np.mean(r.errors[q:] ** 2) for r in res.reports])
    record_property("measured", f"last-quarter MSE {tail:.5f}")
    assert 0.009 <= tail <= 0.013


# ---------------------------------------------------------------- 5


def test_criterion_05_boosting_gain_stationary(record_property):
    with Budget(600.0):
        mse = {a: _experiment(a, "stationary", 100).final_mse.mean()
               for a in ("sgd", "bsgd-wu", "bsgd-dr", "bsgd-ru", "nm", "bnm-wu", "bnm-dr", "bnm-ru")}
    record_property("measured", " ".join(f"{a}={v:.6f}" for a, v in mse.items()))
    failures = [a for a in ("bsgd-wu", "bsgd-dr", "bsgd-ru") if not mse[a] <= mse["sgd"]]
    failures += [a for a in ("bnm-wu", "bnm-dr", "bnm-ru") if not mse[a] <= 1.05 * mse["nm"]]
    assert not failures, f"no gain for {failures}: {mse}"


# ---------------------------------------------------------------- 6


def test_criterion_06_boosting_gain_duffing(record_property):
    with Budget(300.0):
        mse = {}
        for a in ("sgd", "bsgd-wu", "bsgd-dr", "bsgd-ru", "nm", "bnm-wu", "bnm-dr", "bnm-ru"):
            res = _experiment(a, "duffing", 20 if a.endswith("-ru") else 1, beta=0.999, mu=0.1)
            mse[a] = float(np.mean([r.ase[-1] / r.T for r in res.reports]))
    record_property("measured", " ".join(f"{a}={v:.5f}" for a, v in mse.items()))
    failures = [a for a in ("bsgd-wu", "bsgd-dr", "bsgd-ru") if not mse[a] < mse["sgd"]]
    failures += [a for a in ("bnm-wu", "bnm-dr", "bnm-ru") if not mse[a] < mse["nm"]]
    if not (mse["bsgd-dr"] <= mse["bsgd-wu"] and mse["bsgd-dr"] <= mse["bsgd-ru"]):
        failures.append("bsgd-dr ordering")
    assert not failures, f"failed: {failures}"


# ---------------------------------------------------------------- 7


def test_criterion_07_parameter_sweeps(record_property):
    from onlineboost.experiments import run_sweep

    problems, measured = [], []
    with Budget(900.0):
        for algorithm in ("bsgd-ru", "bnm-ru"):
            cfg = resolve_config({"algorithm": algorithm, "stream": "duffing", "T": T_FULL})
            c = {v: (m, s) for v, m, s, _ in run_sweep(cfg, "c", [0.1, 1.0, 10.0])}
            s2 = {v: (m, s) for v, m, s, _ in run_sweep(cfg, "sigma_m2", [0.1, 0.5, 2.0])}
            mm = {v: (m, s) for v, m, s, _ in run_sweep(cfg, "m", [5, 20, 30, 50])}
            measured.append(
                f"{algorithm}: c " + "/".join(f"{c[v][0]:.4f}" for v in c)
                + " sigma_m2 " + "/".join(f"{s2[v][0]:.4f}" for v in s2)
                + " m " + "/".join(f"{mm[v][0]:.4f}" for v in mm))
            if not (c[1.0][0] < c[0.1][0] and c[1.0][0] < c[10.0][0]):
                problems.append(f"{algorithm} c-optimum")
            if min(s2, key=lambda v: s2[v][0]) != 0.5:
                problems.append(f"{algorithm} sigma_m2-optimum")
            if not mm[30][0] <= mm[5][0]:
                problems.append(f"{algorithm} m=30 vs m=5")
            noise = 2 * math.hypot(mm[50][1], mm[30][1])
            if not abs(mm[50][0] - mm[30][0]) <= noise:
                problems.append(f"{algorithm} m=50 vs m=30")
    record_property("measured", "; ".join(measured))
    assert not problems, f"failed: {problems}"


# ---------------------------------------------------------------- 8


def test_criterion_08_weight_ordering(record_property):
    with Budget(60.0):
        res = _experiment("bsgd-ru", "duffing", 20)
    lam = res.mean_lambda
    record_property("measured", f"mean lambda k=5 {lam[4]:.4f} k=10 {lam[9]:.4f} k=20 {lam[19]:.4f}")
    assert lam[4] >= lam[9] >= lam[19]


# ---------------------------------------------------------------- 9


def _bounded_stream(rng, T):
    kind = rng.integers(3)
    if kind == 0:
        s = gen_duffing(StreamSpec("duffing", T=T))
        # halve the trajectory so every target lies in [-1, 1]
        return s.X * [0.5, 0.5, 1.0], s.d * 0.5
    r = int(rng.integers(1, 5))
    X = np.column_stack([rng.uniform(-1, 1, size=(T, r)), np.ones(T)])
    d = np.clip(X[:, :r] @ rng.normal(size=r) / r + 0.1 * rng.normal(size=T), -1, 1)
    if kind == 2:
        d = np.sign(d) * np.abs(d) ** 0.3
    return X, d


def test_criterion_09_invariant_suite(record_property):
    rng = np.random.default_rng(2024)
    checked = {"configs": 0, "lemma1": 0, "random": 0, "c0": 0}
    with Budget(120.0):
        for i in range(200):
            X, d = _bounded_stream(rng, int(rng.integers(50, 400)))
            mode = ["weighted", "data_reuse", "oza_poisson", "random"][i % 4]
            cfg = BoostConfig(
                m=int(rng.integers(2, 12)), sigma_m2=float(rng.uniform(0.0, 0.6)),
                c=0.0 if i % 10 == 0 else float(rng.uniform(0.05, 5.0)),
                K=int(rng.integers(1, 8)), mu=float(rng.uniform(0.01, 0.5)),
                beta=float(rng.uniform(0.99, 1.0)), mode=mode,
                learner="nm" if i % 3 == 0 else "sgd", seed=int(rng.integers(2**63)),
                keep_logs=True)
            rep = run_stream(cfg, (X, d))
            lg = rep.logs
            lam = lg["lambdas"]
            assert np.all((lam > 0) & (lam <= 1)), i
            assert np.all(lam[:, 0] == 1.0), i
            assert np.all((rep.state.delta >= 0) & (rep.state.delta <= 1)), i
            steps = cfg.sigma_m2 - lg["errors"] ** 2
            assert np.array_equal(lg["losses"][:, 1:], lg["losses"][:, :-1] + steps), i
            assert np.array_equal(lg["losses"][:, 0], np.zeros(len(d))), i
            if cfg.c == 0.0 and mode in ("weighted", "data_reuse"):
                # identical inputs and unit weights: every slot follows the same path
                assert np.all(rep.state.W == rep.state.W[0]), i
                checked["c0"] += 1
            if mode == "random":
                total = lg["applied"].sum()
                std = math.sqrt(np.sum(lam * (1 - lam)))
                assert abs(total - lam.sum()) <= 4 * std + 1e-9, i
                checked["random"] += 1
            logs = rep.round_logs()
            for M in range(1, cfg.m):
                cert = lemma1_certificate(logs, M, 0.1, cfg.sigma_m2)
                assert cert.implication_holds, (i, M, cert.violations[:5])
                checked["lemma1"] += 1
            checked["configs"] += 1
    record_property("measured", ", ".join(f"{k}={v}" for k, v in checked.items()))


# ---------------------------------------------------------------- 10


def test_criterion_10_closed_form_diagnostics(record_property):
    mpmath.mp.dps = 60
    with Budget(1.0):
        g, z, s, k = (mpmath.mpf(v) for v in ("0.5", "0.1", "0.25", "3"))
        lam_oracle = (g ** (-2 * s) * (1 + 2 * z * mpmath.log(g))) ** ((1 - k) / 2)
        sig = mpmath.sqrt(mpmath.mpf("0.25"))
        bound_oracle = 1 / ((mpmath.mpf("0.1") * sig * mpmath.log(1 / sig))
                            * (1 - 4 * sig ** 2 + sig ** 4 * mpmath.mpf("0.5")))
        lam = theorem2_lambda_bound(0.5, 0.1, 0.25, 3)
        bound = lemma2_learner_bound(0.1, 0.25, 0.5)
    record_property("measured", f"lambda bound {lam:.6f} (oracle {float(lam_oracle):.6f}), "
                                f"learner bound {bound:.3f} (oracle {float(bound_oracle):.3f})")
    assert abs(lam - 0.8209) <= 1e-4 and abs(lam - float(lam_oracle)) <= 1e-12
    assert abs(bound - 923.3) <= 0.5 and abs(bound - float(bound_oracle)) <= 1e-9


# ---------------------------------------------------------------- 11


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_criterion_11_csv_ingestion_and_golden_run(tmp_path, monkeypatch, record_property):
    raw = load_csv(DATA / "synthetic_1000.csv", has_header=True)
    norm = normalize_minmax(raw)
    for col in np.column_stack([norm.X[:, :-1], norm.d]).T:
        assert col.min() == -1.0 and col.max() == 1.0
    assert np.all(norm.X[:, -1] == 1.0)

    monkeypatch.chdir(DATA.parent.parent)
    out = tmp_path / "run"
    golden = DATA / "golden_bnm_ru"
    code = main(["run", "--config", str(golden / "config.txt"), "--out", str(out)])
    assert code == 0
    assert (out / "ase.csv").read_bytes() == (golden / "ase.csv").read_bytes()
    assert (out / "lambda_trace.csv").read_bytes() == (golden / "lambda_trace.csv").read_bytes()
    assert (out / "config.txt").read_bytes() == (golden / "config.txt").read_bytes()
    # wall-clock time is the only column allowed to differ
    strip = lambda rows: [r[:-1] for r in rows]
    assert strip(_rows(out / "report.csv")) == strip(_rows(golden / "report.csv"))
    record_property("measured", "normalized endpoints exact; ase/report/trace match golden bytes")
