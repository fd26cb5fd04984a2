"""Acceptance suite: one PASS/FAIL line per criterion, printed past pytest's capture.

Run with ``pytest tests/test_acceptance.py -v``.  Example reproductions use the
bundled configurations and the same code path as ``tvsmas reproduce``.
"""

import json
import math
import time

import numpy as np
import pytest

from property_suites import SUITES
from test_sde import ou_moments
from tvsmas import analysis as an
from tvsmas import cli
from tvsmas import config as cf
from tvsmas import montecarlo as mc
from tvsmas import objectives as ob
from tvsmas import trajectory as tj

T1_PUBLISHED = 1.3596
T2_PUBLISHED = 0.3491


@pytest.fixture
def report(capsys):
    def emit(label, ok, detail=""):
        with capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {label}: {detail}")
        return ok
    return emit


def _reproduce(which, tmp_path_factory):
    out = tmp_path_factory.mktemp(which)
    start = time.perf_counter()
    code = cli.reproduce_example(which, out, threads=1)
    elapsed = time.perf_counter() - start
    summary = json.loads((out / "summary.json").read_text())
    checks = {c["name"]: c for c in summary["checks"]}
    return dict(code=code, elapsed=elapsed, summary=summary, checks=checks, out=out)


@pytest.fixture(scope="module")
def example1(tmp_path_factory):
    return _reproduce("example1", tmp_path_factory)


@pytest.fixture(scope="module")
def example2(tmp_path_factory):
    return _reproduce("example2", tmp_path_factory)


def test_criterion_1_property_suites(report):
    start = time.perf_counter()
    violations = {name: fn() for name, fn in SUITES.items()}
    elapsed = time.perf_counter() - start
    ok = sum(violations.values()) == 0 and elapsed < 30
    assert report("1", ok, f"{len(SUITES)} suites x 1000 instances, violations {violations}, {elapsed:.1f} s")


def test_criterion_2_ou_oracle(report):
    start = time.perf_counter()
    x = ou_moments()
    elapsed = time.perf_counter() - start
    m = x.size
    mean_z = (x.mean() - math.exp(-1)) / (x.std(ddof=1) / math.sqrt(m))
    var_se = math.sqrt(np.var((x - x.mean()) ** 2, ddof=1) / m)
    var_z = (x.var(ddof=1) - (1 - math.exp(-2)) / 2) / var_se
    ok = abs(mean_z) <= 3 and abs(var_z) <= 3 and elapsed < 30
    assert report("2", ok, f"mean {mean_z:+.2f} SE, variance {var_z:+.2f} SE, {elapsed:.1f} s")


def _rel(a, b):
    return abs(a - b) / abs(b) if b else abs(a)


def bound_oracles():
    """Relative errors of the bound formulas against hand evaluations."""
    err = {}
    c = an.msgeub_centralized(2, 1, 1, 1, 1)
    err["centralized rate"] = _rel(c.rate, 2.0)
    err["centralized offset"] = _rel(c.offset, 0.5)
    err["T1"] = _rel(an.fixed_time_T1(1, 1, 0.5, 2, 1, 1, 1, 1), math.sqrt(2) + 0.25)
    s = an.settling_constants(2, 2, 0.5, 0.5, 1.5, 0.5)
    m2 = 2 - 2 ** (2 / 3)
    err["delta"] = _rel(s.delta, 2 ** (-4 / 3))
    err["m1"] = _rel(s.m1, 1.0)
    err["m2"] = _rel(s.m2, m2)
    err["T2"] = _rel(s.T2, 8 / math.sqrt(m2))
    k = an.consensus_constants(5, 5, 15, 0.8, 1.2, 4.0, 3.0, 3, 0, 2, 0, 1, 0, 0.01, 2, 15)
    err["k1"] = _rel(k.k1, 2**0.8 * 5 * 4.0**0.9)
    err["k2"] = _rel(k.k2, 2**1.2 * 5 * 2**-0.1 * 15**-0.2 * 3.0**1.1)
    d = an.msgeub_distributed(15, 1, 1, 0, 1, 0.5)
    err["k4"] = _rel(d.k4, 11.0)
    err["k5"] = _rel(d.k5, 0.125)
    err["tracking bound"] = _rel(d.asymptotic_bound, 1 / 44)
    return err


def test_criterion_3_bound_oracles(report):
    start = time.perf_counter()
    err = bound_oracles()
    elapsed = time.perf_counter() - start
    worst = max(err, key=err.get)
    ok = err[worst] <= 1e-12 and elapsed < 1
    assert report("3", ok, f"worst relative error {err[worst]:.1e} ({worst}), {elapsed * 1e3:.1f} ms")


def test_criterion_4_example1(example1, report):
    c = example1["checks"]
    off = c["bound_offset_equals_target"]
    trk = c["tracking_within_offset"]
    ok = off["passed"] and trk["passed"] and example1["elapsed"] < 120
    assert report("4", ok, f"offset {off['value']!r} (target 0.625), max tracking on [5,10] "
                           f"{trk['max_value']:.4f}, {example1['elapsed']:.1f} s")


def test_criterion_5a_consensus(example2, report):
    c = example2["checks"]["consensus_after_settling"]
    ok = c["passed"] and example2["elapsed"] < 600
    tau = c.get("tau")
    assert report("5(a)", ok, f"T1 {c.get('T1', float('nan')):.4f} s, tau {tau if tau is None else round(tau, 3)} s, "
                              f"max consensus after {c.get('max_value', float('nan')):.4g} (threshold 1.51)")


def test_criterion_5b_tracking(example2, report):
    c = example2["checks"]["tracking_final_window"]
    assert report("5(b)", c["passed"], f"max tracking on final 20% {c['max_value']:.4g} (threshold 3.94)")


def test_criterion_5c_estimator(example2, report):
    c = example2["checks"]["estimator_p95_at_T1"]
    assert report("5(c)", c["passed"], f"estimator p95 at t = {c['t']:.3f} is {c['value']:.4g} (threshold 1e-2)")


def test_criterion_5d_mean_trajectory(example2, report):
    c = example2["checks"]["mean_trajectory_late_deviation"]
    assert report("5(d)", c["passed"], f"late mean deviation from the reported closed form {c['value']:.4g} "
                                       f"(offset {c['threshold']})")


def test_criterion_6_soft_targets(example2, report):
    s = example2["summary"]
    lines = []
    for mode, v in s["T1_by_balance_mode"].items():
        lines.append(f"T1[{mode}] = {v['T1']:.4f}" if "T1" in v else f"T1[{mode}] unavailable")
    T2 = s["bounds"]["consensus"]["T2"]
    lines.append(f"T2 = {T2} vs published {T2_PUBLISHED}")
    finite = all(math.isfinite(v["T1"]) for v in s["T1_by_balance_mode"].values() if "T1" in v)
    # the hard gate is the formula oracle; numeric agreement is a recorded deviation
    ok = finite and max(bound_oracles().values()) <= 1e-12
    assert report("6", ok, f"published T1 {T1_PUBLISHED}: " + ", ".join(lines) + " (soft)")


def _grid(horizon):
    return np.round(np.arange(int(round(horizon / 1e-2)) + 1) * 1e-2, 10)


def test_criterion_7_trajectories(report):
    start = time.perf_counter()
    tr1 = tj.track_optimal([ob.example1()], _grid(10.0))
    d1 = np.max(np.abs(tr1.x_star - np.array([tj.example1_optimum(t) for t in tr1.times])))
    tr2 = tj.track_optimal(ob.example2_models(), _grid(5.0))
    d2 = np.max(np.abs(tr2.x_star - np.array([tj.example2_reported_optimum(t) for t in tr2.times])))
    d2_table = np.max(np.abs(tr2.x_star - np.array([tj.example2_table_optimum(t) for t in tr2.times])))
    gap = max(tr1.max_gap, tr2.max_gap)
    elapsed = time.perf_counter() - start
    ok = d1 <= 1e-6 and d2 <= 1e-6 and gap <= 1e-4 and elapsed < 10
    assert report("7", ok, f"example1 {d1:.1e}, example2 vs reported form {d2:.3g} (vs table-derived form "
                           f"{d2_table:.1e}), Newton/ODE gap {gap:.1e}, {elapsed:.1f} s")


def test_criterion_8_estimator_conservation(report):
    doc = cf.apply_overrides(cf.bundled("example2"), realizations=1)
    doc["sde"]["horizon"] = 10.0
    res = cf.resolve(doc)
    start = time.perf_counter()
    ens = mc.run_ensemble(res.ensemble(threads=1))
    elapsed = time.perf_counter() - start
    steps = res.ensemble(threads=1).steps
    norm = float(np.linalg.norm(ens.final_zeta[0].sum(axis=0)))
    ok = norm <= 1e-9 and steps >= 10**4 and elapsed < 10
    assert report("8", ok, f"||sum zeta||_F = {norm:.2e} after {steps} steps, {elapsed:.1f} s")


def test_criterion_9_determinism(tmp_path, report):
    doc = cf.apply_overrides(cf.bundled("example2"), realizations=6)
    doc["sde"]["horizon"] = 0.5
    doc["ensemble"].update(block_size=2, record_stride=10)
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps(doc))
    runs = []
    for name, threads in (("a", 1), ("b", 1), ("c", 3)):
        out = tmp_path / name
        cli.main(["simulate", "--config", str(cfg), "--out", str(out), "--threads", str(threads)])
        runs.append({p.name: p.read_bytes() for p in sorted(out.iterdir())})
    same = all(r == runs[0] for r in runs[1:]) and len(runs[0]) >= 3
    assert report("9", same, f"{len(runs[0])} files byte-identical across repeat and 1 vs 3 threads")
