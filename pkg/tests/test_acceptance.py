"""Acceptance criteria 1-10, one recorded pass/fail line each."""
import math
import time

import numpy as np
import pytest

from assouad_graphs.cli import main
from assouad_graphs.coholder import CoHolderParams, lower_spectrum_bound
from assouad_graphs.covering import (
    Holder, Sobolev, audit_upper_bound, box_dimension, graph_sum_osc_check,
    resolution_ladders, rotate_monotone_check,
)
from assouad_graphs.folding import c_tilde, fold_values, run_folding, verify_fold
from assouad_graphs.funcspace import (
    TakagiSpec, WeierstrassSpec, ZigzagSpec, build_zigzag, measure_holder_witness,
    p_energy, random_staircase, sample_function,
)
from assouad_graphs.packing import build_packing, packing_exponent, verify_packing

pytestmark = pytest.mark.acceptance


def _sequential_reflections(values, band):
    """Arc-by-arc reflection of every run of samples outside the band."""
    lo, hi = band
    v = [float(x) for x in values]
    while True:
        side = [1 if x > hi else (-1 if x < lo else 0) for x in v]
        if not any(side):
            return v
        i = 0
        while i < len(v):
            if side[i] == 0:
                i += 1
                continue
            j = i
            while j < len(v) and side[j] == side[i]:
                j += 1
            edge = hi if side[i] > 0 else lo
            for k in range(i, j):
                v[k] = 2 * edge - v[k]
            i = j


def test_criterion_01_box_dimension(record_criterion):
    t0 = time.perf_counter()
    f = sample_function(TakagiSpec(2 ** -0.5, 2.0), 0.0, 1.0, 2 ** 20 + 1)
    est, fit = box_dimension(f, [2.0 ** -k for k in range(6, 15)])
    dt = time.perf_counter() - t0
    ok = abs(est - 1.5) <= 0.05 and dt < 60
    assert record_criterion(1, ok, f"Takagi box dimension {est:.4f} (target 1.5 +- 0.05, "
                                   f"R^2 {fit.r_squared:.5f})", dt)


@pytest.mark.parametrize("spec", [TakagiSpec(2 ** -0.5, 2.0), WeierstrassSpec(7 ** -0.5, 7.0)],
                         ids=["takagi", "weierstrass"])
def test_criterion_02_holder_audit(spec, record_criterion):
    t0 = time.perf_counter()
    f = sample_function(spec, 0.0, 1.0, 2 ** 20 + 1)
    centers = np.random.default_rng(2).uniform(0.05, 0.95, 20).tolist()
    rep = audit_upper_bound(f, Holder(spec.alpha), [0.1, 0.2, 0.3, 0.4],
                            lambda th: resolution_ladders(f, th), centers,
                            estimator="regression", tol=0.05)
    dt = time.perf_counter() - t0
    worst = max(r.regression_exponent - r.bound for r in rep.rows)
    raw = max(r.exponent for r in rep.rows)
    ok = rep.passed and dt < 300
    name = type(spec).__name__.replace("Spec", "")
    assert record_criterion(2, ok, f"{name} audit, 20 centres x 4 ladders: max(estimate - bound) "
                                   f"{worst:+.3f} (tol 0.05); raw max-ratio {raw:.3f}", dt)


def test_criterion_03_folding(record_criterion):
    t0 = time.perf_counter()
    spec = TakagiSpec(2 ** -0.5, 2.0, 1e-15)
    f = sample_function(spec, 0.0, 1.0, 2 ** 18 + 1)
    w = measure_holder_witness(spec, 0.5)
    ff = run_folding(f, w, 0.3, 2)
    rep = verify_fold(ff, w, [0.2, 0.3, 0.4], n_pairs=100_000)
    dt = time.perf_counter() - t0
    parts = {name: all(c.passed for c in rep.check(name))
             for name in ("holder", "oscillation", "count")}
    pairs = rep.check("holder")[0].detail["pairs"]
    ok = rep.passed and dt < 120 and pairs >= 99_000
    assert record_criterion(3, ok, "K=2 Takagi fold, theta0=0.3: " +
                            ", ".join(f"{k} {'ok' if v else 'FAIL'}" for k, v in parts.items())
                            + f" ({pairs} pairs, c~ = {c_tilde(w.c_lower):.3f})", dt)


def test_criterion_04_fold_equivalence(record_criterion):
    t0 = time.perf_counter()
    rng = np.random.default_rng(4)
    mismatches = 0
    for _ in range(50):
        n = int(rng.integers(2, 501))
        values = np.cumsum(rng.normal(0, rng.uniform(0.01, 2.0), n)) * rng.uniform(0.1, 10)
        lo = float(rng.normal())
        band = (lo, lo + float(rng.uniform(0.01, 3.0)))
        ours = fold_values(values, band)[0]
        mismatches += int(not np.array_equal(ours, _sequential_reflections(values, band)))
    dt = time.perf_counter() - t0
    assert record_criterion(4, mismatches == 0,
                            f"accordion fold vs sequential reflections: {mismatches}/50 differ", dt)


def test_criterion_05_sobolev_zigzag(record_criterion):
    t0 = time.perf_counter()
    gammas, trend = packing_exponent(3.0, 0.5, [10, 20, 40, 80])
    z = ZigzagSpec(3.0, m_max=20_000)
    f = sample_function(build_zigzag(z), 0.0, 1.0, 2 ** 20 + 1)
    centers = [0.0] + np.random.default_rng(5).uniform(0.0, 0.2, 19).tolist()
    rep = audit_upper_bound(f, Sobolev(2.0), [0.5], lambda th: resolution_ladders(f, th),
                            centers, estimator="regression", tol=0.05)
    dt = time.perf_counter() - t0
    row = rep.rows[0]
    ok = trend["nondecreasing"] and gammas[-1] >= 1.40 and rep.passed and dt < 120
    assert record_criterion(5, ok, "packing gammas " + ", ".join(f"{g:.4f}" for g in gammas)
                            + f" (target 1.5); audit estimate {row.regression_exponent:.3f} "
                              f"<= 1.5 + 0.05", dt)


def test_criterion_06_packing_separation(record_criterion):
    t0 = time.perf_counter()
    bad, worst = [], math.inf
    for n in range(10, 41):
        ps = build_packing(3.0, 0.5, n)
        audit = verify_packing(ps, exact=True)
        margin = audit.min_pairwise_distance / ps.r_n
        worst = min(worst, margin)
        if audit.violations or not audit.passed or audit.cardinality != sum(ps.M.values()):
            bad.append(n)
    dt = time.perf_counter() - t0
    assert record_criterion(6, not bad, f"n = 10..40: {len(bad)} failing, smallest "
                                        f"min-distance / r_n = {worst:.6f}", dt)


def test_criterion_07_energy(record_criterion):
    t0 = time.perf_counter()
    plain = ZigzagSpec(3.0, m_max=10 ** 5)
    e15 = p_energy(plain, 1.5)
    e2 = p_energy(plain, 2.0)
    sel = e2.m >= 10
    x = np.log(e2.m[sel])
    y = e2.partial_sums[sel]
    slope, icpt = np.polyfit(x, y, 1)
    r2 = 1 - np.sum((y - slope * x - icpt) ** 2) / np.sum((y - y.mean()) ** 2)
    logc = p_energy(ZigzagSpec(3.0, "log_corrected", m_max=10 ** 5), 2.0)
    dt = time.perf_counter() - t0
    ok = (e15.verdict == "converging" and e2.verdict == "diverging" and r2 >= 0.99
          and logc.verdict == "converging" and dt < 30)
    assert record_criterion(7, ok, f"q=1.5 {e15.verdict}; q=2 {e2.verdict} (log fit R^2 "
                                   f"{r2:.5f}); log-corrected q=2 {logc.verdict}", dt)


def test_criterion_08_bv(record_criterion):
    t0 = time.perf_counter()
    rng = np.random.default_rng(8)
    slopes = [rotate_monotone_check(random_staircase(rng), tol=1e-9)[0] for _ in range(20)]
    triples_ok = True
    for k in range(100):
        n = 1025
        g = sample_function(lambda t: np.cumsum(rng.normal(size=t.shape)), 0.0, 1.0, n)
        h = sample_function(lambda t: rng.uniform(-1, 1) * np.sin(rng.uniform(1, 80) * t)
                            + rng.normal(size=t.shape), 0.0, 1.0, n)
        triples_ok &= graph_sum_osc_check(g, h, 100, seed=k)
    dt = time.perf_counter() - t0
    ok = max(slopes) <= 1 + 1e-9 and triples_ok
    assert record_criterion(8, ok, f"max rotated slope {max(slopes):.12f} over 20 staircases; "
                                   f"subadditivity on 10^4 triples {'holds' if triples_ok else 'FAILS'}",
                            dt)


def test_criterion_09_coholder_consistency(record_criterion):
    t0 = time.perf_counter()
    worst = 0.0
    at_theta0 = True
    for alpha in (0.25, 0.5, 0.75):
        p = CoHolderParams(alpha)
        for theta in np.linspace(alpha / 11, 10 * alpha / 11, 10):
            lb = lower_spectrum_bound(p, float(theta))
            ub = Holder(alpha).bound(float(theta))
            worst = max(worst, abs(lb - ub) / ub)
        at_theta0 &= lower_spectrum_bound(p, p.theta0) == 2.0
    dt = time.perf_counter() - t0
    ok = worst <= 4 * np.finfo(float).eps and at_theta0
    assert record_criterion(9, ok, f"largest relative gap {worst:.2e} over 10 thetas per alpha; "
                                   f"value at theta0 is exactly 2: {at_theta0}", dt)


def test_criterion_10_determinism(tmp_path, record_criterion):
    t0 = time.perf_counter()
    runs = [
        ["pack", "--s", "3", "--theta", "0.5", "--n", "10,20", "--seed", "1"],
        ["spectrum", "--family", "weierstrass", "--a", "0.3779644730092272", "--b", "7",
         "--theta-grid", "0.1:0.4:0.1", "--samples", "2^17+1", "--centers", "6", "--seed", "3"],
        ["fold", "--family", "takagi", "--a", "0.7071067811865476", "--b", "2",
         "--theta0", "0.3", "--K", "2", "--samples", "2^16+1", "--seed", "5"],
        ["bv-check", "--staircases", "20", "--trials", "1000", "--seed", "9"],
        ["generate", "--family", "zigzag", "--samples", "4097"],
    ]
    differing = []
    for i, args in enumerate(runs):
        dirs = [tmp_path / f"{i}-{k}" for k in range(2)]
        codes = [main(args + ["--out", str(d)]) for d in dirs]
        if codes[0] != codes[1]:
            differing.append(f"{args[0]}: exit codes")
        names = sorted(p.name for p in dirs[0].iterdir() if p.name != "run_record.json")
        for name in names:
            if (dirs[0] / name).read_bytes() != (dirs[1] / name).read_bytes():
                differing.append(f"{args[0]}/{name}")
    dt = time.perf_counter() - t0
    assert record_criterion(10, not differing,
                            f"{len(runs)} commands run twice: "
                            + ("all artifacts byte-identical" if not differing
                               else "differ: " + ", ".join(differing)), dt)
