import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from assouad_graphs.covering import Square, column_cover_count
from assouad_graphs.errors import AuditFailure, InfeasibleError, ParameterError
from assouad_graphs.funcspace import ZigzagSpec, build_zigzag, p_energy, sample_function
from assouad_graphs.packing import (
    borderline_params, build_packing, default_c0, packing_exponent, phi, phi_inverse,
    ratio_check, scan_n0, target_gamma, verify_packing,
)


def _a(m, s=3.0, log=False):
    return m ** (1 - s) / (math.log(m) ** 2 if log else 1.0)


# -- construction ---------------------------------------------------------------

def test_n10_scales_and_first_segment():
    ps = build_packing(3.0, 0.5, 10)
    assert ps.R_n == pytest.approx(0.01, rel=1e-15)
    assert ps.r_n == pytest.approx(1e-4, rel=1e-14)
    length = math.hypot(_a(10) - _a(11), _a(10) + _a(11))
    assert ps.M[10] == math.ceil(length / ps.r_n) == 184


def test_theta_range_enforced():
    with pytest.raises(ParameterError):
        build_packing(3.0, 2 / 3, 10)
    with pytest.raises(ParameterError):
        build_packing(2.0, 0.3, 10)


def test_c0_default():
    assert default_c0(3.0) == pytest.approx(math.sqrt(2) ** (1 / 3) / 2)


def test_n_below_n0_is_infeasible():
    with pytest.raises(InfeasibleError):
        build_packing(3.0, 0.5, 5, n0=10)


def test_all_pairs_oracle_n10():
    ps = build_packing(3.0, 0.5, 10)
    audit = verify_packing(ps)
    p = np.asarray(ps.points)
    d = np.sqrt(((p[:, None, :] - p[None, :, :]) ** 2).sum(-1))
    d[np.diag_indices_from(d)] = np.inf
    assert audit.passed
    assert audit.min_pairwise_distance == pytest.approx(d.min(), rel=1e-12)
    assert d.min() > 1e-4
    assert audit.exact_checked > 0


def test_duplicated_point_fails():
    ps = build_packing(3.0, 0.5, 10)
    ps.points = np.vstack([ps.points, ps.points[:1]])
    ps.m = np.append(ps.m, ps.m[0])
    ps.k = np.append(ps.k, ps.k[0])
    ps.M = dict(ps.M)
    ps.M[int(ps.m[0])] += 1
    audit = verify_packing(ps)
    assert not audit.passed
    assert audit.min_pairwise_distance == 0.0
    with pytest.raises(AuditFailure) as err:
        verify_packing(ps, raise_on_fail=True)
    assert err.value.offending


def test_points_lie_on_segments_and_in_square():
    ps = build_packing(3.0, 0.5, 12)
    audit = verify_packing(ps)
    assert audit.off_segment == [] and audit.off_square == []
    assert np.abs(ps.points).max() <= ps.R_n


def test_size_guard_and_shrink_bisection():
    with pytest.raises(ParameterError):
        build_packing(2.2, 0.02, 10)
    ps = build_packing(3.0, 0.5, 10, c0=50.0)
    z = ZigzagSpec(3.0)
    r = ps.r_n
    # the result is the largest admissible N, as a linear shrink would find
    ok = [N for N in range(2, ps.N_initial + 1, 2)
          if math.sqrt(2) * float(z.eps(10 + N - 2)) >= 2 * r
          and (N < 4 or float(z.eps(10 + N - 3)) > r)]
    assert ps.N_n == max(ok) and ps.shrink > 0


def test_c2_stable():
    c2 = [verify_packing(build_packing(3.0, 0.5, n)).c2 for n in (10, 20, 30, 40)]
    assert max(c2) / min(c2) < 1.5


# -- exponents ---------------------------------------------------------------------

def test_target_gamma():
    assert target_gamma(3.0, 0.5) == 1.5
    assert target_gamma(3.0, 1e-12) == pytest.approx(1.0, abs=1e-11)


def test_gamma_trend():
    gammas, trend = packing_exponent(3.0, 0.5, [10, 20, 40, 80])
    assert trend["nondecreasing"] and trend["below_target"] and trend["all_separated"]
    assert gammas[-1] >= 1.40
    assert trend["target_gamma"] == 1.5


def test_gamma_rejects_unsorted():
    with pytest.raises(ParameterError):
        packing_exponent(3.0, 0.5, [20, 10])


# -- separation sweep ---------------------------------------------------------------

@pytest.mark.parametrize("variant", ["plain", "log_corrected"])
def test_separation_sweep(variant):
    n0 = scan_n0(3.0, 0.5, variant=variant)
    assert n0 == 3
    for n in range(n0, n0 + 31):
        ps = build_packing(3.0, 0.5, n, variant=variant)
        audit = verify_packing(ps, exact=n <= 50)
        assert audit.passed, n
        assert audit.cardinality == sum(ps.M.values())
        assert audit.cardinality_identity


@given(st.floats(2.2, 6.0), st.floats(0.05, 0.95), st.integers(10, 25))
def test_separation_random_parameters(s, frac, n):
    theta = frac * (s - 1) / s
    try:
        ps = build_packing(s, theta, n, max_points=2_000_000)
    except (InfeasibleError, ParameterError):
        return
    assert verify_packing(ps, exact=False).passed


# -- borderline -----------------------------------------------------------------------

@pytest.mark.parametrize("s", [2.5, 3.0, 7.0])
def test_phi_at_e(s):
    assert phi(math.e, s) == pytest.approx(math.e, rel=1e-15)


@pytest.mark.parametrize("t", [3.0, 10.0, 100.0])
def test_phi_inverse_round_trip(t):
    assert phi_inverse(float(phi(t, 3.0)), 3.0) == pytest.approx(t, rel=1e-12)


def test_borderline_matches_exhaustive_scan():
    s, theta, n = 3.0, 0.5, 100
    N, diag = borderline_params(s, theta, n)
    r = _a(n, log=True) ** (1 / theta)

    def eps(m):
        return _a(m, log=True) - _a(m + 1, log=True)

    best = 0
    for M in range(2, 20_000, 2):
        seg = math.sqrt(2) * eps(n + M - 2) >= 2 * r
        cross = M < 4 or eps(n + M - 3) > r
        if seg and cross:
            best = M
    assert N == best == 1036
    assert diag["binding"] in ("segment", "cross")


def test_borderline_infeasible_small_n():
    with pytest.raises(InfeasibleError):
        borderline_params(3.0, 0.5, 1)


# -- cross-module checks ------------------------------------------------------------------

@pytest.mark.parametrize("n", [10, 16])
def test_cover_count_bridge(n):
    ps = build_packing(3.0, 0.5, n)
    z = ZigzagSpec(3.0, m_max=20_000)
    f = sample_function(build_zigzag(z), 0.0, ps.R_n, 2 ** 17 + 1)
    count = column_cover_count(f, Square((0.0, 0.0), ps.R_n), ps.r_n).count
    assert count >= ps.cardinality / 9


def test_energy_gate_borderline():
    z = ZigzagSpec(3.0, "log_corrected", m_max=10 ** 5)
    assert p_energy(z, 2.0).verdict == "converging"


def test_ratio_condition():
    plain = ratio_check(3.0)
    assert plain["monotone"] and plain["stays_above"]
    assert plain["first_above"] == 199
    logc = ratio_check(3.0, "log_corrected")
    assert logc["monotone"] and logc["stays_above"]
    assert logc["first_above"] == 235
