import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from assouad_graphs.covering import (
    Holder, Sobolev, Square, SpectrumCurve, audit_upper_bound, box_dimension,
    column_cover_count, graph_sum_osc_check, regularized_spectrum, resolution_ladders,
    rotate_monotone_check, spectrum_at_theta, upper_bound,
)
from assouad_graphs.errors import (DisjointError, GridMismatchError, NotMonotoneError,
                                   ParameterError, ResolutionError)
from assouad_graphs.funcspace import (
    TakagiSpec, ZigzagSpec, build_zigzag, eval_takagi, random_staircase, sample_function,
)


def _cells_oracle(f, q, r):
    """Loop-by-loop enumeration of the cells met by the sampled graph.

    Every sample inside q marks its cell (both columns when it sits on an
    interior column edge); each column then also meets every row between
    its lowest and highest marked row, by continuity.
    """
    x0, x1 = q.x_range
    y0, y1 = q.y_range
    n_cols = math.ceil(2 * q.half_side / r)
    rows = {}
    for t, y in zip(f.t.tolist(), f.values.tolist()):
        if not (x0 <= t <= x1 and y0 <= y <= y1):
            continue
        cols = set()
        for j in range(n_cols):
            a = x0 + j * r
            b = x0 + (j + 1) * r
            if a <= t <= b:
                cols.add(j)
        row = math.floor((y - y0) / r)
        for j in cols:
            rows.setdefault(j, set()).add(row)
    return sum(max(rs) - min(rs) + 1 for rs in rows.values())


def _greedy_packing(points, r):
    """Greedy maximal set with pairwise distance > r; any cover by sets of
    diameter <= r needs at least this many sets."""
    kept = []
    for p in points:
        if all(np.hypot(*(p - k)) > r for k in kept):
            kept.append(p)
    return len(kept)


# -- column counts --------------------------------------------------------------

def test_flat_line_count():
    f = sample_function(lambda t: np.zeros_like(t), -1.0, 1.0, 257)
    rep = column_cover_count(f, Square((0.0, 0.0), 1.0), 0.25)
    assert rep.count == 8
    assert rep.per_column_counts == [1] * 8


def test_identity_count():
    f = sample_function(lambda t: t, -1.0, 1.0, 257)
    rep = column_cover_count(f, Square((0.0, 0.0), 1.0), 0.5)
    assert rep.count == 8
    assert sum(rep.per_column_counts) == rep.count


def test_takagi_square_matches_cell_enumeration(takagi_sqrt):
    spec = TakagiSpec(2 ** -0.5, 2.0)
    q = Square((0.5, eval_takagi(spec, 0.5)), 0.25)
    r = 2.0 ** -8
    assert column_cover_count(takagi_sqrt, q, r).count == _cells_oracle(takagi_sqrt, q, r)


@given(st.integers(0, 2 ** 32 - 1), st.floats(0.05, 0.5), st.integers(4, 40))
def test_count_matches_oracle_on_random_walks(seed, R, k):
    rng = np.random.default_rng(seed)
    vals = np.cumsum(rng.normal(0, 0.01, 513))
    f = sample_function(lambda t: vals, 0.0, 1.0, 513)
    i = int(rng.integers(0, 513))
    q = Square((f.t[i], vals[i]), R)
    r = max(2 * R / k, 4 * f.step)
    assert column_cover_count(f, q, r).count == _cells_oracle(f, q, r)


def test_count_errors():
    f = sample_function(lambda t: t, 0.0, 1.0, 65)
    with pytest.raises(ResolutionError):
        column_cover_count(f, Square((0.5, 0.5), 0.5), 0.01)
    with pytest.raises(DisjointError):
        column_cover_count(f, Square((0.5, 5.0), 0.5), 0.25)
    with pytest.raises(ValueError):
        column_cover_count(f, Square((0.5, 0.5), 0.1), 0.5)


def test_count_monotone_in_r(takagi_sqrt):
    q = Square((0.5, 0.6), 0.25)
    counts = [column_cover_count(takagi_sqrt, q, 2.0 ** -k).count for k in range(3, 15)]
    assert all(b >= a for a, b in zip(counts, counts[1:]))


@given(st.integers(0, 2 ** 32 - 1))
def test_nine_factor_against_packing_lower_bound(seed):
    rng = np.random.default_rng(seed)
    coarse = np.cumsum(rng.normal(0, 0.15, 25))
    # polyline upsampled so the grid is fine enough for the resolution guard
    n = 193
    t = np.linspace(0.0, 1.0, n)
    vals = np.interp(t, np.linspace(0.0, 1.0, 25), coarse)
    f = sample_function(lambda _: vals, 0.0, 1.0, n)
    q = Square((0.5, float(vals[n // 2])), 0.5)
    r = 0.125
    count = column_cover_count(f, q, r).count
    inside = (vals >= q.y_range[0]) & (vals <= q.y_range[1])
    pts = np.column_stack([t[inside], vals[inside]])
    assert count <= 9 * _greedy_packing(pts, r)


# -- box dimension -------------------------------------------------------------------

def test_box_dimension_identity():
    f = sample_function(lambda t: t, 0.0, 1.0, 2 ** 12 + 1)
    est, fit = box_dimension(f, [2.0 ** -k for k in range(4, 11)])
    assert est == pytest.approx(1.0, abs=0.05)
    assert fit.r_squared > 0.99


def test_box_dimension_takagi():
    # the finest scale needs 2**18 samples to resolve the oscillation
    f = sample_function(TakagiSpec(2 ** -0.5, 2.0), 0.0, 1.0, 2 ** 18 + 1)
    est, _ = box_dimension(f, [2.0 ** -k for k in range(6, 15)])
    assert est == pytest.approx(1.5, abs=0.05)


def test_box_dimension_zigzag():
    z = ZigzagSpec(3.0, m_max=200)
    f = sample_function(build_zigzag(z), float(z.a(200)), 1.0, 2 ** 14 + 1)
    est, _ = box_dimension(f, [2.0 ** -k for k in range(4, 11)])
    assert est == pytest.approx(1.0, abs=0.05)


def test_box_dimension_needs_four_scales():
    f = sample_function(lambda t: t, 0.0, 1.0, 1025)
    with pytest.raises(ValueError):
        box_dimension(f, [0.5, 0.25, 0.125])


# -- spectrum -------------------------------------------------------------------------

def test_spectrum_identity():
    f = sample_function(lambda t: t, 0.0, 1.0, 2 ** 15 + 1)
    p = spectrum_at_theta(f, 0.5, np.geomspace(0.1, 0.02, 5), [0.2, 0.5, 0.8])
    assert p.regression_exponent == pytest.approx(1.0, abs=0.05)
    assert p.evidence.count >= 1


def test_spectrum_takagi_below_holder_bound(takagi_sqrt):
    centers = np.linspace(0.05, 0.95, 10).tolist()
    p = spectrum_at_theta(takagi_sqrt, 0.25, np.geomspace(0.4, 0.1, 5), centers)
    assert p.regression_exponent <= 5 / 3 + 0.05


def test_spectrum_zigzag_near_origin():
    z = ZigzagSpec(3.0, m_max=3000)
    f = sample_function(build_zigzag(z), 0.0, 0.01, 2 ** 18 + 1)
    Rs = [float(z.a(n)) for n in (10, 12, 14, 16)]
    p = spectrum_at_theta(f, 0.5, Rs, [0.0])
    assert p.exponent >= 1.4


def test_spectrum_errors():
    f = sample_function(lambda t: t, 0.0, 1.0, 1025)
    with pytest.raises(ValueError):
        spectrum_at_theta(f, 0.5, [], [0.5])
    with pytest.raises(ResolutionError):
        spectrum_at_theta(f, 0.5, [0.01], [0.5])
    with pytest.raises(ValueError):
        spectrum_at_theta(f, 1.0, [0.5], [0.5])


def test_spectrum_jobs_agree(takagi_sqrt):
    args = (takagi_sqrt, 0.3, [0.3, 0.2, 0.15], [0.2, 0.4, 0.6])
    a = spectrum_at_theta(*args, jobs=1)
    b = spectrum_at_theta(*args, jobs=3)
    assert a.to_dict() == b.to_dict()


def test_spectrum_at_small_theta_tracks_box_dimension(takagi_sqrt):
    est, _ = box_dimension(takagi_sqrt, [2.0 ** -k for k in range(6, 15)])
    ladders = resolution_ladders(takagi_sqrt, 0.1)
    centers = np.linspace(0.05, 0.95, 10).tolist()
    p = max((spectrum_at_theta(takagi_sqrt, 0.1, lad, centers) for lad in ladders),
            key=lambda p: p.exponent)
    assert p.exponent >= est - 0.05


def test_regularized_examples():
    curve = SpectrumCurve.from_pairs([(0.2, 1.3), (0.4, 1.5)])
    assert regularized_spectrum(curve, 0.4) == 1.5
    assert regularized_spectrum(curve, 0.25) == 1.3
    with pytest.raises(ValueError):
        regularized_spectrum(curve, 0.5)


@given(st.lists(st.floats(0.0, 2.0), min_size=2, max_size=10))
def test_regularized_nondecreasing(values):
    thetas = np.linspace(0.05, 0.9, len(values))
    curve = SpectrumCurve.from_pairs(zip(thetas, values))
    reg = [regularized_spectrum(curve, th) for th in thetas]
    assert all(b >= a for a, b in zip(reg, reg[1:]))
    if all(b >= a for a, b in zip(values, values[1:])):
        assert reg == list(values)


def test_curve_rejects_unsorted():
    with pytest.raises(ValueError):
        SpectrumCurve.from_pairs([(0.4, 1.0), (0.2, 1.0)])


# -- audits ----------------------------------------------------------------------------

def test_bound_examples():
    assert upper_bound(Holder(0.5), 0.5) == pytest.approx(2.0)
    assert upper_bound(Sobolev(math.inf), 0.3) == 1.0
    assert upper_bound(Sobolev(2.0), 0.5) == pytest.approx(1.5)


def test_bad_regularity():
    with pytest.raises(ParameterError):
        Holder(1.0)
    with pytest.raises(ParameterError):
        Sobolev(0.5)


def test_audit_takagi_passes(takagi_sqrt):
    centers = np.linspace(0.05, 0.95, 8).tolist()
    rep = audit_upper_bound(takagi_sqrt, Holder(0.5), [0.2, 0.4],
                            lambda th: resolution_ladders(takagi_sqrt, th), centers)
    assert rep.passed
    assert all(r.regression_exponent <= r.bound + 0.05 for r in rep.rows)


def test_audit_rejects_theta_out_of_range(takagi_sqrt):
    with pytest.raises(ParameterError):
        audit_upper_bound(takagi_sqrt, Holder(0.5), [0.6], [[0.3, 0.2]], [0.5])


# -- BV checks ---------------------------------------------------------------------------

def test_rotation_identity_is_flat():
    f = sample_function(lambda t: t, 0.0, 1.0, 101)
    slope, ok = rotate_monotone_check(f)
    assert slope == 0.0 and ok


@given(st.integers(0, 2 ** 32 - 1))
def test_rotation_staircases(seed):
    f = random_staircase(np.random.default_rng(seed))
    slope, ok = rotate_monotone_check(f)
    assert ok and slope <= 1 + 1e-9


def test_rotation_decreasing_and_not_monotone():
    f = sample_function(lambda t: -(t ** 3), 0.0, 1.0, 101)
    assert rotate_monotone_check(f)[1]
    g = sample_function(np.sin, 0.0, 3.0, 301)
    with pytest.raises(NotMonotoneError):
        rotate_monotone_check(g)


def test_graph_sum_examples(takagi_half):
    g = sample_function(lambda t: t, 0.0, 1.0, 1001)
    h = sample_function(lambda t: -t, 0.0, 1.0, 1001)
    assert graph_sum_osc_check(g, h, 200)
    assert graph_sum_osc_check(takagi_half, takagi_half, 200)
    with pytest.raises(GridMismatchError):
        graph_sum_osc_check(g, sample_function(lambda t: t, 0.0, 1.0, 1000), 10)
