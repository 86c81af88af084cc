"""Column-oscillation covering counts, box dimension and Assouad spectrum."""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import (DisjointError, GridMismatchError, NotMonotoneError,
                     ParameterError, ResolutionError)
from .funcspace import SampledFunction


@dataclass(frozen=True)
class Square:
    center: tuple
    half_side: float

    def __post_init__(self):
        if not self.half_side > 0:
            raise ValueError("half_side must be positive")
        object.__setattr__(self, "center", (float(self.center[0]), float(self.center[1])))

    @property
    def x_range(self):
        return self.center[0] - self.half_side, self.center[0] + self.half_side

    @property
    def y_range(self):
        return self.center[1] - self.half_side, self.center[1] + self.half_side


@dataclass
class CoverReport:
    square: Square
    r: float
    count: int
    per_column_counts: list

    def to_dict(self):
        return {"center": list(self.square.center), "half_side": self.square.half_side,
                "r": self.r, "count": self.count,
                "per_column_counts": list(self.per_column_counts)}


def column_cover_count(f: SampledFunction, q: Square, r: float) -> CoverReport:
    """Count r-cells over ``q`` met by the graph, column by column.

    Columns are the closed intervals ``[x0 + j r, x0 + (j+1) r]``,
    j < ceil(2R / r), anchored at the left edge x0 of ``q``; a sample on a
    column edge belongs to both neighbours.  Rows are half-open
    ``[y0 + i r, y0 + (i+1) r)`` anchored at the bottom edge y0.  Within a
    column only samples inside ``q`` count, and the column contributes every
    row between the rows of its lowest and highest such sample (the graph is
    continuous, so it meets all of them).
    """
    R = q.half_side
    if not 0 < r <= 2 * R:
        raise ValueError(f"need 0 < r <= 2R, got r={r}, R={R}")
    if f.step > r / 4:
        raise ResolutionError(f"grid step {f.step:.3g} exceeds r/4 = {r / 4:.3g}")
    x0, x1 = q.x_range
    y0, y1 = q.y_range
    i0, i1 = f.index_range(x0, x1)
    t = f.t[i0:i1]
    y = f.values[i0:i1]
    inside = (y >= y0) & (y <= y1)
    if not np.any(inside):
        raise DisjointError("square does not meet the sampled graph")
    t, y = t[inside], y[inside]

    n_cols = math.ceil(2 * R / r)
    edges = x0 + r * np.arange(n_cols + 1)
    col = np.searchsorted(edges, t, side="right") - 1
    col = np.minimum(col, n_cols - 1)
    on_edge = (col > 0) & (t == edges[col])
    col = np.concatenate([col, col[on_edge] - 1])
    y = np.concatenate([y, y[on_edge]])

    lo = np.full(n_cols, np.inf)
    hi = np.full(n_cols, -np.inf)
    np.minimum.at(lo, col, y)
    np.maximum.at(hi, col, y)
    used = np.isfinite(lo)
    counts = np.zeros(n_cols, dtype=np.int64)
    counts[used] = (np.floor((hi[used] - y0) / r) - np.floor((lo[used] - y0) / r)
                    + 1).astype(np.int64)
    return CoverReport(q, float(r), int(counts.sum()), counts.tolist())


def bounding_square(f: SampledFunction) -> Square:
    """Smallest square containing the sampled graph with its lower-left
    corner at (lo, min f), so columns start at the domain's left end."""
    y_lo, y_hi = float(f.values.min()), float(f.values.max())
    half = max(f.hi - f.lo, y_hi - y_lo) / 2
    return Square((f.lo + half, y_lo + half), half)


@dataclass
class Regression:
    slope: float
    intercept: float
    r_squared: float
    x: list
    y: list

    def to_dict(self):
        return {"slope": self.slope, "intercept": self.intercept,
                "r_squared": self.r_squared, "x": self.x, "y": self.y}


def _fit(x, y) -> Regression:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid ** 2)) / ss if ss > 0 else 1.0
    return Regression(float(slope), float(intercept), r2, x.tolist(), y.tolist())


def box_dimension(f: SampledFunction, r_ladder: Sequence[float]):
    """Least-squares slope of log N(r) against log(1/r) over the full graph.

    Returns ``(estimate, fit)``; the estimate is clipped to [1, 2].
    """
    r_ladder = sorted((float(r) for r in r_ladder), reverse=True)
    if len(r_ladder) < 4:
        raise ValueError("need at least four scales")
    q = bounding_square(f)
    counts = [column_cover_count(f, q, r).count for r in r_ladder]
    fit = _fit(-np.log(r_ladder), np.log(counts))
    return float(np.clip(fit.slope, 1.0, 2.0)), fit


def geometric_ladder(hi: float, lo: float, n: int):
    return np.geomspace(hi, lo, n).tolist()


def resolution_ladders(f: SampledFunction, theta: float,
                       lambdas: Sequence[float] = (0.05, 0.2, 0.35, 0.5), n: int = 6):
    """R-ladders ending where r = R**(1/theta) is just above four grid steps.

    With R_min = (4 h)**theta (times 1.001), ladder j runs geometrically
    from R_min**lambdas[j] down to R_min in ``n`` steps.
    """
    R_min = (4 * f.step) ** theta * 1.001
    if not R_min < 1:
        raise ResolutionError("grid too coarse for any admissible R")
    return [geometric_ladder(R_min ** lam, R_min, n) for lam in lambdas]


# -- Assouad spectrum ------------------------------------------------------------

@dataclass
class Evidence:
    center: tuple
    R: float
    r: float
    count: int

    def to_dict(self):
        return {"center": list(self.center), "R": self.R, "r": self.r, "count": self.count}


@dataclass
class SpectrumPoint:
    theta: float
    exponent: float
    regression_exponent: float
    evidence: Evidence
    fit: Optional[Regression] = None
    counts: list = field(default_factory=list)

    def to_dict(self):
        return {"theta": self.theta, "exponent": self.exponent,
                "regression_exponent": self.regression_exponent,
                "evidence": self.evidence.to_dict(),
                "fit": None if self.fit is None else self.fit.to_dict(),
                "counts": self.counts}


def _count_at(f, x, R, r):
    i = f.nearest_index(x)
    z = (float(f.t[i]), float(f.values[i]))
    return z, column_cover_count(f, Square(z, R), r).count


def spectrum_at_theta(f: SampledFunction, theta: float, R_ladder: Sequence[float],
                      centers: Sequence[float], jobs: int = 1) -> SpectrumPoint:
    """Finite-scale Assouad-spectrum exponent at ``theta``.

    For every center x (snapped to the nearest graph point) and every R in
    the ladder, with r = R**(1/theta), the ratio
    log N(Q(z, R) ∩ Graph, r) / log(R / r) is formed.  ``exponent`` is the
    largest ratio; ``regression_exponent`` is the slope of
    log max_z N against log(R / r) across the ladder (needs two or more R).
    Both are clamped to [0, 2].
    """
    if not 0 < theta < 1:
        raise ValueError("theta must lie in (0, 1)")
    R_ladder = [float(R) for R in R_ladder]
    if not R_ladder:
        raise ValueError("empty R ladder")
    if not centers:
        raise ValueError("no centers given")
    for R in R_ladder:
        if not 0 < R < 1:
            raise ValueError(f"R must lie in (0, 1), got {R}")
        if R ** (1 / theta) < 4 * f.step:
            raise ResolutionError(f"r = R^(1/theta) = {R ** (1 / theta):.3g} is below "
                                  f"4 grid steps for R = {R}")

    tasks = [(x, R) for R in R_ladder for x in centers]

    def run(task):
        x, R = task
        return _count_at(f, x, R, R ** (1 / theta))

    if jobs > 1:
        with ThreadPoolExecutor(jobs) as pool:
            results = list(pool.map(run, tasks))
    else:
        results = [run(task) for task in tasks]

    best = None
    per_R = {}
    for (x, R), (z, count) in zip(tasks, results):
        r = R ** (1 / theta)
        ratio = math.log(max(count, 1)) / math.log(R / r)
        if best is None or ratio > best[0]:
            best = (ratio, Evidence(z, R, r, count))
        per_R[R] = max(per_R.get(R, 0), count)
    fit = None
    reg = float("nan")
    if len(R_ladder) >= 2:
        Rs = sorted(per_R)
        fit = _fit([math.log(R / R ** (1 / theta)) for R in Rs],
                   [math.log(per_R[R]) for R in Rs])
        reg = float(np.clip(fit.slope, 0.0, 2.0))
    counts = [[R, per_R[R]] for R in sorted(per_R)]
    return SpectrumPoint(theta, float(np.clip(best[0], 0.0, 2.0)), reg, best[1], fit, counts)


@dataclass
class SpectrumCurve:
    points: list

    def __post_init__(self):
        thetas = [p.theta for p in self.points]
        if any(b <= a for a, b in zip(thetas, thetas[1:])):
            raise ValueError("curve thetas must be strictly increasing")

    @property
    def thetas(self):
        return [p.theta for p in self.points]

    def exponents(self, estimator: str = "max"):
        if estimator == "max":
            return [p.exponent for p in self.points]
        return [p.regression_exponent for p in self.points]

    @classmethod
    def from_pairs(cls, pairs):
        return cls([SpectrumPoint(float(t), float(e), float(e), Evidence((0.0, 0.0), 0.0, 0.0, 0))
                    for t, e in pairs])

    def to_dict(self):
        return {"points": [p.to_dict() for p in self.points]}


def spectrum_curve(f, thetas, R_ladder, centers, jobs=1) -> SpectrumCurve:
    return SpectrumCurve([spectrum_at_theta(f, th, R_ladder, centers, jobs) for th in thetas])


def regularized_spectrum(curve: SpectrumCurve, theta: float, estimator: str = "max") -> float:
    """Supremum of the curve's exponents at grid thetas <= theta."""
    if not curve.points:
        raise ValueError("empty curve")
    thetas = curve.thetas
    if theta < thetas[0] or theta > thetas[-1]:
        raise ValueError(f"theta {theta} outside curve range [{thetas[0]}, {thetas[-1]}]")
    vals = [e for th, e in zip(thetas, curve.exponents(estimator)) if th <= theta]
    return max(vals)


# -- upper-bound audits ---------------------------------------------------------------

@dataclass(frozen=True)
class Holder:
    alpha: float

    def __post_init__(self):
        if not 0 < self.alpha < 1:
            raise ParameterError("Hölder exponent must lie in (0, 1)")

    @property
    def theta_max(self):
        return self.alpha

    def bound(self, theta: float) -> float:
        return (2 - self.alpha - theta) / (1 - theta)


@dataclass(frozen=True)
class Sobolev:
    p: float

    def __post_init__(self):
        if not self.p >= 1:
            raise ParameterError("Sobolev exponent must be at least 1")

    @property
    def theta_max(self):
        return 1.0 if math.isinf(self.p) else self.p / (self.p + 1)

    def bound(self, theta: float) -> float:
        if math.isinf(self.p):
            return 1.0
        return 1 + theta / ((1 - theta) * self.p)


def upper_bound(regularity, theta: float) -> float:
    return regularity.bound(theta)


@dataclass
class AuditRow:
    theta: float
    bound: float
    exponent: float
    regression_exponent: float
    violation: bool
    point: SpectrumPoint

    def to_dict(self):
        return {"theta": self.theta, "bound": self.bound, "exponent": self.exponent,
                "regression_exponent": self.regression_exponent,
                "violation": self.violation, "point": self.point.to_dict()}


@dataclass
class AuditReport:
    regularity: object
    estimator: str
    tol: float
    rows: list

    @property
    def passed(self) -> bool:
        return not any(row.violation for row in self.rows)

    def to_dict(self):
        reg = self.regularity
        name = {"kind": "holder", "alpha": reg.alpha} if isinstance(reg, Holder) else \
            {"kind": "sobolev", "p": reg.p}
        return {"regularity": name, "estimator": self.estimator, "tol": self.tol,
                "passed": self.passed, "rows": [r.to_dict() for r in self.rows]}


def audit_upper_bound(f: SampledFunction, regularity, theta_grid, R_ladders, centers,
                      estimator: str = "regression", tol: float = 0.05,
                      jobs: int = 1) -> AuditReport:
    """Compare finite-scale spectrum estimates with the closed-form bound.

    ``R_ladders`` is a list of ladders, or a callable mapping theta to one;
    each theta is estimated on every ladder and the largest estimate is
    compared.  ``estimator`` selects which
    estimate is held to the bound ("regression" or "max"); both are reported.
    """
    if estimator not in ("regression", "max"):
        raise ValueError("estimator must be 'regression' or 'max'")
    rows = []
    for theta in theta_grid:
        if not 0 < theta <= regularity.theta_max:
            raise ParameterError(f"theta {theta} outside (0, {regularity.theta_max}]")
        bound = regularity.bound(theta)
        ladders = R_ladders(theta) if callable(R_ladders) else R_ladders
        pts = [spectrum_at_theta(f, theta, ladder, centers, jobs) for ladder in ladders]
        worst_max = max(pts, key=lambda p: p.exponent)
        reg_vals = [p.regression_exponent for p in pts if not math.isnan(p.regression_exponent)]
        worst_reg = max(reg_vals) if reg_vals else float("nan")
        held = worst_reg if estimator == "regression" else worst_max.exponent
        rows.append(AuditRow(float(theta), bound, worst_max.exponent, worst_reg,
                             bool(held > bound + tol), worst_max))
    return AuditReport(regularity, estimator, tol, rows)


# -- BV property checks -----------------------------------------------------------------

def rotate_monotone_check(f: SampledFunction, tol: float = 1e-9):
    """Rotate the graph of a monotone function by -pi/4 and measure its slope.

    A nondecreasing graph turns (clockwise) into the graph of a 1-Lipschitz
    function; a nonincreasing one is rotated counterclockwise instead.
    Returns ``(max_abs_slope, passed)``.
    """
    dy = np.diff(f.values)
    if np.all(dy >= 0):
        sign = 1.0
    elif np.all(dy <= 0):
        sign = -1.0
    else:
        raise NotMonotoneError("sampled function is not monotone")
    # u = (t + y)/sqrt(2) already increases along t, so rotate the increments
    # directly; both rotated increments share the 1/sqrt(2) factor
    dt = np.diff(f.t)
    dy = sign * dy
    du = dt + dy
    dv = dy - dt
    slopes = np.abs(dv) / du
    max_slope = float(slopes.max()) if len(slopes) else 0.0
    return max_slope, bool(max_slope <= 1 + tol)


def graph_sum_osc_check(g: SampledFunction, h: SampledFunction, trials: int,
                        seed: int = 0, rtol: float = 1e-12) -> bool:
    """Subadditivity osc(g+h, J) <= osc(g, J) + osc(h, J) on random J."""
    if not g.same_grid(h):
        raise GridMismatchError("g and h are sampled on different grids")
    rng = np.random.default_rng(seed)
    s = g.values + h.values
    scale = float(np.max(np.abs(g.values)) + np.max(np.abs(h.values)))
    for _ in range(trials):
        i, j = np.sort(rng.integers(0, g.n, 2))
        sl = slice(i, j + 1)
        lhs = np.ptp(s[sl])
        rhs = np.ptp(g.values[sl]) + np.ptp(h.values[sl])
        if lhs > rhs + rtol * scale:
            return False
    return True
