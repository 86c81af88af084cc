"""Uniform co-Hölder estimates on large subintervals: search, audit and bound."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .covering import Square
from .errors import DisjointError, ParameterError
from .funcspace import SampledFunction, sample_function

C_FLOOR = 1e-3


def _check_params(alpha, eta, epsilon):
    if not 0 < alpha < 1:
        raise ParameterError("alpha must lie in (0, 1)")
    if eta < 0 or epsilon < 0:
        raise ParameterError("eta and epsilon must be non-negative")
    if not eta + epsilon < 1 - alpha:
        raise ParameterError(f"need eta + epsilon < 1 - alpha, got "
                             f"{eta} + {epsilon} >= {1 - alpha}")


def theta0_of(alpha: float, eta: float, epsilon: float) -> float:
    return alpha / (1 - eta - epsilon)


def interval_decomposition(f: SampledFunction, q: Square):
    """Maximal grid intervals whose samples all lie in ``q``.

    Returns ``[(a, b), ...]`` sorted by decreasing length, then position; a
    run of one sample gives a degenerate interval (a, a).
    """
    x0, x1 = q.x_range
    y0, y1 = q.y_range
    i0, i1 = f.index_range(x0, x1)
    y = f.values[i0:i1]
    inside = (y >= y0) & (y <= y1)
    if not inside.any():
        raise DisjointError("square does not meet the sampled graph")
    edges = np.diff(np.concatenate([[0], inside.astype(np.int8), [0]]))
    starts = np.flatnonzero(edges == 1)
    ends = np.flatnonzero(edges == -1) - 1
    t = f.t[i0:i1]
    out = [(float(t[a]), float(t[b])) for a, b in zip(starts, ends)]
    out.sort(key=lambda ab: (-(ab[1] - ab[0]), ab[0]))
    return out


def _dyadic_intervals(lo, hi, count, min_length):
    """First ``count`` dyadic subintervals of [lo, hi], coarse levels first."""
    L = hi - lo
    level = 0
    n = 0
    while n < count:
        k = 2 ** level
        if L / k < min_length:
            return
        for i in range(k):
            if n >= count:
                return
            yield lo + L * i / k, lo + L * (i + 1) / k
            n += 1
        level += 1


@dataclass
class OscillationMeasure:
    best_c: float
    worst_J: Optional[tuple]
    tested: int

    def to_dict(self):
        return {"best_c": self.best_c, "worst_J": self.worst_J, "tested": self.tested}


def lower_oscillation(f: SampledFunction, q: Square, alpha: float, eta: float,
                      J_count: int, min_length: float = 0.0) -> OscillationMeasure:
    """Like ``measure_lower_oscillation`` but also returns the worst J."""
    if J_count < 1:
        raise ValueError("J_count must be at least 1")
    x0, x1 = q.x_range
    lo, hi = max(x0, f.lo), min(x1, f.hi)
    if not lo < hi:
        raise DisjointError("square projection misses the domain")
    proj = (x1 - x0) ** eta
    floor = max(min_length, 2 * f.step)
    best, worst, tested = math.inf, None, 0
    for a, b in _dyadic_intervals(lo, hi, J_count, floor):
        i0, i1 = f.index_range(a, b)
        if i1 - i0 < 2:
            continue
        ratio = float(np.ptp(f.values[i0:i1])) / (proj * (b - a) ** alpha)
        tested += 1
        if ratio < best:
            best, worst = ratio, (a, b)
    return OscillationMeasure(best if tested else math.nan, worst, tested)


def measure_lower_oscillation(f: SampledFunction, q: Square, alpha: float, eta: float,
                              J_count: int, min_length: float = 0.0) -> float:
    """Smallest osc(f, J) / (|Proj_x q|^eta |J|^alpha) over dyadic J.

    J runs through the dyadic subintervals of Proj_x(q) (clipped to the
    domain), coarse levels first, stopping after ``J_count`` intervals or
    below ``min_length`` (and below two grid steps).  The enumeration is a
    prefix order, so the result is nonincreasing in ``J_count``.
    """
    return lower_oscillation(f, q, alpha, eta, J_count, min_length).best_c


# -- certificates ---------------------------------------------------------------

@dataclass
class SquareEvidence:
    center: tuple
    R: float
    intervals: list
    total_length: float
    osc: OscillationMeasure
    grid_step: float
    c_max: float
    anchor: float = 0.0
    x: float = 0.0

    def chosen(self, c, epsilon):
        """Greedy longest-first prefix reaching c R^(1+eps); None if impossible."""
        need = c * self.R ** (1 + epsilon)
        acc = 0.0
        for k, (a, b) in enumerate(self.intervals):
            acc += b - a
            if acc >= need:
                return self.intervals[:k + 1]
        return None

    def to_dict(self):
        return {"x": self.x, "anchor": self.anchor, "center": list(self.center),
                "R": self.R, "grid_step": self.grid_step,
                "n_intervals": len(self.intervals), "total_length": self.total_length,
                "osc": self.osc.to_dict(), "c_max": self.c_max}


def _passes(ev: SquareEvidence, c, epsilon, theta0) -> bool:
    if not ev.osc.best_c >= c:
        return False
    pick = ev.chosen(c, epsilon)
    if pick is None:
        return False
    a, b = pick[-1]
    return b - a >= c * ev.R ** (1 / theta0)


def _largest_c(ev, epsilon, theta0):
    """Largest c in (0, 1) on the 1e-3 grid passing this square (0 if none)."""
    lo, hi = 0, 1000
    if not _passes(ev, C_FLOOR, epsilon, theta0):
        return 0.0
    lo = 1
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if _passes(ev, mid / 1000, epsilon, theta0):
            lo = mid
        else:
            hi = mid
    return lo / 1000


@dataclass
class CoHolderCertificate:
    alpha: float
    eta: float
    epsilon: float
    c: float
    squares: list
    intervals: list
    min_lengths: list
    total_lengths: list
    theta0: float
    J_count: int = 0
    anchors: list = field(default_factory=list)
    centers: list = field(default_factory=list)
    passed: bool = True

    def to_dict(self):
        """``squares`` hold (x, R); centres and intervals are relative to the
        matching anchor."""
        return {"kind": "certificate", "alpha": self.alpha, "eta": self.eta,
                "epsilon": self.epsilon, "c": self.c, "theta0": self.theta0,
                "J_count": self.J_count,
                "squares": [{"x": x, "R": R, "anchor": a, "center": list(z)}
                            for (x, R), a, z in zip(self.squares, self.anchors,
                                                    self.centers)],
                "intervals": [[list(iv) for iv in ivs] for ivs in self.intervals],
                "min_lengths": self.min_lengths, "total_lengths": self.total_lengths}


@dataclass
class DeviationReport:
    alpha: float
    eta: float
    epsilon: float
    c: float
    theta0: float
    rows: list
    passed: bool = False

    def to_dict(self):
        return {"kind": "deviation", "alpha": self.alpha, "eta": self.eta,
                "epsilon": self.epsilon, "c": self.c, "theta0": self.theta0,
                "rows": self.rows}


def _frame(f: SampledFunction, x: float, R: float, min_points: int, local_samples: int):
    """Grid and centre for the square of half-side R over x.

    Returns ``(g, anchor, z)``: g is sampled in coordinates relative to
    ``anchor`` and z is the square's centre on g's graph.  Squares holding
    at least ``min_points`` base samples use the base grid (anchor 0, centre
    at the nearest grid point).  Smaller ones are resampled on an odd number
    of points centred at x, through the generator's ``at_offset`` when it
    has one, so that squares below double resolution at x stay resolved.
    """
    i0, i1 = f.index_range(x - R, x + R)
    if i1 - i0 >= min_points or f.generator is None:
        i = f.nearest_index(x)
        return f, 0.0, (float(f.t[i]), float(f.values[i]))
    # odd local grid centred at x, cut back to the sampled domain
    half = (local_samples | 1) // 2
    h = R / half
    kl = min(half, int(math.floor((x - f.lo) / h)))
    kr = min(half, int(math.floor((f.hi - x) / h)))
    gen = f.generator
    if hasattr(gen, "at_offset"):
        g = sample_function(lambda u: gen.at_offset(x, u), -kl * h, kr * h, kl + kr + 1,
                            dict(f.meta, anchor=x))
        anchor = x
    else:
        g = sample_function(lambda u: gen(x + u), -kl * h, kr * h, kl + kr + 1,
                            dict(f.meta, anchor=x))
        anchor = x
    return g, anchor, (float(g.t[kl]), float(g.values[kl]))


def square_evidence(f: SampledFunction, x: float, R: float, alpha: float, eta: float,
                    epsilon: float, J_count: int = 4096, min_points: int = 4096,
                    local_samples: int = 2 ** 16) -> SquareEvidence:
    """Measurements for the square of half-side R centred on the graph at x.

    Squares holding fewer than ``min_points`` base samples are resampled
    from the generator (see ``_frame``); centre and intervals are then
    relative to ``anchor``.
    """
    theta0 = theta0_of(alpha, eta, epsilon)
    g, anchor, z = _frame(f, x, R, min_points, local_samples)
    q = Square(z, R)
    intervals = interval_decomposition(g, q)
    osc = lower_oscillation(g, q, alpha, eta, J_count, 0.5 * R ** (1 / theta0))
    total = float(sum(b - a for a, b in intervals))
    ev = SquareEvidence(z, float(R), intervals, total, osc, g.step, 0.0, anchor, float(x))
    ev.c_max = _largest_c(ev, epsilon, theta0)
    return ev


def certificate_search(f: SampledFunction, alpha: float, eta: float, epsilon: float,
                       candidate_squares: Sequence, J_count: int = 4096,
                       min_points: int = 4096, local_samples: int = 2 ** 16):
    """Look for a common constant c certifying every candidate square.

    ``candidate_squares`` holds ``(x, R)`` pairs; the centre is the graph
    point over x.  For each square the projection is decomposed into maximal
    intervals inside the square, kept longest first until their total reaches
    c R^(1+eps), and the last one kept must be at least c R^(1/theta0).  The
    oscillation ratio is measured on dyadic J down to 0.5 R^(1/theta0).  c is
    bisected on the grid 0.001, ..., 0.999.  Returns a certificate if some
    c >= 0.001 passes all squares, else a deviation report at c = 0.001.
    """
    _check_params(alpha, eta, epsilon)
    if not candidate_squares:
        raise ValueError("no candidate squares")
    theta0 = theta0_of(alpha, eta, epsilon)
    evidence = [square_evidence(f, x, R, alpha, eta, epsilon, J_count, min_points,
                                local_samples) for x, R in candidate_squares]
    c = min(ev.c_max for ev in evidence)
    if c >= C_FLOOR:
        picks = [ev.chosen(c, epsilon) for ev in evidence]
        return CoHolderCertificate(
            alpha, eta, epsilon, c, [(ev.x, ev.R) for ev in evidence], picks,
            [min(b - a for a, b in p) for p in picks],
            [float(sum(b - a for a, b in p)) for p in picks], theta0, J_count,
            anchors=[ev.anchor for ev in evidence], centers=[ev.center for ev in evidence])
    return DeviationReport(alpha, eta, epsilon, C_FLOOR, theta0,
                           [_deviation(ev, C_FLOOR, epsilon, theta0) for ev in evidence])


def _deviation(ev: SquareEvidence, c, epsilon, theta0):
    """Multiplicative shortfall of each inequality at c (values < 1 fail)."""
    need_sum = c * ev.R ** (1 + epsilon)
    need_min = c * ev.R ** (1 / theta0)
    pick = ev.chosen(c, epsilon) or ev.intervals
    shortest = min(pick, key=lambda ab: ab[1] - ab[0])
    return {"x": ev.x, "anchor": ev.anchor, "center": list(ev.center), "R": ev.R,
            "c_max": ev.c_max,
            "oscillation_ratio": ev.osc.best_c / c if ev.osc.tested else None,
            "worst_J": ev.osc.worst_J,
            "sum_ratio": ev.total_length / need_sum,
            "min_length_ratio": (shortest[1] - shortest[0]) / need_min,
            "shortest_interval": list(shortest),
            "n_intervals": len(ev.intervals), "grid_step": ev.grid_step,
            # below four grid steps the graph inside the square is not resolved
            "resolved": bool(ev.intervals[0][1] - ev.intervals[0][0] >= 4 * ev.grid_step)}


def audit_certificate(f: SampledFunction, cert: CoHolderCertificate,
                      min_points: int = 4096, local_samples: int = 2 ** 16):
    """Re-verify a certificate from freshly drawn samples; returns failures."""
    bad = []
    for (x, R), ivs in zip(cert.squares, cert.intervals):
        g, _, z = _frame(f, x, R, min_points, local_samples)
        q = Square(z, R)
        x0, x1 = q.x_range
        y0, y1 = q.y_range
        for a, b in ivs:
            i0, i1 = g.index_range(a, b)
            v = g.values[i0:i1]
            if not (x0 <= a <= b <= x1) or i1 <= i0 or np.any((v < y0) | (v > y1)):
                bad.append(("interval outside square", (x, R), (a, b)))
        spans = sorted(ivs)
        if any(s[0] <= p[1] for p, s in zip(spans, spans[1:])):
            bad.append(("intervals overlap", (x, R), None))
        total = sum(b - a for a, b in ivs)
        if total < cert.c * R ** (1 + cert.epsilon):
            bad.append(("total length too small", (x, R), total))
        if min(b - a for a, b in ivs) < cert.c * R ** (1 / cert.theta0):
            bad.append(("interval too short", (x, R), None))
        osc = measure_lower_oscillation(g, q, cert.alpha, cert.eta, cert.J_count or 4096,
                                        0.5 * R ** (1 / cert.theta0))
        if not osc >= cert.c:
            bad.append(("oscillation too small", (x, R), osc))
    return bad


def propose_squares(f: SampledFunction, radii: Sequence[float], x_start=None):
    """Heuristic candidates: descend toward local maxima as R shrinks.

    Starts at the highest sample (or ``x_start``); each next centre is the
    highest sample within the previous square's projection.  Not canonical.
    """
    x = float(f.t[int(np.argmax(f.values))]) if x_start is None else float(x_start)
    out = []
    for R in sorted(radii, reverse=True):
        i0, i1 = f.index_range(x - R, x + R)
        if i1 > i0:
            x = float(f.t[i0 + int(np.argmax(f.values[i0:i1]))])
        out.append((x, float(R)))
    return out


# -- bound ------------------------------------------------------------------------

def lower_spectrum_bound(cert, theta: float) -> float:
    """(2 - alpha - (1 + eta + eps) theta) / (1 - theta) for 0 < theta <= theta0.

    ``cert`` is anything with ``alpha``, ``eta`` and ``epsilon`` attributes.
    Returns exactly 2.0 at theta = theta0.
    """
    alpha, eta, eps = cert.alpha, cert.eta, cert.epsilon
    _check_params(alpha, eta, eps)
    theta0 = theta0_of(alpha, eta, eps)
    if not 0 < theta <= theta0:
        raise ParameterError(f"theta must lie in (0, {theta0}]")
    if theta == theta0:
        return 2.0
    return (2 - alpha - (1 + eta + eps) * theta) / (1 - theta)


@dataclass(frozen=True)
class CoHolderParams:
    alpha: float
    eta: float = 0.0
    epsilon: float = 0.0

    def __post_init__(self):
        _check_params(self.alpha, self.eta, self.epsilon)

    @property
    def theta0(self):
        return theta0_of(self.alpha, self.eta, self.epsilon)
