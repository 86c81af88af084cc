"""Separated point families on the zigzag graph and their packing exponents.

For the vertex sequence ``z_m = (a_m, (-1)**m a_m)`` the family D holds
``M(m)`` equally spaced points on every other segment ``[z_m, z_{m+1}]``,
``m = n, n+2, ..., n+N-2``, all inside the square ``Q(0, R_n)`` with
``R_n = a_n`` and pairwise distances above ``r_n = R_n**(1/theta)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

import numpy as np
from scipy.optimize import bisect
from scipy.spatial import cKDTree

from .errors import AuditFailure, InfeasibleError, ParameterError
from .funcspace import ZigzagSpec

VARIANTS = ("plain", "log_corrected")


def _check(s, theta, variant):
    if not s > 2:
        raise ParameterError(f"s must exceed 2, got {s}")
    if not 0 < theta < (s - 1) / s:
        raise ParameterError(f"theta must lie in (0, (s-1)/s) = (0, {(s - 1) / s:.6g}), got {theta}")
    if variant not in VARIANTS:
        raise ParameterError(f"unknown variant {variant!r}")


def default_c0(s: float) -> float:
    return min((s - 1) / math.sqrt(2), s - 1) ** (1 / s) / 2


def target_gamma(s: float, theta: float) -> float:
    return 1 + theta / ((1 - theta) * (s - 1))


def _seq(s, variant):
    return ZigzagSpec(s=s, variant=variant, m_max=3)


def _scales(z: ZigzagSpec, theta, n):
    R = float(z.a(n))
    return R, R ** (1 / theta)


def _constraints(z, n, N, r):
    """(segment constraint, cross constraint) for an even ``N``.

    The first keeps ``M >= 2`` on the last segment through
    ``sqrt(2) eps_{n+N-2} >= 2 r``; the second separates distinct segments
    through ``eps_{n+N-3} > r``.  With a single segment the second is vacuous.
    """
    seg = bool(math.sqrt(2) * float(z.eps(n + N - 2)) >= 2 * r)
    cross = True if N < 4 else bool(float(z.eps(n + N - 3)) > r)
    return seg, cross


def _segment_lengths(z, m):
    a0, a1 = z.a(m), z.a(m + 1)
    return np.hypot(z.eps(m), a0 + a1)


@dataclass
class PackingSet:
    s: float
    theta: float
    n: int
    variant: str
    R_n: float
    r_n: float
    N_n: int
    c0: float
    m: np.ndarray
    k: np.ndarray
    points: np.ndarray
    M: dict
    N_initial: int = 0
    shrink: int = 0

    @property
    def cardinality(self) -> int:
        return len(self.points)

    def segments(self):
        ms = np.array(sorted(self.M))
        z = _seq(self.s, self.variant)
        a0, a1 = z.a(ms), z.a(ms + 1)
        sign = np.where(ms % 2 == 0, 1.0, -1.0)
        return ms, np.stack([a0, sign * a0], 1), np.stack([a1, -sign * a1], 1)

    def params(self) -> dict:
        return {"s": self.s, "theta": self.theta, "n": self.n, "variant": self.variant,
                "R_n": self.R_n, "r_n": self.r_n, "N_n": self.N_n, "N_initial": self.N_initial,
                "shrink": self.shrink, "c0": self.c0, "cardinality": self.cardinality,
                "M": {str(m): int(v) for m, v in sorted(self.M.items())}}

    def rows(self):
        """(m, k, x, y) rows for CSV export."""
        return [(int(m), int(k), float(x), float(y))
                for m, k, (x, y) in zip(self.m, self.k, self.points)]


def build_packing(s: float, theta: float, n: int, c0: Optional[float] = None,
                  variant: str = "plain", n0: Optional[int] = None,
                  max_points: int = 20_000_000) -> PackingSet:
    """Separated family D on the zigzag graph at scale ``R_n = a_n``.

    ``N`` starts at the largest even integer at most ``c0 n**((s-1)/(s theta))``
    and is reduced in steps of two until both admissibility constraints hold
    (both are monotone in N, so the largest admissible value is bisected).
    Each used segment carries ``M = ceil(L / r_n)`` points including both
    endpoints, spaced ``L / (M - 1) > r_n``.

    Raises
    ------
    InfeasibleError
        If ``n < n0`` or no even ``N >= 2`` is admissible.
    ParameterError
        If ``r_n`` underflows or the family would exceed ``max_points``.
    """
    _check(s, theta, variant)
    z = _seq(s, variant)
    if n < z.m_first + 1 or (n0 is not None and n < n0):
        raise InfeasibleError(f"n = {n} is below the admissible start {max(n0 or 0, z.m_first + 1)}")
    c0 = default_c0(s) if c0 is None else float(c0)
    if not c0 > 0:
        raise ParameterError("c0 must be positive")
    R, r = _scales(z, theta, n)
    if not r > 0:
        raise ParameterError(f"r_n = R_n^(1/theta) underflows at n = {n}, theta = {theta}")
    N0 = 2 * int(math.floor(c0 * n ** ((s - 1) / (s * theta)) / 2))
    N = N0
    if N >= 2 and not all(_constraints(z, n, N, r)):
        lo, hi = 0, N // 2
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if all(_constraints(z, n, 2 * mid, r)):
                lo = mid
            else:
                hi = mid
        N = 2 * lo
    if N < 2:
        raise InfeasibleError(f"no even N >= 2 is admissible at n = {n} (initial {N0})")
    if N > max_points:
        # every used segment carries at least two points
        raise ParameterError(f"the family would hold over {N} points (limit {max_points})")

    ms = np.arange(n, n + N - 1, 2)
    L = _segment_lengths(z, ms)
    total = float(np.sum(np.ceil(L / r)))
    if total > max_points:
        raise ParameterError(f"the family would hold {total:.3g} points (limit {max_points})")
    M = np.ceil(L / r).astype(int)
    a0, a1 = z.a(ms), z.a(ms + 1)
    sign = np.where(ms % 2 == 0, 1.0, -1.0)
    m_col, k_col, pts = [], [], []
    for mi, Mi, u, v, sg in zip(ms, M, a0, a1, sign):
        t = np.arange(Mi) / (Mi - 1)
        p = np.empty((Mi, 2))
        # convex combination keeps both endpoints exact
        p[:, 0] = (1 - t) * u + t * v
        p[:, 1] = (1 - t) * (sg * u) + t * (-sg * v)
        m_col.append(np.full(Mi, mi))
        k_col.append(np.arange(1, Mi + 1))
        pts.append(p)
    return PackingSet(s=s, theta=theta, n=n, variant=variant, R_n=R, r_n=r, N_n=N, c0=c0,
                      m=np.concatenate(m_col), k=np.concatenate(k_col),
                      points=np.concatenate(pts), M={int(a): int(b) for a, b in zip(ms, M)},
                      N_initial=N0, shrink=(N0 - N) // 2)


@dataclass
class PackingAudit:
    min_pairwise_distance: float
    cardinality: int
    empirical_gamma: float
    target_gamma: float
    r_n: float
    c2: float
    violations: list = field(default_factory=list)
    off_segment: list = field(default_factory=list)
    off_square: list = field(default_factory=list)
    cardinality_identity: bool = True
    exact_checked: int = 0

    @property
    def passed(self) -> bool:
        return (not self.violations and not self.off_segment and not self.off_square
                and self.cardinality_identity and self.min_pairwise_distance > self.r_n)

    def to_dict(self) -> dict:
        return {"min_pairwise_distance": self.min_pairwise_distance,
                "cardinality": self.cardinality, "empirical_gamma": self.empirical_gamma,
                "target_gamma": self.target_gamma, "r_n": self.r_n, "c2": self.c2,
                "violations": [list(map(int, p)) for p in self.violations],
                "off_segment": [int(i) for i in self.off_segment],
                "off_square": [int(i) for i in self.off_square],
                "cardinality_identity": self.cardinality_identity,
                "exact_checked": self.exact_checked, "passed": self.passed}


def _exact_close(points, pairs, r, band=1e-9):
    """Pairs whose exact squared distance, with the stored doubles read as
    rationals, is at most ``r**2``.

    Pairs whose double-precision squared distance clears ``r**2`` by more
    than the relative ``band`` are decided in floating point.
    """
    if len(pairs) == 0:
        return []
    pairs = np.asarray(pairs)
    diff = points[pairs[:, 0]] - points[pairs[:, 1]]
    d2 = (diff ** 2).sum(1)
    bad = [tuple(p) for p in pairs[d2 < r * r * (1 - band)].tolist()]
    r2 = Fraction(r) ** 2
    for i, j in pairs[np.abs(d2 - r * r) <= band * r * r].tolist():
        dx = Fraction(points[i, 0]) - Fraction(points[j, 0])
        dy = Fraction(points[i, 1]) - Fraction(points[j, 1])
        if dx * dx + dy * dy <= r2:
            bad.append((i, j))
    return bad


def verify_packing(ps: PackingSet, exact: Optional[bool] = None, raise_on_fail: bool = False,
                   seg_tol: float = 1e-12) -> PackingAudit:
    """All-pairs separation, segment and square membership, and the exponent.

    Close pairs come from a k-d tree; for ``n <= 50`` (or ``exact=True``)
    every pair within ``1.01 r_n`` is rechecked, near ties in rational
    arithmetic.
    """
    pts = np.asarray(ps.points, dtype=float)
    r = ps.r_n
    tree = cKDTree(pts)
    if len(pts) > 1:
        d, _ = tree.query(pts, k=2)
        dmin = float(d[:, 1].min())
    else:
        dmin = math.inf
    close = sorted(tree.query_pairs(r))
    exact = ps.n <= 50 if exact is None else exact
    checked = 0
    if exact:
        near = sorted(tree.query_pairs(1.01 * r))
        checked = len(near)
        close = sorted(set(close) | set(_exact_close(pts, near, r)))

    z = _seq(ps.s, ps.variant)
    m = np.asarray(ps.m)
    a0, a1 = z.a(m), z.a(m + 1)
    sign = np.where(m % 2 == 0, 1.0, -1.0)
    p0 = np.stack([a0, sign * a0], 1)
    d01 = np.stack([a1, -sign * a1], 1) - p0
    rel = pts - p0
    length2 = (d01 ** 2).sum(1)
    t = (rel * d01).sum(1) / length2
    cross = np.abs(rel[:, 0] * d01[:, 1] - rel[:, 1] * d01[:, 0]) / np.sqrt(length2)
    off_seg = np.flatnonzero((t < -seg_tol) | (t > 1 + seg_tol) | (cross > seg_tol * ps.R_n))
    off_sq = np.flatnonzero(np.abs(pts).max(1) > ps.R_n)

    counts = {}
    for mi in m.tolist():
        counts[mi] = counts.get(mi, 0) + 1
    identity = counts == ps.M and len(pts) == sum(ps.M.values())
    card = len(pts)
    gamma = math.log(card) / math.log(ps.R_n / r) if card > 0 else -math.inf
    c2 = card / ps.n ** ((ps.s - 1) / ps.theta + 2 - ps.s)
    audit = PackingAudit(dmin, card, gamma, target_gamma(ps.s, ps.theta), r, c2,
                         violations=close, off_segment=off_seg.tolist(),
                         off_square=off_sq.tolist(), cardinality_identity=identity,
                         exact_checked=checked)
    if raise_on_fail and not audit.passed:
        raise AuditFailure(f"packing audit failed at n = {ps.n}: {len(close)} close pairs, "
                           f"{len(off_seg)} off-segment, {len(off_sq)} off-square points", close)
    return audit


def packing_exponent(s: float, theta: float, n_list, variant: str = "plain",
                     c0: Optional[float] = None):
    """Empirical exponents ``log #D / log(R_n / r_n)`` along ``n_list``.

    Returns
    -------
    gammas : list of float
    trend : dict
        Target exponent, monotonicity, and whether every value stays below
        the target.
    """
    n_list = [int(n) for n in n_list]
    if any(b <= a for a, b in zip(n_list, n_list[1:])):
        raise ParameterError("n_list must be strictly increasing")
    gammas, audits = [], []
    for n in n_list:
        audit = verify_packing(build_packing(s, theta, n, c0=c0, variant=variant), exact=False)
        gammas.append(audit.empirical_gamma)
        audits.append(audit)
    target = target_gamma(s, theta)
    trend = {"target_gamma": target, "n": n_list, "gammas": gammas,
             "nondecreasing": all(b >= a for a, b in zip(gammas, gammas[1:])),
             "below_target": all(g < target for g in gammas),
             "gap": target - gammas[-1],
             "all_separated": all(a.passed for a in audits)}
    return gammas, trend


def scan_n0(s: float, theta: float, c0: Optional[float] = None, variant: str = "plain",
            run: int = 10, n_max: int = 100_000) -> int:
    """Smallest n from which the unshrunk N(n) is admissible for ``run``
    consecutive values."""
    _check(s, theta, variant)
    z = _seq(s, variant)
    c0 = default_c0(s) if c0 is None else c0
    streak, start = 0, None
    for n in range(z.m_first + 1, n_max):
        _, r = _scales(z, theta, n)
        N = 2 * int(math.floor(c0 * n ** ((s - 1) / (s * theta)) / 2))
        ok = N >= 2 and all(_constraints(z, n, N, r))
        if ok:
            start = n if streak == 0 else start
            streak += 1
            if streak == run:
                return start
        else:
            streak = 0
    raise InfeasibleError(f"no run of {run} admissible n below {n_max}")


# -- borderline (log-corrected) parameters ----------------------------------------

def phi(t, s):
    """Orlicz function ``t log(t)**(2/s)`` for ``t >= 1``."""
    t = np.asarray(t, dtype=float)
    return t * np.log(t) ** (2 / s)


def phi_inverse(y: float, s: float) -> float:
    """Inverse of :func:`phi` on ``[1, inf)`` by bisection."""
    if y < 0:
        raise ValueError("phi takes values in [0, inf)")
    if y == 0:
        return 1.0
    hi = max(2.0, y)
    while phi(hi, s) < y:
        hi *= 2
    return bisect(lambda t: float(phi(t, s)) - y, 1.0, hi, xtol=1e-14, rtol=4 * np.finfo(float).eps,
                  maxiter=400)


def _mvt_point(z: ZigzagSpec, m: int) -> float:
    """``x`` in ``(m, m+1)`` with ``-a'(x) = eps_m`` for the log-corrected sequence."""
    s = z.s
    target = float(z.eps(m))

    def slope(x):
        lx = math.log(x)
        return (s - 1) * x ** -s / lx ** 2 * (1 + 2 / ((s - 1) * lx))

    # -a'(x) = x**-s log(x)**-2 ((s-1) + 2/log x); decreasing in x
    return bisect(lambda x: slope(x) - target, m, m + 1, xtol=1e-13, maxiter=200)


def borderline_params(s: float, theta: float, n: int, max_iter: int = 200):
    """Largest admissible even N(n) for the log-corrected sequence.

    Both constraints are put in the form ``m + delta_m <= Phi^{-1}(c n^..
    log^..(n) (1 + eta))``, where ``eta`` depends on the same point, so the
    bound is found by fixed-point iteration over ``Phi^{-1}``.  The MVT
    points ``m + delta_m`` are located by bisection.

    Returns
    -------
    N : int
    diagnostics : dict
    """
    _check(s, theta, "log_corrected")
    if n < 2:
        raise InfeasibleError("the log-corrected sequence needs n >= 2")
    z = _seq(s, "log_corrected")
    base = n ** ((s - 1) / (s * theta)) * math.log(n) ** (2 / (s * theta))
    consts = {"segment": ((s - 1) / math.sqrt(2)) ** (1 / s), "cross": (s - 1) ** (1 / s)}
    # -a'(x) = (s-1) x**-s log(x)**-2 (1 + 2/((s-1) log x)); eta is its s-th root correction
    xstar, etas = {}, {}
    for key, c in consts.items():
        x = phi_inverse(c * base, s)
        for _ in range(max_iter):
            eta = (1 + 2 / ((s - 1) * math.log(x))) ** (1 / s) - 1
            x_new = phi_inverse(c * base * (1 + eta), s)
            if abs(x_new - x) <= 1e-13 * x_new:
                x = x_new
                break
            x = x_new
        xstar[key], etas[key] = x, eta

    def largest(key, offset):
        # largest even N with the MVT point of m = n + N - offset at most xstar
        m_hi = int(math.floor(xstar[key])) + 1
        N = 2 * ((m_hi - n + offset) // 2)
        while N >= 2:
            m = n + N - offset
            if m < 2 or _mvt_point(z, m) <= xstar[key]:
                return N
            N -= 2
        return 0

    N_seg = largest("segment", 2)
    N_cross = largest("cross", 3)
    N = min(N_seg, N_cross) if N_seg >= 4 else N_seg
    if N < 2:
        raise InfeasibleError(f"no even N >= 2 is admissible at n = {n}")
    lead = n ** ((s - 1) / (s * theta)) * math.log(n) ** (2 / s * (1 / theta - 1))
    diag = {"n": n, "phi_inverse_segment": xstar["segment"], "phi_inverse_cross": xstar["cross"],
            "eta_n": etas["segment"], "eta_bar_n": etas["cross"], "N_segment": N_seg,
            "N_cross": N_cross,
            "binding": "segment" if N == N_seg else "cross",
            "c_prime": consts["segment"] * (s * theta / (s - 1)) ** (2 / s),
            "c_bar_prime": consts["cross"] * (s * theta / (s - 1)) ** (2 / s),
            "asymptotic_leading": lead}
    return N, diag


def ratio_check(s: float, variant: str = "plain", m_max: int = 2000, level: float = 0.99):
    """Consecutive ratios ``a_{m+1}/a_m``: monotone increase and first index
    beyond ``level``."""
    z = ZigzagSpec(s=s, variant=variant, m_max=m_max)
    m = np.arange(z.m_first, m_max)
    ratio = z.a(m + 1) / z.a(m)
    above = np.flatnonzero(ratio > level)
    first = int(m[above[0]]) if len(above) else None
    tail_ok = first is not None and bool(np.all(ratio[above[0]:] > level))
    return {"monotone": bool(np.all(np.diff(ratio) > 0)), "first_above": first,
            "stays_above": tail_ok, "last_ratio": float(ratio[-1])}
