"""Function families, uniform-grid sampling, oscillation and p-energy.

The Weierstrass and Takagi evaluators track the phase ``b**n * t`` modulo the
period in double-double arithmetic whenever ``b`` is an integer, so the value
returned at a double ``t`` is accurate to the truncation tolerance even when
``b**n * t`` is far beyond 2**53.  Non-integer ``b`` falls back to plain
double products (phase error grows like ``(a*b)**n * eps``).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Optional

import numpy as np

from .errors import EmptyIntervalError, InvalidSpecError

_SPLITTER = 134217729.0  # 2**27 + 1
_TWO_PI = (6.283185307179586, 2.4492935982947064e-16)


def sawtooth(t):
    """1-periodic tent: ``D(t) = t`` on [0, 1/2], ``1 - t`` on [1/2, 1]."""
    d = np.mod(t, 1.0)
    return np.minimum(d, 1.0 - d)


# -- double-double helpers -------------------------------------------------

def _two_sum(a, b):
    s = a + b
    bb = s - a
    return s, (a - (s - bb)) + (b - bb)


def _split(a):
    c = _SPLITTER * a
    hi = c - (c - a)
    return hi, a - hi


def _two_prod(a, b):
    p = a * b
    ah, al = _split(a)
    bh, bl = _split(b)
    return p, ((ah * bh - p) + ah * bl + al * bh) + al * bl


def _reduce(hi, lo, period):
    """Reduce the double-double ``hi + lo`` into [0, period)."""
    p_hi, p_lo = period
    k = np.floor(hi / p_hi)
    q, qe = _two_prod(k, p_hi)
    s, se = _two_sum(hi, -q)
    rest = se + lo - qe - k * p_lo
    hi, lo = _two_sum(s, rest)
    # one correction step is enough: |hi| < period after the subtraction
    neg = hi < 0
    if np.any(neg):
        h2, l2 = _two_sum(hi + p_hi, lo + p_lo)
        hi = np.where(neg, h2, hi)
        lo = np.where(neg, l2, lo)
    big = hi >= p_hi
    if np.any(big):
        h2, l2 = _two_sum(hi - p_hi, lo - p_lo)
        hi = np.where(big, h2, hi)
        lo = np.where(big, l2, lo)
    return hi, lo


def _phases(t, b, period, n_terms, t_lo=None):
    """Yield ``(hi, lo)`` of ``b**n * t mod period`` for n = 0..n_terms-1.

    ``t_lo`` optionally extends ``t`` to the double-double ``t + t_lo``; for
    a power-of-two ``b`` and unit period those phases come centred in
    [-1/2, 1/2].
    """
    t = np.asarray(t, dtype=float)
    integer_b = float(b).is_integer() and abs(b) < 2.0**26
    if t_lo is not None:
        if not integer_b:
            raise ValueError("offset evaluation needs an integer b")
        lo = np.broadcast_to(np.asarray(t_lo, dtype=float), t.shape)
        if period[1] == 0.0 and math.log2(b).is_integer():
            # doubling both parts is exact; renormalise, then drop whole
            # periods with rint so the subtraction stays exact (phases here
            # are centred in [-p/2, p/2] rather than in [0, p))
            p = period[0]
            hi, lo = _two_sum(t - p * np.rint(t / p), lo)
            for _ in range(n_terms):
                hi = hi - p * np.rint(hi / p)
                yield hi, lo
                hi, lo = _two_sum(hi * b, lo * b)
            return
        hi, lo = _reduce(t, lo, period)
        bf = float(b)
        for _ in range(n_terms):
            yield hi, lo
            p, e = _two_prod(hi, bf)
            hi, lo = _reduce(p, e + lo * bf, period)
        return
    if period[1] == 0.0 and integer_b and math.log2(b).is_integer():
        # multiplication by a power of two is exact
        x = np.mod(t, period[0])
        zero = np.zeros_like(x)
        for _ in range(n_terms):
            yield x, zero
            x = np.mod(x * b, period[0])
        return
    if integer_b:
        hi, lo = _reduce(t, np.zeros_like(t), period)
        bf = float(b)
        for _ in range(n_terms):
            yield hi, lo
            p, e = _two_prod(hi, bf)
            hi, lo = _reduce(p, e + lo * bf, period)
        return
    for n in range(n_terms):
        x = np.mod(t * float(b) ** n, period[0])
        yield x, np.zeros_like(x)


# -- function families -----------------------------------------------------

def _check_ab(a, b, tol, allow_ab_one=False):
    if not 0.0 < a < 1.0:
        raise InvalidSpecError(f"a must lie in (0, 1), got {a}")
    if not (b > 1.0 / a or (allow_ab_one and a * b == 1.0)):
        raise InvalidSpecError(f"b must exceed 1/a = {1.0 / a:.6g}, got {b}")
    if not tol > 0.0:
        raise InvalidSpecError(f"truncation_tol must be positive, got {tol}")


def truncation_terms(a: float, tol: float) -> int:
    """Number of terms n = 0..N so that the tail a**(N+1)/(1-a) <= tol."""
    n = 0
    while a ** (n + 1) / (1.0 - a) > tol:
        n += 1
    return n + 1


@dataclass(frozen=True)
class WeierstrassSpec:
    a: float
    b: float
    truncation_tol: float = 1e-12

    def __post_init__(self):
        _check_ab(self.a, self.b, self.truncation_tol)

    @property
    def alpha(self) -> float:
        return -math.log(self.a) / math.log(self.b)

    @property
    def n_terms(self) -> int:
        return truncation_terms(self.a, self.truncation_tol)

    def __call__(self, t):
        return eval_weierstrass(self, t)

    def at_offset(self, anchor, offset, offset_lo=None):
        """Value at ``anchor + offset (+ offset_lo)``, summed without rounding
        the small parts into the anchor."""
        return eval_weierstrass(self, *_anchored(anchor, offset, offset_lo))

    def describe(self) -> dict:
        return {"family": "weierstrass", "a": self.a, "b": self.b,
                "truncation_tol": self.truncation_tol}


@dataclass(frozen=True)
class TakagiSpec:
    """Takagi series ``sum a**n D(b**n t)``; ``a b = 1`` (the classical
    function) is admitted as well."""

    a: float
    b: float
    truncation_tol: float = 1e-12

    def __post_init__(self):
        _check_ab(self.a, self.b, self.truncation_tol, allow_ab_one=True)

    @property
    def alpha(self) -> float:
        return -math.log(self.a) / math.log(self.b)

    @property
    def n_terms(self) -> int:
        return truncation_terms(self.a, self.truncation_tol)

    def __call__(self, t):
        return eval_takagi(self, t)

    def at_offset(self, anchor, offset, offset_lo=None):
        """Value at ``anchor + offset (+ offset_lo)``, summed without rounding
        the small parts into the anchor."""
        return eval_takagi(self, *_anchored(anchor, offset, offset_lo))

    def describe(self) -> dict:
        return {"family": "takagi", "a": self.a, "b": self.b,
                "truncation_tol": self.truncation_tol}


def _anchored(anchor, offset, offset_lo=None):
    offset = np.asarray(offset, dtype=float)
    if offset_lo is not None:
        offset, extra = _two_sum(*np.broadcast_arrays(offset, np.asarray(offset_lo, float)))
    hi, lo = _two_sum(np.broadcast_to(np.asarray(anchor, dtype=float), offset.shape), offset)
    if offset_lo is not None:
        hi, lo = _two_sum(hi, lo + extra)
    return hi, None, lo


def _as_output(t, total):
    return float(total) if np.ndim(t) == 0 else total


def eval_weierstrass(spec: WeierstrassSpec, t, n_terms: Optional[int] = None,
                     t_lo=None):
    """Truncated ``sum a**n cos(b**n t)``; scalar in, scalar out.

    ``t_lo`` adds a low-order part to ``t`` (integer ``b`` only).
    """
    n_terms = spec.n_terms if n_terms is None else n_terms
    t_arr = np.asarray(t, dtype=float)
    total = np.zeros_like(t_arr)
    coef = 1.0
    for hi, lo in _phases(t_arr, spec.b, _TWO_PI, n_terms, t_lo):
        total += coef * (np.cos(hi) - np.sin(hi) * lo)
        coef *= spec.a
    return _as_output(t, total)


def eval_takagi(spec: TakagiSpec, t, n_terms: Optional[int] = None, t_lo=None):
    """Truncated ``sum a**n D(b**n t)``.

    For ``b == 2`` and dyadic ``t = k / 2**j`` every term with n >= j is an
    exact zero, so the result is the exact finite sum.  ``t_lo`` adds a
    low-order part to ``t`` (integer ``b`` only).
    """
    n_terms = spec.n_terms if n_terms is None else n_terms
    t_arr = np.asarray(t, dtype=float)
    total = np.zeros_like(t_arr)
    coef = 1.0
    for hi, lo in _phases(t_arr, spec.b, (1.0, 0.0), n_terms, t_lo):
        x = hi + lo
        # centred phases may be negative; the tent is |x| on [-1/2, 1/2]
        total += coef * np.where(x <= 0.5, np.abs(x), (1.0 - hi) - lo)
        coef *= spec.a
    return _as_output(t, total)


# -- zigzag ---------------------------------------------------------------

@dataclass(frozen=True)
class ZigzagSpec:
    """Vertices ``z_m = (a_m, (-1)**m a_m)`` with a_m = m**(1-s) (plain) or
    m**(1-s) / log(m)**2 (log_corrected, m >= 2)."""

    s: float
    variant: str = "plain"
    m_max: int = 2000

    def __post_init__(self):
        if not self.s > 2:
            raise InvalidSpecError(f"s must exceed 2, got {self.s}")
        if self.variant not in ("plain", "log_corrected"):
            raise InvalidSpecError(f"unknown zigzag variant {self.variant!r}")
        if self.m_max < self.m_first + 1:
            raise InvalidSpecError(f"m_max must be at least {self.m_first + 1}")

    @property
    def m_first(self) -> int:
        return 1 if self.variant == "plain" else 2

    def a(self, m):
        m = np.asarray(m, dtype=float)
        out = m ** (1.0 - self.s)
        if self.variant == "log_corrected":
            out = out / np.log(m) ** 2
        return out

    def eps(self, m):
        """``a_m - a_{m+1}`` computed without cancellation."""
        m = np.asarray(m, dtype=float)
        log_ratio = (self.s - 1.0) * np.log1p(-1.0 / (m + 1.0))
        if self.variant == "log_corrected":
            log_ratio = log_ratio - 2.0 * np.log1p(np.log1p(1.0 / m) / np.log(m))
        return -self.a(m) * np.expm1(log_ratio)

    def vertices(self):
        m = np.arange(self.m_first, self.m_max + 1)
        a = self.a(m)
        return m, a, np.where(m % 2 == 0, a, -a)

    def __call__(self, x):
        return build_zigzag(self)(x)

    def describe(self) -> dict:
        return {"family": "zigzag", "s": self.s, "variant": self.variant,
                "m_max": self.m_max}


class PiecewiseLinearFunction:
    """Linear interpolation through breakpoints with increasing x.

    On each segment the value is ``y_right - slope * (x_right - x)``, so the
    stored ordinates are reproduced exactly at every breakpoint.
    """

    def __init__(self, xs, ys):
        xs = np.array(xs, dtype=float)
        ys = np.array(ys, dtype=float)
        if xs.ndim != 1 or xs.shape != ys.shape or len(xs) < 2:
            raise ValueError("need at least two breakpoints with matching x and y")
        if np.any(np.diff(xs) <= 0):
            raise ValueError("breakpoint x-coordinates must be strictly increasing")
        self.xs = xs
        self.ys = ys
        self.slopes = np.diff(ys) / np.diff(xs)
        self.xs.flags.writeable = False
        self.ys.flags.writeable = False

    @property
    def breakpoints(self):
        return list(zip(self.xs.tolist(), self.ys.tolist()))

    @property
    def domain(self):
        return float(self.xs[0]), float(self.xs[-1])

    def __call__(self, x):
        x_arr = np.asarray(x, dtype=float)
        if np.any((x_arr < self.xs[0]) | (x_arr > self.xs[-1])):
            raise ValueError("evaluation point outside the breakpoint range")
        j = np.searchsorted(self.xs, x_arr, side="left")
        j = np.maximum(j, 1)
        out = self.ys[j] - self.slopes[j - 1] * (self.xs[j] - x_arr)
        out = np.where(x_arr == self.xs[0], self.ys[0], out)
        return float(out) if np.ndim(x) == 0 else out


def build_zigzag(spec: ZigzagSpec) -> PiecewiseLinearFunction:
    """Breakpoints (0, 0), z_{m_max}, ..., z_{m_first} in increasing x."""
    _, a, y = spec.vertices()
    xs = np.concatenate([[0.0], a[::-1]])
    ys = np.concatenate([[0.0], y[::-1]])
    return PiecewiseLinearFunction(xs, ys)


# -- sampled functions -------------------------------------------------------

@dataclass(frozen=True)
class SampledFunction:
    """Samples ``values[i] = f(lo + i * step)`` on a uniform grid."""

    lo: float
    hi: float
    step: float
    values: np.ndarray
    meta: dict = field(default_factory=dict)
    generator: Optional[Callable] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if not self.step > 0:
            raise ValueError("step must be positive")
        if not self.lo < self.hi:
            raise ValueError("need lo < hi")
        values = np.array(self.values, dtype=float)
        if values.ndim != 1:
            raise ValueError("values must be one-dimensional")
        expected = int(round((self.hi - self.lo) / self.step)) + 1
        if len(values) != expected:
            raise ValueError(f"expected {expected} samples for the grid, got {len(values)}")
        if not np.all(np.isfinite(values)):
            raise ValueError("values must be finite")
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    @property
    def n(self) -> int:
        return len(self.values)

    @cached_property
    def t(self) -> np.ndarray:
        t = self.lo + self.step * np.arange(self.n)
        t.flags.writeable = False
        return t

    def index_range(self, a: float, b: float):
        """Slice bounds ``(i0, i1)`` of grid points with a <= t <= b."""
        return (int(np.searchsorted(self.t, a, side="left")),
                int(np.searchsorted(self.t, b, side="right")))

    def nearest_index(self, x: float) -> int:
        return int(np.clip(np.rint((x - self.lo) / self.step), 0, self.n - 1))

    def replace_values(self, values, meta=None, generator=None) -> "SampledFunction":
        return SampledFunction(self.lo, self.hi, self.step, values,
                               dict(self.meta if meta is None else meta), generator)

    def same_grid(self, other: "SampledFunction") -> bool:
        return (self.lo == other.lo and self.hi == other.hi
                and self.step == other.step and self.n == other.n)


def sample_function(generator: Callable, lo: float, hi: float, n_samples: int,
                    meta: Optional[dict] = None) -> SampledFunction:
    if not lo < hi:
        raise ValueError("need lo < hi")
    if n_samples < 2:
        raise ValueError("n_samples must be at least 2")
    step = (hi - lo) / (n_samples - 1)
    t = lo + step * np.arange(n_samples)
    values = np.asarray(generator(t), dtype=float)
    if values.shape != t.shape:
        values = np.broadcast_to(values, t.shape)
    info = {}
    if hasattr(generator, "describe"):
        info.update(generator.describe())
    else:
        info["family"] = getattr(generator, "__name__", type(generator).__name__)
    info.update(meta or {})
    return SampledFunction(lo, hi, step, values, info, generator)


def oscillation(f: SampledFunction, interval) -> float:
    """Max minus min of the samples whose grid point lies in ``interval``."""
    a, b = interval
    i0, i1 = f.index_range(a, b)
    if i1 <= i0:
        raise EmptyIntervalError(f"no grid point in [{a}, {b}]")
    seg = f.values[i0:i1]
    return float(seg.max() - seg.min())


# -- Hölder witnesses --------------------------------------------------------

@dataclass(frozen=True)
class HolderWitness:
    """Upper Hölder constant and lower oscillation constant for exponent alpha."""

    alpha: float
    C_upper: float
    c_lower: float
    r0: float

    def __post_init__(self):
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must lie in (0, 1)")
        if not (self.C_upper > 0 and self.c_lower > 0 and self.r0 > 0):
            raise ValueError("witness constants must be positive")
        if self.c_lower > self.C_upper:
            raise ValueError("c_lower cannot exceed C_upper")


def measure_holder_witness(generator: Callable, alpha: float, lo: float = 0.0,
                           hi: float = 1.0, r0: float = 0.1, min_length: float = 1e-9,
                           n_pairs: int = 200_000, n_intervals: int = 20_000,
                           resolution: int = 129, seed: int = 0) -> HolderWitness:
    """Empirical witness: C from random pairs, c from random intervals.

    Lags and interval lengths are log-uniform on [min_length, r0] (pairs also
    up to the full domain).  Both constants are finite-sample estimates: C
    from below, c from above.
    """
    rng = np.random.default_rng(seed)
    span = hi - lo
    lag = np.exp(rng.uniform(np.log(min_length), np.log(span), n_pairs))
    s = lo + rng.uniform(0, 1, n_pairs) * (span - lag)
    diff = np.abs(generator(s + lag) - generator(s))
    C = float(np.max(diff / lag ** alpha))

    length = np.exp(rng.uniform(np.log(min_length), np.log(min(r0, span)), n_intervals))
    start = lo + rng.uniform(0, 1, n_intervals) * (span - length)
    u = np.linspace(0.0, 1.0, resolution)
    c = np.inf
    for chunk in np.array_split(np.arange(n_intervals), max(1, n_intervals // 2000)):
        pts = start[chunk, None] + length[chunk, None] * u[None, :]
        vals = generator(pts)
        osc = vals.max(axis=1) - vals.min(axis=1)
        c = min(c, float(np.min(osc / length[chunk] ** alpha)))
    return HolderWitness(alpha, C, min(c, C), r0)


# -- p-energy of the zigzag ------------------------------------------------------

@dataclass
class EnergyResult:
    m: np.ndarray
    partial_sums: np.ndarray
    verdict: str
    tail_exponent: float
    log_exponent: float

    def __iter__(self):
        yield self.partial_sums
        yield self.verdict


def energy_terms(z: ZigzagSpec, q: float, m_max: int):
    m = np.arange(z.m_first, m_max + 1, dtype=float)
    a0 = z.a(m)
    a1 = z.a(m + 1)
    return m, (a0 + a1) ** q / z.eps(m) ** (q - 1.0)


def p_energy(z: ZigzagSpec, q: float, m_max: Optional[int] = None,
             margin: float = 0.1, log_margin: float = 0.25) -> EnergyResult:
    """Partial sums of ``sum (a_m + a_{m+1})**q / (a_m - a_{m+1})**(q-1)``.

    The verdict compares the log-log decay exponent of the terms over the
    last decade against -1.  Inside ``margin`` of -1 it falls back to the
    exponent of ``m * term`` against ``log m`` (Bertrand's scale), again
    compared with -1 within ``log_margin``.
    """
    if q < 1:
        raise ValueError("q must be at least 1")
    m_max = z.m_max if m_max is None else m_max
    m, terms = energy_terms(z, q, m_max)
    partial = np.cumsum(terms)
    tail = m >= max(m_max / 10.0, z.m_first + 2)
    pick = np.unique(np.geomspace(np.flatnonzero(tail)[0] + 1, len(m), 200).astype(int)) - 1
    lm, lt = np.log(m[pick]), np.log(terms[pick])
    beta = float(np.polyfit(lm, lt, 1)[0])
    kappa = float(np.polyfit(np.log(lm), lt + lm, 1)[0])
    if beta < -1.0 - margin:
        verdict = "converging"
    elif beta > -1.0 + margin:
        verdict = "diverging"
    elif kappa < -1.0 - log_margin:
        verdict = "converging"
    elif kappa > -1.0 + log_margin:
        verdict = "diverging"
    else:
        verdict = "inconclusive"
    return EnergyResult(m, partial, verdict, beta, kappa)


def random_staircase(rng: np.random.Generator, n_samples: int = 4097,
                     n_steps: Optional[int] = None) -> SampledFunction:
    """Nondecreasing step function on [0, 1] with random jump sites and sizes."""
    n_steps = int(rng.integers(1, 50)) if n_steps is None else n_steps
    sites = np.sort(rng.uniform(0.0, 1.0, n_steps))
    jumps = rng.exponential(1.0, n_steps) * rng.choice([0.01, 1.0, 100.0])

    def stairs(t):
        return np.cumsum(np.concatenate([[0.0], jumps]))[np.searchsorted(sites, t, side="right")]

    return sample_function(stairs, 0.0, 1.0, n_samples, {"family": "staircase"})
