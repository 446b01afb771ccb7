"""Generalized Laguerre polynomials L_n^(alpha)(x) for integer alpha >= 0.

Values come from the forward three-term recurrence

    (n+1) L_{n+1} = (2n+1+alpha-x) L_n - (n+alpha) L_{n-1},

which is stable in double precision for the regime used here (x up to ~50,
n up to a few thousand).  Roots are isolated with the interlacing property
of consecutive degrees and refined by bisection.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, SingularPointError

#: absolute bisection width for roots
ROOT_WIDTH = 1e-13
#: |L| below this counts as "at a root" everywhere in the package
ROOT_TOL = 1e-11
#: distance (in radians) from a pole of tan treated as singular
TAN_POLE_TOL = 1e-9


@dataclass(frozen=True)
class LaguerreRow:
    """L_0^(alpha)(x) ... L_N^(alpha)(x) for one (alpha, x)."""

    alpha: int
    x: float
    values: np.ndarray

    @property
    def degree_max(self) -> int:
        return len(self.values) - 1


@dataclass(frozen=True)
class RootRecord:
    degree: int
    alpha: int
    root: float
    residual: float


def _check_index(name, value):
    if isinstance(value, bool) or int(value) != value or value < 0:
        raise DomainError(f"{name} must be a non-negative integer, got {value!r}")
    return int(value)


def _check_x(x):
    x = float(x)
    if not math.isfinite(x) or x < 0.0:
        raise DomainError(f"x must be finite and >= 0, got {x!r}")
    return x


def _recurrence(n_max, alpha, x):
    """Rows of L_n^(alpha) at x, shape (n_max+1,) + shape(x)."""
    x = np.asarray(x, dtype=float)
    out = np.empty((n_max + 1,) + x.shape)
    out[0] = 1.0
    if n_max >= 1:
        out[1] = 1.0 + alpha - x
    for n in range(1, n_max):
        out[n + 1] = ((2 * n + 1 + alpha - x) * out[n] - (n + alpha) * out[n - 1]) / (n + 1)
    return out


def laguerre_row(n_max: int, alpha: int, x: float) -> LaguerreRow:
    """Tabulate L_0^(alpha)(x) ... L_{n_max}^(alpha)(x) in a single pass."""
    n_max = _check_index("n_max", n_max)
    alpha = _check_index("alpha", alpha)
    x = _check_x(x)
    values = _recurrence(n_max, alpha, x)
    values.setflags(write=False)
    return LaguerreRow(alpha=alpha, x=x, values=values)


def laguerre_eval(n: int, alpha: int, x: float) -> float:
    """L_n^(alpha)(x); identical bits to ``laguerre_row(n, alpha, x).values[n]``."""
    return float(laguerre_row(n, alpha, x).values[n])


def laguerre_rows(n_max, alpha, xs):
    """Vectorized tabulation over an array of arguments, shape (n_max+1, len(xs))."""
    n_max = _check_index("n_max", n_max)
    alpha = _check_index("alpha", alpha)
    xs = np.asarray(xs, dtype=float)
    if not np.all(np.isfinite(xs)) or np.any(xs < 0):
        raise DomainError("all arguments must be finite and >= 0")
    return _recurrence(n_max, alpha, xs)


def _largest_root_bound(n, alpha):
    # every zero of L_n^(alpha) lies below 2n + alpha + 1 + sqrt((2n+alpha+1)^2 + 1/4 - alpha^2)
    a = 2 * n + alpha + 1
    return a + math.sqrt(a * a + 0.25) + 1.0


def _bisect(n, alpha, lo, hi):
    """Vectorized bisection of L_n^(alpha) on brackets [lo_i, hi_i]."""
    lo = np.array(lo, dtype=float)
    hi = np.array(hi, dtype=float)
    flo = _recurrence(n, alpha, lo)[n]
    fhi = _recurrence(n, alpha, hi)[n]
    if np.any(np.sign(flo) * np.sign(fhi) > 0):
        raise ArithmeticError(f"lost a sign change while isolating roots of L_{n}^({alpha})")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        active = (hi - lo > ROOT_WIDTH) & (mid > lo) & (mid < hi)
        if not active.any():
            break
        fmid = _recurrence(n, alpha, mid)[n]
        left = np.sign(fmid) == np.sign(flo)
        move_lo = active & left
        move_hi = active & ~left
        lo = np.where(move_lo, mid, lo)
        flo = np.where(move_lo, fmid, flo)
        hi = np.where(move_hi, mid, hi)
        fhi = np.where(move_hi, fmid, fhi)
    mid = 0.5 * (lo + hi)
    fmid = _recurrence(n, alpha, mid)[n]
    cand = np.stack([lo, mid, hi])
    vals = np.abs(np.stack([flo, fmid, fhi]))
    best = np.argmin(vals, axis=0)
    idx = np.arange(len(lo))
    return cand[best, idx], vals[best, idx]


def root_chain(n_max, alpha):
    """All roots of L_1^(alpha) ... L_{n_max}^(alpha) on (0, inf).

    Returns a list whose entry ``j-1`` holds ``(roots, residuals)`` for degree j.
    Degree j's roots are bracketed by the roots of degree j-1 (interlacing).
    """
    n_max = _check_index("n_max", n_max)
    alpha = _check_index("alpha", alpha)
    chain = []
    prev = np.empty(0)
    for j in range(1, n_max + 1):
        edges = np.concatenate([[0.0], prev, [_largest_root_bound(j, alpha)]])
        roots, res = _bisect(j, alpha, edges[:-1], edges[1:])
        chain.append((roots, res))
        prev = roots
    return chain


def _check_range(lo, hi):
    lo, hi = float(lo), float(hi)
    if not (math.isfinite(lo) and math.isfinite(hi)) or lo < 0 or not lo < hi:
        raise DomainError(f"invalid range ({lo!r}, {hi!r}]: need 0 <= lo < hi")
    return lo, hi


def laguerre_roots(n: int, alpha: int, interval: tuple[float, float]) -> list[RootRecord]:
    """Roots of L_n^(alpha) in the half-open interval (lo, hi], increasing."""
    n = _check_index("n", n)
    if n < 1:
        raise DomainError("degree must be >= 1")
    lo, hi = _check_range(*interval)
    roots, res = root_chain(n, alpha)[-1]
    return [
        RootRecord(degree=n, alpha=int(alpha), root=float(r), residual=float(e))
        for r, e in zip(roots, res)
        if lo < r <= hi
    ]


def _tan_argument(mu, j, eta_bar):
    return 2.0 * np.sqrt((mu + j) * eta_bar**2) - math.pi / 4


def _tan_pole_distance(arg):
    r = np.mod(arg - math.pi / 2, math.pi)
    return np.minimum(r, math.pi - r)


def laguerre_asymptotic_ratio_factor(mu: int, j: float, eta_bar: float) -> float:
    """Large-degree surrogate [eta_bar / tan(2 sqrt((mu+j) eta_bar^2) - pi/4)]^2.

    Approximates (mu+j+1) [L_{mu+j}^(0) / L_{mu+j}^(1)]^2 at x = eta_bar^2.
    ``j`` may be non-integer for probing the oscillation.
    """
    if mu + j < 1:
        raise DomainError(f"need mu + j >= 1, got {mu + j!r}")
    if not eta_bar > 0:
        raise DomainError(f"eta_bar must be > 0, got {eta_bar!r}")
    arg = float(_tan_argument(mu, j, eta_bar))
    if _tan_pole_distance(arg) < TAN_POLE_TOL:
        raise SingularPointError(f"tan argument {arg!r} is at a pole of tan", arg)
    t = math.tan(arg)
    if t == 0.0:
        return math.inf
    return (eta_bar / t) ** 2


def asymptotic_ratio_factors(mu, js, eta_bar):
    """Array form of :func:`laguerre_asymptotic_ratio_factor`; NaN at tan poles."""
    js = np.asarray(js, dtype=float)
    arg = _tan_argument(mu, js, eta_bar)
    with np.errstate(divide="ignore"):
        out = (eta_bar / np.tan(arg)) ** 2
    out[_tan_pole_distance(arg) < TAN_POLE_TOL] = np.nan
    return out
