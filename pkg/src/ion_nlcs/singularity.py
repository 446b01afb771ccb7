"""Atlas of pathological Lamb-Dicke values and pole-series diagnostics.

A root of L_j^(0)(eta2) is a *zero*: it kills c_{j+1} and everything after
it.  A root of L_j^(1)(eta2) is a *pole*: c_{j+1} and its successors blow up,
and the normalization series has to be re-examined with a ratio test.
"""
from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

from .errors import DomainError, PreconditionError
from .laguerre import (
    ROOT_TOL,
    _check_range,
    asymptotic_ratio_factors,
    laguerre_rows,
    root_chain,
)

DEFAULT_RANGE = (0.0, 10.0)
DEFAULT_MARGIN = 1e-6


@dataclass(frozen=True)
class AtlasEntry:
    eta2_root: float
    degree: int
    alpha: int

    @property
    def kind(self) -> str:
        return "Zero" if self.alpha == 0 else "Pole"

    @property
    def first_affected_index(self) -> int:
        # beta for zeros, mu for poles
        return self.degree + 1

    def to_json(self):
        return {
            "eta2_root": self.eta2_root,
            "degree": self.degree,
            "alpha": self.alpha,
            "kind": self.kind,
            "first_affected_index": self.first_affected_index,
        }


@dataclass(frozen=True)
class SingularityAtlas:
    degree_max: int
    interval: tuple
    entries: tuple

    @property
    def roots(self):
        return [e.eta2_root for e in self.entries]

    def zeros(self):
        return [e for e in self.entries if e.kind == "Zero"]

    def poles(self):
        return [e for e in self.entries if e.kind == "Pole"]

    def distance(self, eta2):
        """Distance from eta2 to the nearest atlas root (inf if the atlas is empty)."""
        if not self.entries:
            return math.inf
        roots = np.asarray(self.roots)
        return float(np.min(np.abs(roots - eta2)))

    def to_json(self):
        return {
            "degree_max": self.degree_max,
            "range": list(self.interval),
            "entries": [e.to_json() for e in self.entries],
        }


def build_atlas(degree_max: int, interval=DEFAULT_RANGE) -> SingularityAtlas:
    """All roots of L_j^(0) and L_j^(1), 1 <= j <= degree_max, inside (lo, hi]."""
    if degree_max < 1:
        raise DomainError("degree_max must be >= 1")
    lo, hi = _check_range(*interval)
    entries = []
    for alpha in (0, 1):
        for j, (roots, _) in enumerate(root_chain(degree_max, alpha), start=1):
            entries.extend(AtlasEntry(float(r), j, alpha) for r in roots if lo < r <= hi)
    entries.sort(key=lambda e: (e.eta2_root, e.alpha, e.degree))
    deduped = []
    for e in entries:
        if deduped and deduped[-1].alpha == e.alpha and abs(deduped[-1].eta2_root - e.eta2_root) <= 1e-12:
            continue
        deduped.append(e)
    return SingularityAtlas(int(degree_max), (lo, hi), tuple(deduped))


@dataclass(frozen=True)
class EtaClass:
    """Result of classifying one eta2 against an atlas."""

    kind: str  # Safe | AtZero | AtPole
    distance: float
    offset: float = 0.0  # signed eta2 - nearest root
    index: int | None = None
    nearest: AtlasEntry | None = None

    def __str__(self):
        if self.kind == "Safe":
            return f"Safe({self.distance:.6g})"
        return f"{self.kind}({self.index})"


def classify_eta2(atlas: SingularityAtlas, eta2: float, margin: float = DEFAULT_MARGIN) -> EtaClass:
    lo, hi = atlas.interval
    if not lo < eta2 <= hi:
        raise DomainError(f"eta2={eta2!r} outside atlas range ({lo}, {hi}]")
    if not atlas.entries:
        return EtaClass("Safe", math.inf, math.inf)
    roots = atlas.roots
    i = bisect.bisect_left(roots, eta2)
    # all entries tied for nearest, lowest first-affected index wins
    candidates = [e for e in atlas.entries[max(0, i - 2): i + 2]]
    best = min(candidates, key=lambda e: (abs(e.eta2_root - eta2), e.first_affected_index))
    offset = eta2 - best.eta2_root
    if abs(offset) <= margin:
        kind = "AtZero" if best.kind == "Zero" else "AtPole"
        return EtaClass(kind, abs(offset), offset, best.first_affected_index, best)
    return EtaClass("Safe", abs(offset), offset, None, best)


def nearest_root(degree, alpha, eta2):
    """Nearest root of L_degree^(alpha) to eta2, or None for degree 0."""
    if degree < 1:
        return None
    roots, _ = root_chain(degree, alpha)[-1]
    return float(roots[np.argmin(np.abs(roots - eta2))])


def require_root(degree, alpha, eta2, band):
    """Raise PreconditionError unless eta2 lies within ``band`` of a root of L_degree^(alpha)."""
    r = nearest_root(degree, alpha, eta2)
    if r is None:
        raise PreconditionError(
            f"L_{degree}^({alpha}) is constant and has no roots; eta2={eta2!r} cannot be singular"
        )
    if abs(r - eta2) > band:
        raise PreconditionError(
            f"eta2={eta2!r} is not a root of L_{degree}^({alpha}); nearest root is {r!r}"
        )
    return r


@dataclass
class PoleDiagnostics:
    mu: int
    eta2_bar: float
    xi_abs: float
    j_grid: np.ndarray
    exact_ratios: np.ndarray
    asymptotic_ratios: np.ndarray
    partial_log_sums: np.ndarray
    verdict: str
    windows: list = field(default_factory=list)

    def csv_rows(self):
        for j, e, a, s in zip(self.j_grid, self.exact_ratios, self.asymptotic_ratios, self.partial_log_sums):
            yield (int(j), float(e), float(a), float(s))

    def summary(self):
        return {
            "mu": self.mu,
            "eta2_bar": self.eta2_bar,
            "xi_abs": self.xi_abs,
            "j_max": int(self.j_grid[-1]),
            "verdict": self.verdict,
            "windows": self.windows,
        }


def window_starts(j_max):
    J, out = 64, []
    while J <= j_max / 2:
        out.append(J)
        J *= 2
    return out


def window_oscillation(values):
    """(sup - inf) / median over the finite entries of one window."""
    v = values[np.isfinite(values)]
    if v.size == 0:
        return math.inf
    med = float(np.median(v))
    spread = float(v.max() - v.min())
    if med == 0.0:
        return math.inf if spread > 0 else 0.0
    return spread / med


def pole_ratio_sequence(mu: int, eta2_bar: float, xi_abs: float, j_max: int,
                        margin: float = DEFAULT_MARGIN) -> PoleDiagnostics:
    """Ratio test on S(mu) = sum_j s_j at a pole of c_mu.

    s_{j+1}/s_j = |xi|^2 (mu+j+1) [L_{mu+j}^(0) / L_{mu+j}^(1)]^2, compared
    against the large-degree tan surrogate.  Verdict is NonCauchy when every
    doubling window [J, 2J], J = 64, 128, ..., j_max/2, has spread above a
    tenth of its median.
    """
    if mu < 2:
        raise PreconditionError("a pole needs mu >= 2 (L_0^(1) has no roots)")
    if j_max < 128:
        raise DomainError("j_max must be >= 128 to form at least one window")
    if not xi_abs > 0:
        raise DomainError("xi_abs must be > 0")
    require_root(mu - 1, 1, eta2_bar, margin)

    j = np.arange(j_max + 1)
    lag0 = laguerre_rows(mu + j_max, 0, eta2_bar)[mu:]
    lag1 = laguerre_rows(mu + j_max, 1, eta2_bar)[mu:]
    with np.errstate(divide="ignore"):
        exact = xi_abs**2 * (mu + j + 1) * (lag0 / lag1) ** 2
    exact[np.abs(lag1) < ROOT_TOL] = np.inf
    asym = xi_abs**2 * asymptotic_ratio_factors(mu, j, math.sqrt(eta2_bar))

    log_s0 = 2 * mu * math.log(xi_abs) - gammaln(mu + 1)
    with np.errstate(divide="ignore"):
        log_s = log_s0 + np.concatenate([[0.0], np.cumsum(np.log(exact[:-1]))])
    partial = np.logaddexp.accumulate(log_s)

    windows = []
    non_cauchy = True
    for J in window_starts(j_max):
        osc = window_oscillation(exact[J: 2 * J + 1])
        windows.append({"J": J, "oscillation": osc})
        non_cauchy &= osc > 0.1
    return PoleDiagnostics(
        mu=mu,
        eta2_bar=float(eta2_bar),
        xi_abs=float(xi_abs),
        j_grid=j,
        exact_ratios=exact,
        asymptotic_ratios=asym,
        partial_log_sums=partial,
        verdict="NonCauchy" if non_cauchy else "Convergent",
        windows=windows,
    )
