"""Nonlinear coherent states of the trapped ion.

Coefficients are kept as a unit phase plus a log-magnitude, because near a
pole |c_n| easily spans hundreds of decades.  Probabilities are materialized
only after subtracting the running maximum.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln, logsumexp

from . import fock_ops
from .errors import DomainError, PreconditionError
from .fock_ops import Flag, PhysicalParams, build_annihilation, build_F0, nonlinearity_profile
from .laguerre import ROOT_TOL, laguerre_rows
from .singularity import nearest_root, pole_ratio_sequence, require_root, window_oscillation

DEFAULT_TOL = 1e-15
#: half-width in eta2 of the band where the exact-root code path takes over
ROOT_BAND = 1e-9
N_START = 64
N_LIMIT = 1 << 16
POLE_JMAX = 10_000


@dataclass(frozen=True)
class Classification:
    kind: str
    index: int | None = None

    def __str__(self):
        return self.kind if self.index is None else f"{self.kind}({self.index})"


REGULAR = Classification("Regular")
UNDEFINED = Classification("Undefined")


def _norm_log(log_mags):
    if not np.isfinite(log_mags).any():
        return 0.0
    return -0.5 * float(logsumexp(2 * log_mags))


@dataclass(frozen=True)
class NlcsState:
    """Fock expansion of a (possibly sector) nonlinear coherent state.

    ``phases[n] * exp(log_mags[n])`` is the unnormalized c_n; vanishing
    coefficients carry ``log_mags[n] = -inf`` and phase 0.
    """

    k: int
    sector: object  # ell, or "composite"
    xi: complex
    eta2: float
    phases: np.ndarray
    log_mags: np.ndarray
    classification: Classification
    tail_bound: float = 0.0
    diagnostics: object = None
    norm_log: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "norm_log", _norm_log(self.log_mags))
        self.phases.setflags(write=False)
        self.log_mags.setflags(write=False)

    @property
    def n_max(self) -> int:
        return len(self.log_mags) - 1

    def probabilities(self):
        """p_n = |c_n N|^2, summing to one."""
        with np.errstate(under="ignore"):
            return np.exp(2 * (self.log_mags + self.norm_log))

    def amplitudes(self, dim=None):
        """Normalized complex coefficient vector, zero-padded or cut to ``dim``."""
        with np.errstate(under="ignore"):
            v = self.phases * np.exp(self.log_mags + self.norm_log)
        if dim is None:
            return v
        out = np.zeros(dim, dtype=complex)
        m = min(dim, len(v))
        out[:m] = v[:m]
        return out

    def to_json(self, residuals=None):
        p = self.probabilities()
        return {
            "k": self.k,
            "ell": self.sector,
            "xi": [self.xi.real, self.xi.imag],
            "eta2": self.eta2,
            "classification": str(self.classification),
            "coeffs": [
                {"n": n, "p_n": float(p[n]), "phase": [float(z.real), float(z.imag)]}
                for n, z in enumerate(self.phases)
            ],
            "norm_log": self.norm_log,
            "tail_bound": self.tail_bound,
            "residuals": residuals or {},
        }


def xi_from_params(params: PhysicalParams) -> complex:
    """Eigenvalue xi_k = -(-i/eta)^k E0/E1 fixed by the laser settings."""
    return -((-1j / params.eta) ** params.k) * params.e0_over_e1


def _walk(profile, xi, start, stop, log_start=0.0, phase_start=1.0 + 0j):
    """Chain c_{m+k} = c_m xi sqrt(m!/(m+k)!) / f(m) from m = start up to index stop.

    Stops early at the first flagged f(m).  Returns
    ``(indices, phases, log_mags, event)`` with event None, ("zero", m+k)
    or ("pole", m+k).
    """
    k = profile.k
    m = np.arange(start, stop - k + 1, k)
    event = None
    bad = profile.first_flag(start, stop - k + 1, k)
    if bad is not None:
        kind = "zero" if profile.flags[bad] is Flag.INFINITE else "pole"
        event = (kind, bad + k)
        m = m[m < bad]
    f = np.asarray(profile.f_values)[m]
    xi_unit = xi / abs(xi) if xi != 0 else 0j
    with np.errstate(divide="ignore"):
        steps = math.log(abs(xi)) if xi != 0 else -np.inf
        d_log = steps + 0.5 * (gammaln(m + 1) - gammaln(m + k + 1)) - np.log(np.abs(f))
    d_phase = xi_unit * np.sign(f)
    log_mags = log_start + np.concatenate([[0.0], np.cumsum(d_log)])
    phases = phase_start * np.concatenate([[1.0 + 0j], np.cumprod(d_phase)])
    indices = start + k * np.arange(len(log_mags))
    return indices, phases, log_mags, event


def _dense(indices, phases, log_mags, size):
    ph = np.zeros(size, dtype=complex)
    lm = np.full(size, -np.inf)
    ph[indices] = phases
    lm[indices] = log_mags
    return ph, lm


def _chain_state(k, ell, xi, eta2, tol, profile=None):
    """Sector state on n = ell (mod k) with adaptive doubling of the cutoff."""
    xi = complex(xi)
    n = max(N_START, ell + k)
    while True:
        prof = profile if profile is not None and profile.degree_max >= n else nonlinearity_profile(k, eta2, n)
        idx, ph, lm, event = _walk(prof, xi, ell, n)
        if event is not None:
            kind, where = event
            size = where if kind == "zero" else where + 1
            dph, dlm = _dense(idx, ph, lm, size)
            if kind == "zero":
                return NlcsState(k, ell, xi, eta2, dph, dlm, Classification("TruncatedZero", where))
            if k == 1:
                try:
                    return pole_state(where, xi, eta2)
                except PreconditionError as exc:
                    diag = {"pole_index": where, "reason": str(exc)}
            else:
                diag = {"pole_index": where, "reason": f"f({where - k}) = 0 on the sector chain"}
            return NlcsState(k, ell, xi, eta2, dph, dlm, UNDEFINED, math.inf, diag)
        dph, dlm = _dense(idx, ph, lm, n + 1)
        p = np.exp(2 * (dlm + _norm_log(dlm)))
        tail = float(p[n // 2 + 1:].sum())
        if tail <= tol:
            return NlcsState(k, ell, xi, eta2, dph, dlm, REGULAR, tail)
        if n >= N_LIMIT:
            diag = {"reason": "coefficients do not decay (non-normalizable)", "tail": tail, "n": n}
            return NlcsState(k, ell, xi, eta2, dph, dlm, UNDEFINED, tail, diag)
        n *= 2


def coefficients(profile: fock_ops.NonlinearityProfile, xi: complex, tol: float = DEFAULT_TOL) -> NlcsState:
    """Single-boson state c_0 = 1, c_{n+1} = xi c_n / (sqrt(n+1) f(n)).

    The profile is extended internally when the tail needs more terms.
    Meeting f = inf truncates the state; meeting f = 0 is handed to
    :func:`pole_state`.
    """
    if profile.k != 1:
        raise DomainError("coefficients() needs a k = 1 profile; use kboson_sector")
    return _chain_state(1, 0, xi, profile.eta2, tol, profile)


def kboson_sector(k: int, ell: int, xi_k: complex, eta2: float, tol: float = DEFAULT_TOL) -> NlcsState:
    """Sector state |xi_k>_ell supported on n = ell (mod k), normalized by c_ell^(k)."""
    if not 0 <= ell < k:
        raise DomainError(f"sector ell={ell} must satisfy 0 <= ell < k={k}")
    return _chain_state(int(k), int(ell), xi_k, float(eta2), tol)


def gram_matrix(states):
    size = max(s.n_max for s in states) + 1
    vs = np.array([s.amplitudes(size) for s in states])
    return vs.conj() @ vs.T


def kboson_split(k: int, xi_k: complex, eta2: float, tol: float = DEFAULT_TOL):
    """All k sector states and the Gram matrix of their pairwise overlaps."""
    sectors = [kboson_sector(k, ell, xi_k, eta2, tol) for ell in range(k)]
    return sectors, gram_matrix(sectors)


def kboson_composite(sectors) -> NlcsState:
    """Equal-weight sum of normalized sectors, renormalized by 1/sqrt(k)."""
    k = sectors[0].k
    size = max(s.n_max for s in sectors) + 1
    v = sum(s.amplitudes(size) for s in sectors) / math.sqrt(k)
    mag = np.abs(v)
    with np.errstate(divide="ignore"):
        lm = np.log(mag)
    ph = np.where(mag > 0, v / np.where(mag > 0, mag, 1.0), 0)
    cls = REGULAR if all(s.classification == REGULAR for s in sectors) else UNDEFINED
    return NlcsState(k, "composite", sectors[0].xi, sectors[0].eta2, ph, lm, cls,
                     sum(s.tail_bound for s in sectors))


def truncated_zero_state(beta: int, xi: complex, eta2_bar: float) -> NlcsState:
    """|xi>_beta = N_beta sum_{n<beta} c_n |n> at a root of L_{beta-1}^(0)."""
    if beta < 1:
        raise DomainError("beta must be >= 1")
    require_root(beta - 1, 0, eta2_bar, ROOT_BAND)
    prof = nonlinearity_profile(1, eta2_bar, beta)
    idx, ph, lm, event = _walk(prof, complex(xi), 0, beta - 1)
    if event is not None:
        raise PreconditionError(f"coefficient chain breaks at n={event[1]} before beta={beta}")
    return NlcsState(1, 0, complex(xi), float(eta2_bar), ph, lm, Classification("TruncatedZero", beta))


def pole_state(mu: int, xi: complex, eta2_bar: float, j_max: int = POLE_JMAX) -> NlcsState:
    """Regularized expansion sum_{n>=mu} xi^n/sqrt(n!) prod_{l=mu}^{n-1} f(l)^-1 |n>.

    Accepted as PoleRegularized only when the ratio sequence of the
    normalization series settles: the spread over the last half window
    [j_max/2, j_max] must be below 1e-6 of its median, with the median
    below 1.  Otherwise Undefined, with the diagnostics attached.
    """
    xi = complex(xi)
    if mu < 1:
        raise DomainError("mu must be >= 1")
    require_root(mu - 1, 1, eta2_bar, ROOT_BAND)
    if xi == 0:
        raise DomainError("xi must be nonzero for a pole state")
    diag = pole_ratio_sequence(mu, eta2_bar, abs(xi), j_max, margin=ROOT_BAND)
    last = diag.exact_ratios[j_max // 2:]
    osc = window_oscillation(last)
    settled = osc < 1e-6 and float(np.median(last)) < 1.0

    prof = nonlinearity_profile(1, eta2_bar, mu + j_max)
    log_mu = mu * math.log(abs(xi)) - 0.5 * gammaln(mu + 1)
    idx, ph, lm, _ = _walk(prof, xi, mu, mu + j_max, log_mu, (xi / abs(xi)) ** mu)
    dph, dlm = _dense(idx, ph, lm, idx[-1] + 1)
    cls = Classification("PoleRegularized", mu) if settled else UNDEFINED
    return NlcsState(1, 0, xi, float(eta2_bar), dph, dlm, cls, math.nan, diag)


def _sign_change(row_lo, row_hi):
    return np.sign(row_lo) * np.sign(row_hi) <= 0


def build_state(eta2: float, xi: complex, tol: float = DEFAULT_TOL, band: float = ROOT_BAND) -> NlcsState:
    """Single-boson state with the exact-root band applied.

    Inside ``band`` of a root of L_n^(0) or L_n^(1) (n below the cutoff the
    regular construction needed) the truncated or pole construction runs on
    the snapped root instead.
    """
    state = coefficients(nonlinearity_profile(1, eta2, N_START), xi, tol)
    if state.classification != REGULAR:
        return state
    n = state.n_max
    lo, hi = max(eta2 - band, 0.0), eta2 + band
    hits = []
    for alpha in (0, 1):
        rows = laguerre_rows(n, alpha, np.array([lo, hi]))
        for j in range(1, n + 1):
            if _sign_change(rows[j, 0], rows[j, 1]):
                hits.append((j, alpha))
                break
    if not hits:
        return state
    j, alpha = min(hits)
    root = nearest_root(j, alpha, eta2)
    if alpha == 0:
        return truncated_zero_state(j + 1, xi, root)
    return pole_state(j + 1, xi, root)


# --- observables -----------------------------------------------------------

def _apply_annihilation(f, v):
    """(A v)_n = f(n) sqrt(n+1) v_{n+1} on a finite vector; last entry dropped."""
    out = np.zeros_like(v)
    n = np.arange(len(v) - 1)
    out[:-1] = f[: len(v) - 1] * np.sqrt(n + 1) * v[1:]
    return out


def mean_C(p, profile):
    """<C(n)> = sum p_n C(n); terms with p_n = 0 are skipped, infinite f wins."""
    total = 0.0
    for n, pn in enumerate(p):
        if pn == 0.0:
            continue
        if profile.flags[n] is Flag.INFINITE or (n >= 1 and profile.flags[n - 1] is Flag.INFINITE):
            return math.inf
        total += pn * fock_ops.commutator_C(profile, n)
    return total


@dataclass(frozen=True)
class UncertaintyReport:
    eta2: float
    var_x: float
    var_p: float
    product: float
    mean_C: float
    lambda_term: float = math.nan
    xi_term: float = math.nan
    beta: int | None = None


def lambda_xi(p, xi, mc):
    """Lambda and Xi for a state truncated after index beta-1 = len(p)-1."""
    b1 = p[-1]
    b2 = p[-2] if len(p) >= 2 else 0.0
    lam = 0.5 * (xi * xi + (xi * xi).conjugate()).real * (b1 - b1 * b1 - b2)
    xi_term = abs(xi) ** 2 * b1 * (1.0 - b1) + 0.5 * mc
    return lam, xi_term


def _truncated_report(p, xi, profile, beta):
    mc = mean_C(p, profile)
    lam, xt = lambda_xi(p, xi, mc)
    if math.isinf(xt):
        return UncertaintyReport(profile.eta2, math.inf, math.inf, math.inf, mc, lam, xt, beta)
    var_x, var_p = lam + xt, -lam + xt
    return UncertaintyReport(profile.eta2, var_x, var_p, xt * xt - lam * lam, mc, lam, xt, beta)


def uncertainty_report(state: NlcsState, profile: fock_ops.NonlinearityProfile) -> UncertaintyReport:
    if state.k != 1 or profile.k != 1:
        raise DomainError("uncertainty reports are defined for k = 1")
    if profile.eta2 != state.eta2:
        raise DomainError("profile and state disagree on eta2")
    cls = state.classification
    if cls.kind == "Undefined" or cls.kind == "PoleRegularized":
        raise DomainError(f"no uncertainty report for a {cls} state")
    if profile.degree_max < state.n_max:
        profile = nonlinearity_profile(1, state.eta2, state.n_max)
    p = state.probabilities()
    if cls.kind == "TruncatedZero":
        return _truncated_report(p, state.xi, profile, cls.index)
    mc = mean_C(p, profile)
    v = abs(mc) / 2
    return UncertaintyReport(state.eta2, v, v, v * v, mc)


def general_variances(state: NlcsState, profile):
    """Var X and Var P from the moments of A on the stored vector.

    Uses no eigenvalue relation, so for Regular states it checks the
    intelligent-state equality independently.
    """
    if profile.degree_max < state.n_max:
        profile = nonlinearity_profile(1, state.eta2, state.n_max)
    v = state.amplitudes()
    f = np.asarray(profile.f_values)
    av = _apply_annihilation(f, v)
    a1 = np.vdot(v, av)
    a2 = np.vdot(v, _apply_annihilation(f, av))
    ada = np.vdot(av, av).real
    mc = mean_C(state.probabilities(), profile)
    da = a2 - a1 * a1
    sym = (da + da.conjugate()).real
    var_x = 0.5 * (sym + 2 * ada - 2 * abs(a1) ** 2 + mc)
    var_p = -0.5 * (sym - 2 * ada + 2 * abs(a1) ** 2 - mc)
    return var_x, var_p


def truncated_probabilities(beta, xi, eta2):
    """p_0 ... p_{beta-1} of the beta-truncated expansion at any eta2.

    Exact zeros of L_j^(0) or L_j^(1) (flagged in the profile) are handled
    as limits: each coefficient carries an order (poles minus zeros) and
    only the highest order survives normalization.
    """
    prof = nonlinearity_profile(1, eta2, beta)
    lm = np.zeros(beta)
    order = np.zeros(beta, dtype=int)
    log_xi = math.log(abs(xi)) if xi != 0 else -math.inf
    for n in range(beta - 1):
        num, den = prof.lag0[n], prof.lagk[n]
        step_order = 0
        if prof.flags[n] is Flag.INFINITE:
            num, step_order = 1.0, -1
        elif prof.flags[n] is Flag.ZERO:
            den, step_order = 1.0, 1
        order[n + 1] = order[n] + step_order
        lm[n + 1] = lm[n] + log_xi + 0.5 * math.log(n + 1) + math.log(abs(num)) - math.log(abs(den))
    lm[order < order.max()] = -np.inf
    with np.errstate(under="ignore"):
        p = np.exp(2 * (lm - 0.5 * logsumexp(2 * lm)))
    return p, prof


def truncated_point(beta: int, xi: complex, eta2: float) -> UncertaintyReport:
    """Lambda/Xi report of the beta-truncated state at an arbitrary eta2."""
    if beta < 2:
        raise DomainError("beta must be >= 2")
    p, prof = truncated_probabilities(beta, complex(xi), float(eta2))
    return _truncated_report(p, complex(xi), prof, beta)


# --- residuals -------------------------------------------------------------

def _default_dim(state):
    if state.classification.kind == "TruncatedZero":
        return state.n_max + 1
    return state.n_max + 1 + state.k


def eigen_residual(state: NlcsState, dim: int | None = None, eigenvalue: complex | None = None) -> float:
    """||A_k v - lam v|| / ||v|| with lam = xi_k unless given."""
    dim = _default_dim(state) if dim is None else dim
    lam = state.xi if eigenvalue is None else eigenvalue
    prof = nonlinearity_profile(state.k, state.eta2, dim)
    A = build_annihilation(prof, dim)
    v = state.amplitudes(dim)
    return float(np.linalg.norm(A @ v - lam * v) / np.linalg.norm(v))


def composite_residuals(state: NlcsState, dim: int | None = None) -> dict:
    """Residuals of the composite state against both xi_k and k*xi_k."""
    return {
        "xi_k": eigen_residual(state, dim),
        "k_xi_k": eigen_residual(state, dim, state.k * state.xi),
    }


def kernel_residual(state: NlcsState, params: PhysicalParams, dim: int | None = None) -> float:
    """max_n |(F_k^(0) v)_n| over rows 0 ... dim-k-1."""
    dim = _default_dim(state) if dim is None else dim
    F = build_F0(params, dim)
    v = state.amplitudes(dim)
    return float(np.max(np.abs((F @ v)[: dim - params.k])))


def noiseless_check(state: NlcsState, params: PhysicalParams, dim: int | None = None) -> float:
    """|<v| F_k^(0) |v>|."""
    dim = _default_dim(state) if dim is None else dim
    F = build_F0(params, dim)
    v = state.amplitudes(dim)
    return float(abs(np.vdot(v, F @ v)))
