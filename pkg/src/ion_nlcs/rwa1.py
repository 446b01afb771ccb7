"""First-order relaxation of the rotating wave approximation (k = 1).

Keeps the exp(+-i nu t) terms of the interaction operators.  Two routes are
provided: the d_n recursion for kernel states of F1^(0) + F1^(1) at a fixed
time, and the kernel K(xi, xi'; t) with a disc quadrature for the shifted
eigenvalue z.  The quadrature assumes the NLCS resolution of identity with
measure d^2 xi / pi, which is not established; treat it as experimental.
"""
from __future__ import annotations

import cmath
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln, logsumexp

from .errors import DomainError, LeadingCoefficientError, NlcsError
from .fock_ops import PhysicalParams, build_F0, build_F1, nonlinearity_profile
from .laguerre import ROOT_TOL, laguerre_rows
from .nlcs import REGULAR, NlcsState, coefficients


@dataclass(frozen=True)
class Rwa1Solution:
    t: float
    d: np.ndarray
    log_mag: np.ndarray
    params: PhysicalParams
    residual: float

    def csv_rows(self):
        for n, (z, lm) in enumerate(zip(self.d, self.log_mag)):
            yield (n, float(z.real), float(z.imag), float(lm))


#: reduced phases are snapped to multiples of 2^-PHASE_BITS of a period
PHASE_BITS = 40


def canonical_time(params, t):
    """t reduced into [0, 2 pi / nu) on a fixed binary grid.

    The forward recursion amplifies rounding in exp(+-i nu t) by ~1e7, so t
    and t + 2 pi / nu would otherwise disagree at the 1e-8 level.  Snapping
    the reduced phase makes both land on the same float.
    """
    u = math.fmod(params.nu * t / (2 * math.pi), 1.0)
    if u < 0:
        u += 1.0
    u = round(u * 2.0**PHASE_BITS) / 2.0**PHASE_BITS
    return (u % 1.0) * params.period


def w_factor(params, t):
    """w(t) = E0/E1 + exp(i nu t)."""
    return params.e0_over_e1 + cmath.exp(1j * params.nu * t)


def matrix_residual(params, t, d):
    """Relative residual of (F1^(0) + F1^(1)) d on rows 0 ... N-2.

    Each row is scaled by the sum of the magnitudes of its terms, so the
    number is meaningful however large |d_n| grows.
    """
    dim = len(d)
    F = (build_F0(params, dim) + build_F1(params, t, dim)).entries
    rows = F[: dim - 2]
    num = np.abs(rows @ d)
    scale = np.abs(rows) @ np.abs(d)
    scale[scale == 0] = 1.0
    return float(np.max(num / scale))


def d_recursion(params: PhysicalParams, t: float, d0: complex = 1.0, d1: complex = 0.0,
                n_max: int = 50) -> Rwa1Solution:
    """Coefficients d_0 ... d_{n_max} of |z> = sum d_n |n> from the two seeds.

    d_2 comes from the row-0 relation, d_{n+2} (n >= 1) from the row-n
    relation solved for its leading term.  A running scale factor keeps the
    magnitudes representable; ``log_mag`` holds log|d_n|.
    """
    if params.k != 1:
        raise DomainError("the first-order recursion is written for k = 1")
    if n_max < 2:
        raise DomainError("n_max must be >= 2")
    eta, x, nu, r = params.eta, params.eta2, params.nu, params.e0_over_e1
    ie = 1j * eta
    t_used = canonical_time(params, t)
    w = w_factor(params, t_used)
    em, ep = cmath.exp(-1j * nu * t_used), cmath.exp(1j * nu * t_used)
    L0 = laguerre_rows(n_max, 0, x)
    L1 = laguerre_rows(n_max, 1, x)
    L2 = laguerre_rows(n_max, 2, x)

    mant = np.zeros(n_max + 1, dtype=complex)
    logs = np.zeros(n_max + 1)  # d_n = mant[n] * exp(logs[n])
    mant[0], mant[1] = complex(d0), complex(d1)

    def rel(i, base):
        # mant[i] expressed on the scale exp(base)
        return mant[i] * math.exp(logs[i] - base) if mant[i] != 0 else 0j

    for n in range(0, n_max - 1):
        lead = ie * ie * em / math.sqrt((n + 1) * (n + 2))
        if n == 0:
            base = logs[1]
            rest = ie * em * w * rel(1, base) + w * rel(0, base)
        else:
            if abs(L2[n]) < ROOT_TOL:
                raise LeadingCoefficientError(n, x)
            lead = lead * L2[n]
            base = logs[n + 1]
            rest = (
                ie * em * w / math.sqrt(n + 1) * L1[n] * rel(n + 1, base)
                + w * L0[n] * rel(n, base)
                + r * ie * ep / math.sqrt(n) * L1[n - 1] * rel(n - 1, base)
            )
        val = -rest / lead
        mag = abs(val)
        if mag > 0:
            mant[n + 2] = val / mag
            logs[n + 2] = base + math.log(mag)
        else:
            logs[n + 2] = base

    with np.errstate(divide="ignore"):
        log_mag = np.where(mant != 0, logs + np.log(np.abs(mant)), -np.inf)
    with np.errstate(over="ignore"):
        d = mant * np.exp(logs)
    if not np.all(np.isfinite(d)):
        raise NlcsError("d_n overflows double precision; lower n_max")
    return Rwa1Solution(float(t), d, log_mag, params, matrix_residual(params, t_used, d))


def t_sweep(params, ts, d0=1.0, d1=0.0, n_max=50):
    return [d_recursion(params, t, d0, d1, n_max) for t in ts]


def regular_state(params, xi, tol=1e-16):
    state = coefficients(nonlinearity_profile(1, params.eta2, 64), xi, tol)
    if state.classification != REGULAR:
        raise NlcsError(f"no regular NLCS at xi={xi!r}, eta2={params.eta2!r}: {state.classification}")
    return state


def delta_coefficients(xi: complex, t: float, params: PhysicalParams, n_max: int,
                       state: NlcsState | None = None):
    """Delta_n(xi; t) = (F1^(1) v)_n for n = 0 ... n_max, v the normalized NLCS."""
    if params.k != 1:
        raise DomainError("Delta_n is defined for k = 1")
    state = regular_state(params, xi) if state is None else state
    dim = max(n_max + 3, state.n_max + 1)
    v = state.amplitudes(dim)
    return (build_F1(params, t, dim) @ v)[: n_max + 1]


def _log_g(eta2, n_cut):
    """log|g_n| and sign(g_n) with c_n(xi) = xi^n g_n, g_n = sqrt(n!) prod L_j^(0)/L_j^(1)."""
    L0 = laguerre_rows(n_cut, 0, eta2)
    L1 = laguerre_rows(n_cut, 1, eta2)
    n = np.arange(n_cut + 1)
    with np.errstate(divide="ignore"):
        steps = np.log(np.abs(L0[:-1])) - np.log(np.abs(L1[:-1]))
    logg = 0.5 * gammaln(n + 1) + np.concatenate([[0.0], np.cumsum(steps)])
    sign = np.concatenate([[1.0], np.cumprod(np.sign(L0[:-1]) * np.sign(L1[:-1]))])
    return logg, sign


def _log_conj_coeffs(xi_primes, eta2, n_cut, normalized):
    """log|c_n(xi')| and the unit phase of c_n^*(xi'), shape (len(xi'), n_cut+1)."""
    xi_primes = np.asarray(xi_primes, dtype=complex)
    logg, sign = _log_g(eta2, n_cut)
    n = np.arange(n_cut + 1)
    with np.errstate(divide="ignore", invalid="ignore"):
        logr = np.log(np.abs(xi_primes))[:, None]
        logmag = np.where(n == 0, 0.0, n * logr) + logg
    theta = np.angle(xi_primes)[:, None]
    if normalized:
        logmag = logmag - 0.5 * logsumexp(2 * logmag, axis=1, keepdims=True)
    return logmag, sign * np.exp(-1j * n * theta)


def _contract(xi_primes, eta2, delta, normalized):
    """sum_n delta_n c_n^*(xi') per xi', rescaled row by row to avoid overflow."""
    logmag, phase = _log_conj_coeffs(xi_primes, eta2, len(delta) - 1, normalized)
    shift = np.max(logmag, axis=1, keepdims=True)
    with np.errstate(under="ignore", over="ignore", invalid="ignore"):
        out = (np.exp(logmag - shift) * phase) @ delta
        return out * np.exp(shift[:, 0])


def kernel_K(xi: complex, xi_prime, t: float, params: PhysicalParams, n_cut: int,
             normalized: bool = False):
    """K(xi, xi'; t) = sum_{n <= n_cut} Delta_n(xi; t) c_n^*(xi').

    ``xi_prime`` may be a scalar or an array.  By default c_n(xi') is the
    unnormalized coefficient with c_0 = 1.
    """
    delta = delta_coefficients(xi, t, params, n_cut)
    scalar = np.ndim(xi_prime) == 0
    out = _contract(np.atleast_1d(xi_prime), params.eta2, delta, normalized)
    return complex(out[0]) if scalar else out


def tail_cutoff(params, radius, tol=1e-14, n_limit=4096):
    """Smallest n_cut with the coefficient tail at |xi| = radius below tol, or None."""
    n = 32
    while n <= n_limit:
        logg, _ = _log_g(params.eta2, n)
        lm = np.arange(n + 1) * math.log(radius) + logg
        p = np.exp(2 * lm - logsumexp(2 * lm))
        if p[n // 2 + 1:].sum() <= tol:
            return n
        n *= 2
    return None


def disc_integral(func, radius, n_grid):
    """Midpoint rule for int_{|z| <= R} func(z) d^2 z / pi on a polar grid."""
    dr = radius / n_grid
    dth = 2 * math.pi / n_grid
    r = (np.arange(n_grid) + 0.5) * dr
    th = (np.arange(n_grid) + 0.5) * dth
    rr, tt = np.meshgrid(r, th, indexing="ij")
    z = (rr * np.exp(1j * tt)).ravel()
    weights = (rr * dr * dth).ravel() / math.pi
    with np.errstate(invalid="ignore", over="ignore"):
        return complex(np.sum(func(z) * weights))


@dataclass
class ShiftEstimate:
    z: complex
    shift: complex
    r_sensitivity: float
    radius: float
    n_grid: int
    n_cut: int
    unreliable: bool
    notes: list = field(default_factory=list)

    def to_json(self):
        return {
            "z": [self.z.real, self.z.imag],
            "shift": [self.shift.real, self.shift.imag],
            "r_sensitivity": self.r_sensitivity,
            "radius": self.radius,
            "n_grid": self.n_grid,
            "n_cut": self.n_cut,
            "unreliable": self.unreliable,
            "notes": self.notes,
            "experimental": True,
        }


def shift_estimate(xi: complex, t: float, params: PhysicalParams, radius: float, n_grid: int = 64,
                   normalized: bool = False, kernel=None) -> ShiftEstimate:
    """EXPERIMENTAL: z ~ i eta xi + int_{|xi'| <= R} K(xi, xi'; t) d^2 xi' / pi.

    The R-sensitivity is |I(R) - I(R/2)| / |I(R)|; above 0.1 the result is
    flagged unreliable and a warning is emitted.  ``kernel`` replaces K with
    a user callable of xi' (array in, array out) for testing.
    """
    if not radius > abs(xi):
        raise DomainError("disc radius must exceed |xi|")
    if n_grid < 32:
        raise DomainError("n_grid must be >= 32")
    notes = []
    n_cut = 0
    if kernel is None:
        n_cut = tail_cutoff(params, radius)
        if n_cut is None:
            notes.append("NLCS coefficients do not decay on the disc edge; using n_cut=4096")
            n_cut = 4096
        delta = delta_coefficients(xi, t, params, n_cut)

        def kernel(z):
            return _contract(z, params.eta2, delta, normalized)

    full = disc_integral(kernel, radius, n_grid)
    half = disc_integral(kernel, radius / 2, n_grid)
    if not (cmath.isfinite(full) and cmath.isfinite(half)):
        sens = math.inf
    elif full == 0:
        sens = 0.0 if half == 0 else math.inf
    else:
        sens = abs(full - half) / abs(full)
    if sens > 0.1:
        notes.append(f"shift quadrature is R-sensitive ({sens:.3g}); integrand does not decay on the disc")
    unreliable = bool(notes)
    if unreliable:
        warnings.warn("; ".join(notes), RuntimeWarning, stacklevel=2)
    z = 1j * params.eta * xi + full
    return ShiftEstimate(complex(z), complex(full), float(sens), float(radius), int(n_grid), n_cut,
                         unreliable, notes)
