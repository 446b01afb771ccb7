"""Truncated Fock-space matrices for the trapped-ion interaction operators.

Conventions: entry ``(m, n)`` is the bra-``m``/ket-``n`` element; a band of
offset ``r`` is only filled where both indices are below ``dim``.  The common
Hamiltonian prefactor ``lambda E1 exp(-eta^2/2)`` never enters a matrix.
"""
from __future__ import annotations

import cmath
import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

from .errors import DomainError, PreconditionError, SingularProfileError
from .laguerre import ROOT_TOL, laguerre_rows


@dataclass(frozen=True)
class PhysicalParams:
    """Laser and trap parameters of the two-laser ion trap.

    The first laser is resonant (omega0 = omega) and the second is tuned to
    the k-th red sideband (omega1 = omega - k nu); both are derived, never set.
    """

    eta: float
    nu: float = 1.0
    omega: float = 0.0
    e0_over_e1: float = 1.0
    lambda_dipole: float = 1.0
    k: int = 1

    def __post_init__(self):
        if not self.eta > 0 or not math.isfinite(self.eta):
            raise DomainError(f"eta must be > 0, got {self.eta!r}")
        if not self.nu > 0:
            raise DomainError(f"nu must be > 0, got {self.nu!r}")
        if not self.e0_over_e1 > 0:
            raise DomainError(f"e0_over_e1 must be > 0, got {self.e0_over_e1!r}")
        if isinstance(self.k, bool) or int(self.k) != self.k or self.k < 1:
            raise DomainError(f"k must be an integer >= 1, got {self.k!r}")

    @property
    def eta2(self) -> float:
        return self.eta * self.eta

    @property
    def omega0(self) -> float:
        return self.omega

    @property
    def omega1(self) -> float:
        return self.omega - self.k * self.nu

    @property
    def period(self) -> float:
        return 2 * math.pi / self.nu


class Flag(enum.Enum):
    FINITE = "Finite"
    ZERO = "Zero"
    INFINITE = "Infinite"


@dataclass(frozen=True)
class NonlinearityProfile:
    """f(n) = L_n^(k)(eta2) / [(n+1)...(n+k) L_n^(0)(eta2)] for n <= N.

    ``lag0`` and ``lagk`` keep the two Laguerre rows so callers can form
    ratios without dividing by a flagged zero twice.
    """

    k: int
    eta2: float
    f_values: np.ndarray
    flags: tuple
    lag0: np.ndarray = field(repr=False)
    lagk: np.ndarray = field(repr=False)

    @property
    def degree_max(self) -> int:
        return len(self.f_values) - 1

    def first_flag(self, start=0, stop=None, step=1):
        """Index of the first non-Finite flag in range(start, stop, step), or None."""
        stop = len(self.flags) if stop is None else min(stop, len(self.flags))
        for n in range(start, stop, step):
            if self.flags[n] is not Flag.FINITE:
                return n
        return None


def rising(n, k):
    """(n+1)(n+2)...(n+k) as float; works on arrays."""
    out = np.ones_like(np.asarray(n, dtype=float))
    for j in range(1, k + 1):
        out = out * (np.asarray(n, dtype=float) + j)
    return out


def nonlinearity_profile(k: int, eta2: float, n_max: int) -> NonlinearityProfile:
    if isinstance(k, bool) or int(k) != k or k < 1:
        raise DomainError(f"k must be an integer >= 1, got {k!r}")
    if n_max < 0:
        raise DomainError("n_max must be >= 0")
    k, n_max = int(k), int(n_max)
    eta2 = float(eta2)
    lag0 = laguerre_rows(n_max, 0, eta2)
    lagk = laguerre_rows(n_max, k, eta2)
    n = np.arange(n_max + 1)
    infinite = np.abs(lag0) < ROOT_TOL
    zero = (np.abs(lagk) < ROOT_TOL) & ~infinite
    with np.errstate(divide="ignore", invalid="ignore"):
        f = lagk / (rising(n, k) * lag0)
    f[infinite] = np.inf
    f[zero] = 0.0
    flags = tuple(
        Flag.INFINITE if i else Flag.ZERO if z else Flag.FINITE
        for i, z in zip(infinite, zero)
    )
    for a in (f, lag0, lagk):
        a.setflags(write=False)
    return NonlinearityProfile(k=k, eta2=eta2, f_values=f, flags=flags, lag0=lag0, lagk=lagk)


@dataclass(frozen=True)
class OperatorMatrix:
    entries: np.ndarray
    label: str

    def __post_init__(self):
        self.entries.setflags(write=False)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def __matmul__(self, other):
        if isinstance(other, OperatorMatrix):
            return OperatorMatrix(self.entries @ other.entries, f"{self.label}*{other.label}")
        return self.entries @ other

    def __add__(self, other):
        return OperatorMatrix(self.entries + other.entries, f"{self.label}+{other.label}")

    def to_json(self):
        """Row-major nested lists of [re, im] pairs."""
        return {
            "label": self.label,
            "dim": self.dim,
            "entries": [[[float(z.real), float(z.imag)] for z in row] for row in self.entries],
        }


def _check_dim(dim, minimum=1):
    if isinstance(dim, bool) or int(dim) != dim or dim < minimum:
        raise DomainError(f"dim must be an integer >= {minimum}, got {dim!r}")
    return int(dim)


def ladder_sqrt(n, r):
    """sqrt(n! / (n+r)!) for integer arrays n."""
    n = np.asarray(n, dtype=float)
    return np.exp(0.5 * (gammaln(n + 1) - gammaln(n + r + 1)))


def _lowering_band(mat, r, coeff):
    """Fill entries (n, n+r) with coeff[n] * sqrt((n+r)!/n!)/(n+1)...(n+r).

    That is the matrix of g(n) a^r with g(n) = coeff[n] / ((n+1)...(n+r)),
    which simplifies to coeff[n] * sqrt(n!/(n+r)!).
    """
    dim = mat.shape[0]
    n = np.arange(dim - r)
    mat[n, n + r] += coeff[: dim - r] * ladder_sqrt(n, r)


def _raising_band(mat, r, coeff):
    """Fill entries (n+r, n) for the operator (a^dag)^r g(n)."""
    dim = mat.shape[0]
    n = np.arange(dim - r)
    mat[n + r, n] += coeff[: dim - r] * ladder_sqrt(n, r)


def build_annihilation(profile: NonlinearityProfile, dim: int) -> OperatorMatrix:
    """Matrix of A_k = f(n) a^k: entry (n-k, n) = f(n-k) sqrt(n!/(n-k)!).

    Only f(0) ... f(dim-k-1) enter the truncated matrix, so only those must
    be finite.
    """
    k = profile.k
    dim = _check_dim(dim, k + 1)
    if profile.degree_max < dim - k - 1:
        raise DomainError("profile too short for requested dim")
    for n in range(dim - k):
        if profile.flags[n] is Flag.INFINITE:
            raise SingularProfileError(n, profile.eta2)
    mat = np.zeros((dim, dim), dtype=complex)
    m = np.arange(dim - k)
    mat[m, m + k] = np.asarray(profile.f_values[: dim - k]) / ladder_sqrt(m, k)
    return OperatorMatrix(mat, f"A_{k}")


def commutator_C(profile: NonlinearityProfile, n: int) -> float:
    """Diagonal of [A_k, A_k^dag] at Fock index n.

    For k = 1 this is C(n) = (n+1) f(n)^2 - n f(n-1)^2; in general the
    weights are the rising/falling factorials of a^k a^dag^k.
    """
    k = profile.k
    if n < 0 or n > profile.degree_max:
        raise DomainError(f"n={n} outside profile range")
    for m in (n, n - k):
        if m >= 0 and profile.flags[m] is Flag.INFINITE:
            raise SingularProfileError(m, profile.eta2)
    f = profile.f_values
    if k == 1:
        return (n + 1) * f[n] ** 2 - (n * f[n - 1] ** 2 if n >= 1 else 0.0)
    up = float(rising(n, k)) * f[n] ** 2
    down = float(rising(n - k, k)) * f[n - k] ** 2 if n >= k else 0.0
    return up - down


def build_O_Q_exact(params: PhysicalParams, t: float, dim: int, series_cutoff: int):
    """O and Q_k from the normally ordered double sum over (l, m).

    The sum over (a^dag)^m a^l is cut at m + l <= series_cutoff.
    """
    dim = _check_dim(dim)
    if series_cutoff < 2 * dim:
        raise PreconditionError(f"series_cutoff={series_cutoff} must be >= 2*dim={2 * dim}")
    eta, nu, k = params.eta, params.nu, params.k
    O = np.zeros((dim, dim), dtype=complex)
    log_eta = math.log(eta)
    lf = gammaln(np.arange(series_cutoff + dim + 2) + 1.0)
    for p in range(dim):
        for q in range(dim):
            acc = 0j
            # l <= q, m = p - q + l >= 0, intermediate index r = q - l
            for l in range(max(0, q - p), q + 1):
                m = p - q + l
                if m + l > series_cutoff:
                    break
                r = q - l
                mag = math.exp(
                    (m + l) * log_eta - lf[m] - lf[l] + 0.5 * (lf[q] + lf[p]) - lf[r]
                )
                acc += (1j ** ((m + l) % 4)) * mag * cmath.exp(1j * nu * t * (m - l))
            O[p, q] = acc
    Q = cmath.exp(1j * nu * t * k) * O
    return OperatorMatrix(O, f"O_exact@{t!r}"), OperatorMatrix(Q, f"Q{k}_exact@{t!r}")


def _lag_table(r_max, n_max, x):
    """table[r] = L_0^(r)(x) ... L_{n_max}^(r)(x) for r = 0 ... r_max."""
    return [laguerre_rows(n_max, r, x) for r in range(r_max + 1)]


def build_O_Q_laguerre(params: PhysicalParams, t: float, dim: int):
    """O and Q_k from the closed form built on Laguerre-polynomial operators."""
    dim = _check_dim(dim)
    eta, nu, k, x = params.eta, params.nu, params.k, params.eta2
    lag = _lag_table(dim - 1 + k, dim - 1, x)
    ie = 1j * eta

    O = np.zeros((dim, dim), dtype=complex)
    O[np.arange(dim), np.arange(dim)] = lag[0]
    for r in range(1, dim):
        _raising_band(O, r, ie**r * cmath.exp(1j * nu * r * t) * lag[r])
        _lowering_band(O, r, ie**r * cmath.exp(-1j * nu * r * t) * lag[r])

    Q = np.zeros((dim, dim), dtype=complex)
    for s in range(1, dim - k):
        _lowering_band(Q, s + k, ie ** (s + k) * cmath.exp(-1j * nu * s * t) * lag[s + k])
    for j in range(1, min(k, dim - 1) + 1):
        _lowering_band(Q, j, ie**j * cmath.exp(1j * nu * (k - j) * t) * lag[j])
    Q[np.arange(dim), np.arange(dim)] += cmath.exp(1j * nu * k * t) * lag[0]
    for s in range(k + 1, k + dim):
        _raising_band(Q, s - k, ie ** (s - k) * cmath.exp(1j * nu * s * t) * lag[s - k])
    return OperatorMatrix(O, f"O_laguerre@{t!r}"), OperatorMatrix(Q, f"Q{k}_laguerre@{t!r}")


def build_F0(params: PhysicalParams, dim: int) -> OperatorMatrix:
    """RWA operator F_k^(0) = (E0/E1) L_n^(0) + (i eta)^k L_n^(k) / (n+1)...(n+k) a^k."""
    k = params.k
    dim = _check_dim(dim, k + 1)
    x = params.eta2
    mat = np.zeros((dim, dim), dtype=complex)
    mat[np.arange(dim), np.arange(dim)] = params.e0_over_e1 * laguerre_rows(dim - 1, 0, x)
    _lowering_band(mat, k, (1j * params.eta) ** k * laguerre_rows(dim - 1, k, x))
    return OperatorMatrix(mat, "F0")


def build_F1(params: PhysicalParams, t: float, dim: int) -> OperatorMatrix:
    """First-order correction F_k^(1) = (E0/E1) O^(1) + Q_k^(1).

    Keeps exactly the terms of O and Q_k oscillating as exp(+-i nu t).  At
    k = 1 the a^(k-1) band of Q_k^(1) does not exist separately; the single
    frequency-nu diagonal is exp(i nu t) L_n^(0).
    """
    k = params.k
    dim = _check_dim(dim, k + 2)
    eta, nu, x = params.eta, params.nu, params.eta2
    ie = 1j * eta
    up, down = cmath.exp(1j * nu * t), cmath.exp(-1j * nu * t)
    lag = _lag_table(k + 1, dim - 1, x)
    mat = np.zeros((dim, dim), dtype=complex)

    g = params.e0_over_e1 * ie * lag[1]
    _raising_band(mat, 1, g * up)
    _lowering_band(mat, 1, g * down)

    _lowering_band(mat, k + 1, ie ** (k + 1) * down * lag[k + 1])
    if k == 1:
        mat[np.arange(dim), np.arange(dim)] += up * lag[0]
    else:
        _lowering_band(mat, k - 1, ie ** (k - 1) * up * lag[k - 1])
    return OperatorMatrix(mat, f"F1@{t!r}")
