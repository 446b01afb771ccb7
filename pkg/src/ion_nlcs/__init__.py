"""Nonlinear coherent states of a laser-driven trapped ion.

Laguerre kernel, Fock-space operators, state construction, Lamb-Dicke
singularity atlas and the first-order RWA correction.
"""
from .errors import (
    DomainError,
    LeadingCoefficientError,
    NlcsError,
    PreconditionError,
    SingularPointError,
    SingularProfileError,
)
from .fock_ops import (
    PhysicalParams,
    build_annihilation,
    build_F0,
    build_F1,
    build_O_Q_exact,
    build_O_Q_laguerre,
    commutator_C,
    nonlinearity_profile,
)
from .laguerre import laguerre_asymptotic_ratio_factor, laguerre_eval, laguerre_roots, laguerre_row
from .nlcs import (
    build_state,
    coefficients,
    kboson_composite,
    kboson_sector,
    kboson_split,
    pole_state,
    truncated_point,
    truncated_zero_state,
    uncertainty_report,
    xi_from_params,
)
from .rwa1 import d_recursion, delta_coefficients, kernel_K, shift_estimate
from .singularity import build_atlas, classify_eta2, pole_ratio_sequence

__version__ = "0.1.0"
