"""Exception hierarchy shared by all modules.

The CLI maps every :class:`NlcsError` to exit code 1.
"""


class NlcsError(Exception):
    """Base class for all domain and singularity failures."""


class DomainError(NlcsError, ValueError):
    """Argument outside the mathematical domain of an operation."""


class PreconditionError(DomainError):
    """A documented precondition does not hold (e.g. eta2 is not a root)."""


class SingularPointError(NlcsError, ArithmeticError):
    """Evaluation hit (or came within tolerance of) a pole of tan."""

    def __init__(self, message, argument):
        super().__init__(message)
        self.argument = argument


class SingularProfileError(NlcsError):
    """The nonlinearity f(n) is infinite where an operator needs it."""

    def __init__(self, n, eta2):
        super().__init__(
            f"f({n}) is infinite at eta2={eta2!r}: L_{n}^(0)(eta2) vanishes"
        )
        self.n = n
        self.eta2 = eta2


class LeadingCoefficientError(NlcsError):
    """The d_n recursion cannot be solved for its leading term."""

    def __init__(self, n, eta2):
        super().__init__(
            f"L_{n}^(2)(eta2={eta2!r}) vanishes: d_{n + 2} is undetermined"
        )
        self.n = n
        self.eta2 = eta2
