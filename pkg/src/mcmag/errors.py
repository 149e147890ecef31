"""Exception types shared across the package.

Two families matter for the command line: configuration problems
(exit code 2) and numerical-contract violations (exit code 3).
"""


class McmagError(Exception):
    """Base class for all package-specific errors."""


class DomainError(McmagError, ValueError):
    """An argument is outside the documented domain of an operation."""


class ConfigError(McmagError, ValueError):
    """A sweep/validate/neumark config file is malformed or incomplete."""


class NumericalContractError(McmagError):
    """A numerical invariant the code relies on was violated."""


class HermiticityError(NumericalContractError, ValueError):
    """Input tagged Hermitian is not Hermitian within tolerance."""


class PsdViolationError(NumericalContractError, ValueError):
    """Input tagged positive semidefinite has a clearly negative eigenvalue."""


class DilationRankError(NumericalContractError, ValueError):
    """A measurement operator handed to the dilation has rank above one."""


class UndefinedConditionalError(NumericalContractError, ZeroDivisionError):
    """Conditional error requested for an (almost) all-inconclusive measurement."""
