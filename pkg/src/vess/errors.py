"""Exception taxonomy for the vess package.

Solver outcomes that are expected states (infeasible, unbounded) are raised
as typed errors by callers that require an optimum; plain reports carry them
otherwise.  The CLI maps these onto its exit-code contract.
"""

__all__ = [
    "VessError",
    "ValidationError",
    "DimensionMismatchError",
    "DomainError",
    "InfeasibleError",
    "UnboundedError",
    "NumericalFailureError",
    "DegenerateDirectionError",
    "SchemaError",
]


class VessError(Exception):
    """Base class for all package errors."""


class ValidationError(VessError):
    """Input data violates a documented invariant (sign, ordering, range)."""


class DimensionMismatchError(ValidationError):
    """Array lengths or shapes disagree with the declared horizon."""


class DomainError(ValidationError):
    """A numeric argument is outside the domain of the requested quantity."""


class InfeasibleError(VessError):
    """The linear program has no feasible point.

    Carries the solver's diagnostic message; a certifying row is included
    when the backend exposes one.
    """


class UnboundedError(VessError):
    """The linear program's objective is unbounded below."""


class NumericalFailureError(VessError):
    """Residual tolerances could not be met after refinement."""


class DegenerateDirectionError(VessError):
    """A sampled perturbation direction has no effect on the generator."""


class SchemaError(ValidationError):
    """A run configuration document does not match the expected schema."""
