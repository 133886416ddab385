"""Exception taxonomy shared across the package.

The CLI maps these onto exit codes: I/O and parse problems -> 1, domain
failures (infeasibility, identification failure) -> 2, internal numerical
faults -> 3.
"""


class ValidationError(ValueError):
    """Malformed problem data: dimension mismatch, bad bounds, bad config."""


class ConstraintError(ValueError):
    """An operating-range constraint was violated by an input value."""


class NumericalError(RuntimeError):
    """A numerical procedure failed (no root, divergence, singularity)."""


class SchedulingError(RuntimeError):
    """Unit-commitment problem infeasible; carries a binding-cause hint."""


class IdentificationError(RuntimeError):
    """All identification multistarts failed to produce a usable fit."""


class ControllerFault(RuntimeError):
    """A low-level controller could not produce a feasible input."""
