"""Exception taxonomy for rieszlab.

Every failure mode of the public API raises one of these; generic
ValueError/RuntimeError never escape the package on purpose.
"""


class RieszLabError(Exception):
    """Base class for all rieszlab errors."""


class ParameterError(RieszLabError, ValueError):
    """A model or configuration parameter violates its documented constraint."""


class ConfigError(RieszLabError, ValueError):
    """A run configuration file or override could not be validated."""


class MeanNotZero(RieszLabError, ValueError):
    """An operator that requires mean-free input was fed a field with nonzero mean."""


class NonHermitianSymbol(RieszLabError, ValueError):
    """A multiplier symbol breaks conjugate symmetry, so its output would not be real."""


class NonpositiveDensity(RieszLabError, ValueError):
    """A density field is not strictly positive where positivity is required."""


class VacuumState(RieszLabError, ValueError):
    """The density (or its symmetrized image h + sigma) touched the vacuum floor."""


class DomainViolation(RieszLabError, ValueError):
    """A scalar argument lies outside the function's documented domain."""


class EmptyRange(RieszLabError, ValueError):
    """The admissible integer range for an iteration depth is empty.

    Carries the offending bounds as ``lower`` and ``upper``.
    """

    def __init__(self, message: str, lower: float, upper: float):
        super().__init__(message)
        self.lower = lower
        self.upper = upper


class NonpositiveValue(RieszLabError, ValueError):
    """A log-linear fit was requested on a series containing values <= 0."""


class InsufficientSamples(RieszLabError, ValueError):
    """Too few samples for the requested fit."""


class SteppingError(RieszLabError, RuntimeError):
    """Base for time-integration failures; carries the failing time ``t``."""

    def __init__(self, message: str, t: float):
        super().__init__(f"{message} (at t={t:.6g})")
        self.t = t


class PositivityViolation(SteppingError):
    """The committed state left the admissible positivity region."""


class NumericalBlowup(SteppingError):
    """A norm exceeded the blowup threshold or became non-finite."""
