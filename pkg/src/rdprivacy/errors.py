"""Exception hierarchy.

The CLI maps :class:`InfeasibleError` subclasses to exit status 2 and
:class:`InputError` subclasses to exit status 3.
"""


class RDPrivacyError(Exception):
    """Base class for all package errors."""


class InputError(RDPrivacyError, ValueError):
    """Malformed or inconsistent input."""


class AxisError(InputError):
    """Unknown, repeated or overlapping axis names."""


class ValidationError(InputError):
    """A model document or value failed validation."""


class SchemaError(ValidationError):
    """Database columns do not match the expected schema."""


class CSVRowError(ValidationError):
    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


class SizeError(InputError):
    """Problem too large for an exhaustive routine."""


class OrderingError(InputError):
    """Stage targets are not ordered coarse-to-fine."""


class UnsupportedModelError(InputError):
    pass


class InfeasibleError(RDPrivacyError):
    """Requested operating point lies outside the achievable region."""


class InfeasibleDistortionError(InfeasibleError, ValueError):
    pass


class InfeasiblePrivacyError(InfeasibleError, ValueError):
    pass


class PlanStateError(RDPrivacyError, RuntimeError):
    """Operation requires a feasible plan."""
