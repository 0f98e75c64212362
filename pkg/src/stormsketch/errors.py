"""Exception hierarchy.

Errors split into two groups that the CLI maps to different exit codes:
input problems (bad vectors, malformed files, mismatched sketches) and
numerical failures (singular systems, divergence, domain violations).
"""

from __future__ import annotations


class StormError(Exception):
    """Base class for every error raised by this package."""


class InputError(StormError, ValueError):
    """Malformed or inconsistent caller input."""


class NormalizationError(InputError):
    """A vector that must lie in the unit ball does not."""

    def __init__(self, norm: float):
        super().__init__(f"vector norm {norm:.6g} exceeds 1; normalize the dataset first")
        self.norm = norm


class DegenerateDataError(InputError):
    pass


class CapacityError(InputError):
    pass


class EmptySketchError(InputError):
    pass


class IncompatibleSketchError(InputError):
    def __init__(self, fields: dict[str, tuple[object, object]]):
        desc = ", ".join(f"{k}: {a!r} != {b!r}" for k, a, b in
                         ((k, *v) for k, v in fields.items()))
        super().__init__(f"sketches are incompatible ({desc})")
        self.fields = fields


class SketchFormatError(InputError):
    """Base class for binary sketch parse failures."""


class BadMagicError(SketchFormatError):
    pass


class UnsupportedVersionError(SketchFormatError):
    pass


class TruncatedSketchError(SketchFormatError):
    pass


class NumericalError(StormError, ArithmeticError):
    """Base class for numerical failures."""


class DomainError(NumericalError):
    pass


class SingularSystemError(NumericalError):
    pass


class DivergenceError(NumericalError):
    pass
