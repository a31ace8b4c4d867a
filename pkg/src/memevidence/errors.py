"""Exception types shared across the package."""


class MemevidenceError(Exception):
    """Base class for all package errors."""


class ShapeError(MemevidenceError, ValueError):
    """Operands have incompatible or invalid shapes."""


class ContractError(MemevidenceError, ValueError):
    """A caller violated an operation's precondition."""


class FormatError(MemevidenceError, ValueError):
    """A binary or textual file does not match its documented layout."""


class ValidationError(MemevidenceError, ValueError):
    """Loaded data violates a corpus or sample invariant."""


class ConfigError(MemevidenceError, ValueError):
    """A configuration object is internally inconsistent."""


class TrainingError(MemevidenceError, RuntimeError):
    """Training produced a non-finite loss or gradient."""
