from typing import Optional


class MarkerLensError(Exception):
    """Base class for every error raised by markerlens."""


class UnknownIdError(MarkerLensError, LookupError):
    """A sample id or marker name is not present in the structure being queried."""

    def __init__(self, kind: str, identifier: str):
        self.kind = kind
        self.identifier = identifier
        super().__init__(f"Unknown {kind}: {identifier!r}")


class DomainError(MarkerLensError, ValueError):
    """An argument lies outside the domain of the operation (empty sets, k too large, ...)."""


class ValidationError(MarkerLensError, ValueError):
    """Input data violates an invariant (non-finite values, mismatched sample universes)."""


class FormatError(MarkerLensError, ValueError):
    """
    A marker, score or config file is malformed.

    Args:
        message: Description of the problem
        source: File name the problem was found in (optional)
        line: 1-based line number in that file (optional)
    """

    def __init__(self, message: str, source: Optional[str] = None, line: Optional[int] = None):
        self.source = source
        self.line = line
        location = ""
        if source is not None:
            location = f"{source}:{line}: " if line is not None else f"{source}: "
        elif line is not None:
            location = f"line {line}: "
        super().__init__(f"{location}{message}")


class ConfigError(MarkerLensError, ValueError):
    """A configuration key is unknown or its value cannot be used."""

    def __init__(self, key: str, message: str):
        self.key = key
        super().__init__(f"{key}: {message}")
