"""Exception types shared across the package."""


class SemrankError(Exception):
    """Base class for all semrank-specific failures."""


class ParseError(SemrankError):
    """Malformed input line or row; carries the 1-based location."""

    def __init__(self, message, line_no=None):
        self.line_no = line_no
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)


class ValidationError(SemrankError):
    """Structurally valid input violating a domain invariant."""

    def __init__(self, message, session_id=None):
        self.session_id = session_id
        if session_id is not None:
            message = f"session {session_id!r}: {message}"
        super().__init__(message)


class NoClicksError(SemrankError):
    """Session has no clicked result, so result labels are undefined."""


class ConfigError(SemrankError):
    """Invalid or inconsistent configuration."""


class EmptyLogError(SemrankError):
    """An operation that needs at least one pair received none."""


class EmptyTestSetError(SemrankError):
    """No eligible sessions were available to build a test set."""


class ModelFormatError(SemrankError):
    """Model file is unreadable: bad magic, truncation, or shape mismatch."""
