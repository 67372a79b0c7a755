"""Exception hierarchy shared by all modules."""


class IrrepSyncError(Exception):
    """Base class for library errors."""


class UsageError(IrrepSyncError, ValueError):
    """Invalid arguments or mismatched inputs."""


class CapabilityError(IrrepSyncError):
    """Request beyond what the implementation supports (e.g. too large an irrep)."""


class StructuralError(IrrepSyncError):
    """Graph structure problem such as a disconnected measurement graph."""

    def __init__(self, message, components=None):
        super().__init__(message)
        self.components = components


class NumericError(IrrepSyncError, ArithmeticError):
    """Numerical failure; ``diagnostics`` carries solver details."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class ParseError(IrrepSyncError):
    """Malformed input file."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
