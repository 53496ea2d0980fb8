"""Exception hierarchy."""


class CrypthomError(Exception):
    pass


class DomainError(CrypthomError, ValueError):
    """A point lies outside the set an operation is defined on."""


class ParameterError(CrypthomError, ValueError):
    pass


class MeshError(CrypthomError):
    pass


class SolverError(CrypthomError):
    """Linear solve failed; carries the residual or iteration count when known."""

    def __init__(self, message, residual=None, iterations=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class PositivityError(CrypthomError):
    def __init__(self, message, min_value=None, node=None):
        super().__init__(message)
        self.min_value = min_value
        self.node = node


class ConfigError(CrypthomError, ValueError):
    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class DependencyError(CrypthomError):
    """A subcommand needs an artifact that another subcommand produces."""


class ProtocolError(CrypthomError, ValueError):
    """Inputs to a comparison do not share mesh or output times."""
