"""Exception hierarchy shared by all modules."""


class TransparencyError(Exception):
    """Base class for errors raised by this package."""


class ContractViolation(TransparencyError, ValueError):
    """An argument violates a documented precondition."""


class RegimeMismatch(ContractViolation):
    """Parameters do not satisfy the constraints of a transparency regime."""


class IntegrationFailure(TransparencyError, RuntimeError):
    """Time integration drifted beyond tolerance."""


class StepSizeFailure(TransparencyError, RuntimeError):
    """A propagation step produced an unphysical state (e.g. negative intensity)."""


class ConfigError(TransparencyError, ValueError):
    """Scenario file failed to parse or validate."""

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        where = []
        if path:
            where.append(str(path))
        if line is not None:
            where.append(f"line {line}")
        prefix = f"{' '.join(where)}: " if where else ""
        super().__init__(prefix + message)
