class DomainError(ValueError):
    """An argument lies outside the domain of the operation."""


class StructuralError(ValueError):
    """Shapes or dimensions do not agree."""


class InfeasibleError(ValueError):
    """The requested constraint level cannot be met."""


class ContractViolation(ValueError):
    """An input breaks a convexity or monotonicity assumption."""


class ConfigError(ValueError):
    """A configuration file or parameter set is malformed."""


class NonTerminationError(RuntimeError):
    """A search exhausted its escalation budget without meeting its stop rule."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}
