"""Exception hierarchy shared across the package."""


class DomainError(Exception):
    """Base class for all domain-level failures (CLI exit code 1)."""


class ModelError(DomainError):
    """A model cannot be assembled or an id lookup failed."""


class InvalidModelError(DomainError):
    """An operation requiring a valid model was given one that fails validation."""

    def __init__(self, report):
        self.report = report
        lines = "; ".join(v.code for v in report.violations[:4])
        super().__init__(f"INVALID_MODEL: {lines}")


class ModelSyntaxError(DomainError):
    """Model document is not well formed."""

    def __init__(self, line, col, expected):
        self.line = line
        self.col = col
        self.expected = expected
        super().__init__(f"SYNTAX line {line} col {col}: expected {expected}")


class ModelSemanticError(DomainError):
    """Model document parses but the resulting model fails validation."""

    def __init__(self, report):
        self.report = report
        lines = "; ".join(v.code for v in report.violations[:4])
        super().__init__(f"SEMANTIC: {lines}")


class ArtifactError(DomainError):
    """A scheduler artifact is malformed."""


class NotUniformError(DomainError):
    """NOT_UNIFORM: transformation requires equal exit rates everywhere."""


class MultiPlayerError(DomainError):
    """MULTI_PLAYER: transformation requires a single-player model."""


class RateTooLowError(DomainError):
    """RATE_TOO_LOW: uniformisation target below the maximal exit rate."""


class CapExceededError(DomainError):
    """CAP_EXCEEDED: enumeration would exceed the configured cap."""


class GameObjectiveError(DomainError):
    """GAME_ON_SINGLE_PLAYER: game objective on a model owned by one player."""


class SchedulerError(DomainError):
    """A scheduler is incompatible with the model or operation."""
