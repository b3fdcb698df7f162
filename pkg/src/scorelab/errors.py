"""Shared exception types."""


class ScoreLabError(Exception):
    """Base class for all scorelab errors."""


class SpecError(ScoreLabError, ValueError):
    """Target specification rejected (parameters out of range or inconsistent)."""


class EvaluationDomainError(ScoreLabError, ValueError):
    """Potential evaluator produced a non-finite value at the requested point."""


class QuadratureError(ScoreLabError, RuntimeError):
    """Quadrature produced a non-finite result.

    Carries node diagnostics in ``details`` (max exponent, node count,
    evaluation point) so the failure can be localized.
    """

    def __init__(self, message, **details):
        super().__init__(message)
        self.details = details


class UnsupportedOperationError(ScoreLabError, TypeError):
    """Operation not defined for this target kind."""


class ContractError(ScoreLabError, ValueError):
    """Mismatched clock pair or inconsistent evaluation bundle."""


class HorizonExceededError(ScoreLabError, ValueError):
    """Requested time lies beyond the bound's validity horizon."""


class RejectionError(ScoreLabError, RuntimeError):
    """Rejection sampler acceptance rate collapsed."""


class ConfigError(ScoreLabError, ValueError):
    """Invalid run configuration."""
