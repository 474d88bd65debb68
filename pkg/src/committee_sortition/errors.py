class ParameterError(ValueError):
    """Mechanism or population parameters outside their valid domain."""


class InfeasibleBoundError(ValueError):
    """No honest fraction c <= 1 satisfies the requested criterion."""


class EstimabilityError(ValueError):
    """Target probability too small to estimate with the given trial budget."""

    def __init__(self, message, required_trials):
        super().__init__(message)
        self.required_trials = required_trials
