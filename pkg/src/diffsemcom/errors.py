"""Exception types shared across the package."""


class ParameterError(ValueError):
    """An argument violates an operation's precondition."""


class DegenerateInputError(ParameterError):
    """Input is structurally valid but degenerate (e.g. a zero-power signal)."""


class ConfigError(ValueError):
    """Configuration file is missing, malformed, or inconsistent."""


class InternalConsistencyError(RuntimeError):
    """A cross-checked algebraic identity failed; indicates an indexing bug."""


class TrainingDivergedError(RuntimeError):
    """Training produced a non-finite loss. Carries the loss trace so far."""

    def __init__(self, message, loss_trace=None):
        super().__init__(message)
        self.loss_trace = loss_trace
