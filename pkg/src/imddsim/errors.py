"""Exception types shared across the simulator."""


class ParameterError(ValueError):
    """An argument violates an operation's stated preconditions."""


class NumericalError(RuntimeError):
    """A numerical procedure failed (ill-conditioning, non-convergence)."""


class SyncError(RuntimeError):
    """Frame synchronization could not locate the preamble."""


class EqualizerDivergenceError(RuntimeError):
    """Adaptive equalizer MSE grew instead of converging."""


class DecodeError(ValueError):
    """Distribution-matcher input is not a valid codeword."""


class NoRateError(ValueError):
    """Measured NGMI is below every threshold in the rate table."""


class StageError(RuntimeError):
    """End-to-end run failed; carries the pipeline stage name."""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause
