"""Exception hierarchy shared across the package."""


class RcasError(Exception):
    pass


class PositionOccupied(RcasError, ValueError):
    pass


class CostModelError(RcasError, ValueError):
    def __init__(self, message: str, position: int | None = None):
        if position is not None:
            message = f"position {position}: {message}"
        super().__init__(message)
        self.position = position


class GroupMismatch(CostModelError):
    pass


class NonIntegerChannels(CostModelError):
    pass


class EvaluatorFailure(RcasError):
    """The objective backend failed or produced an unusable score."""

    def __init__(self, message: str, payload=None):
        super().__init__(message)
        self.payload = payload


class HandshakeFailure(EvaluatorFailure):
    pass


class EvaluatorTimeout(EvaluatorFailure):
    pass


class ProtocolError(EvaluatorFailure):
    pass


class InstanceTooLarge(RcasError):
    pass


class DegenerateInput(RcasError, ValueError):
    pass


class TraceCorrupt(RcasError):
    pass


class ConfigError(RcasError):
    pass
