"""Exception types raised across the simulator."""


class MeshbalError(Exception):
    """Base class for all simulator errors."""


class ScenarioSyntaxError(MeshbalError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ValidationError(MeshbalError):
    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")


class UnknownScenario(MeshbalError):
    pass


class OutOfRange(MeshbalError):
    pass


class DegenerateError(MeshbalError):
    pass


class WeightError(MeshbalError):
    pass


class DisconnectedError(MeshbalError):
    pass


class UnknownReceiver(MeshbalError):
    pass


class StaleRoute(MeshbalError):
    pass


class NoCandidates(MeshbalError):
    pass


class MissingCost(MeshbalError):
    pass


class MissingRouteCost(MissingCost):
    pass


class EmptyNeighborhood(MeshbalError):
    pass


class EmptyReport(MeshbalError):
    pass


class RunAborted(MeshbalError):
    """A module error escaped the event loop; carries the failing event."""

    def __init__(self, event, cause):
        self.event = event
        self.cause = cause
        super().__init__(f"run aborted at {event}: {cause!r}")
