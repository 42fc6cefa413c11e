"""Exception types raised across the planning toolkit."""


class PlanningError(Exception):
    """Base class for all toolkit errors."""


class TooFewWaypoints(PlanningError):
    """Reference path construction needs at least 4 waypoints."""


class DegenerateSegment(PlanningError):
    """Two consecutive waypoints coincide."""


class OutOfDomain(PlanningError):
    """Curvilinear point lies outside the projection domain."""


class ProjectionFailed(PlanningError):
    """No foot point on the reference path within the projection domain."""


class NonpositiveHorizon(PlanningError):
    """Polynomial boundary-value problem requested with tau <= 0."""


class NotDrivable(PlanningError):
    """Cost evaluation requested for a candidate that is not drivable."""


class NegativeProgress(PlanningError):
    """Reward requested for progress < 0."""


class GenerationRetryExceeded(PlanningError):
    """Scenario generator could not satisfy placement invariants."""

    def __init__(self, seed, message):
        super().__init__(f"seed {seed}: {message}")
        self.seed = seed


class ProposerTimeout(PlanningError):
    """External proposer did not answer within its deadline."""


class ProposerProtocolError(PlanningError):
    """External proposer sent a malformed or unexpected message."""


class SchemaMismatch(PlanningError):
    """Results file does not match the expected column schema."""
