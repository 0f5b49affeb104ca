"""Exception hierarchy shared by all planner stages."""


class PlannerError(Exception):
    """Base class for every error raised by this package."""


class SingularProjection(PlannerError):
    """1 - kappa_r * l <= 0: the point sits at or beyond the guide line's
    center of curvature, where the Frenet mapping degenerates."""


class HeadingFold(PlannerError):
    """|heading - guide tangent| >= pi/2; the lateral derivative l' is
    unbounded and the projection is not usable."""


class AmbiguousProjection(PlannerError):
    """Two non-adjacent polyline segments are equally close to the query
    point (self-approaching line)."""


class DimensionMismatch(PlannerError):
    """Vector/matrix shapes do not agree."""


class DegenerateInput(PlannerError):
    """Input polyline too short or otherwise unusable."""


class OutOfRange(PlannerError):
    """Query parameter outside the domain of the curve/path."""


class SmoothingFailed(PlannerError):
    """Guide-line smoothing QP did not converge."""


class OutOfScope(PlannerError):
    """Obstacle lies entirely outside the guide line's station range."""


class NoUsableLane(PlannerError):
    """Ego lane is blocked and no lane-borrow rule applies."""


class BlockedCorridor(PlannerError):
    """Every lateral gap at some station is infeasible after back-tracking."""

    def __init__(self, obstacle_id: str, s: float):
        super().__init__(f"corridor blocked near obstacle {obstacle_id!r} at s={s:.2f}")
        self.obstacle_id = obstacle_id
        self.s = s


class InfeasibleGuideLine(PlannerError):
    """Guide-line curvature at some station exceeds what any in-corridor
    lateral offset can compensate."""

    def __init__(self, station: int, message: str = ""):
        super().__init__(message or f"curvature limit unreachable at station {station}")
        self.station = station


class StationMismatch(PlannerError):
    """Boundary and path configuration disagree on the station grid."""


class PathInfeasible(PlannerError):
    """Path QP reported primal infeasibility."""


class IoError(PlannerError):
    """Output directory or file could not be written."""


class ScenarioError(PlannerError):
    """Scenario file failed schema validation."""


class StageError(PlannerError):
    """Wraps a stage failure with scenario context; partial results up to
    the failing stage are retained."""

    def __init__(self, stage: str, scenario: str, cause: Exception, partial=None):
        super().__init__(f"stage {stage!r} failed for scenario {scenario!r}: {cause}")
        self.stage = stage
        self.scenario = scenario
        self.cause = cause
        self.partial = partial
