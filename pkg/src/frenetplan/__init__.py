"""Two-stage QP path planner for car-like vehicles.

Stage one smooths a raw map polyline into a curvature-continuous guide
line; stage two builds a drivable lateral corridor in the Frenet frame and
optimizes a piecewise-jerk path inside it, with a linear curvature row
enforcing the bicycle-model steering limit.
"""

from . import boundary, geometry, pipeline, pjpath, qp, smoother
from .errors import PlannerError

__all__ = [
    "boundary",
    "geometry",
    "pipeline",
    "pjpath",
    "qp",
    "smoother",
    "PlannerError",
]

__version__ = "0.1.0"
