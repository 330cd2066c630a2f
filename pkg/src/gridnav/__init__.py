"""Zero-shot instruction-following navigation on 2D grids.

Constraint-driven sub-instruction sequencing, value mapping with
cosine-confidence fusion, superpixel waypoint selection, and fast-marching
low-level control, plus a synthetic gridworld harness with pluggable
perception backends.
"""

from gridnav.grid_core import CellMask, Frustum, GridSpec, Pose
from gridnav.errors import (
    ConfigError,
    DecompositionError,
    FixtureError,
    OutOfBoundsError,
    TransportError,
    UnreachableGoalError,
)

__all__ = [
    "Pose",
    "GridSpec",
    "Frustum",
    "CellMask",
    "ConfigError",
    "DecompositionError",
    "FixtureError",
    "OutOfBoundsError",
    "TransportError",
    "UnreachableGoalError",
]

__version__ = "0.1.0"
