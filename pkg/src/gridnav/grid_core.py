"""Grid geometry: poses, frustums, and top-down visibility.

Coordinates: world x/y in meters, cell (row, col) with row indexing y and
col indexing x. Cell (r, c) covers [c*res, (c+1)*res) x [r*res, (r+1)*res)
and has its center at ((c+0.5)*res, (r+0.5)*res).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from gridnav.errors import OutOfBoundsError

# Per-cell boolean matrix with shape (height, width).
CellMask = np.ndarray

DEFAULT_HFOV = math.radians(79.0)
DEFAULT_MAX_RANGE = 5.0


def wrap_angle(a: float) -> float:
    """Normalize an angle to [-pi, pi)."""
    return (a + math.pi) % (2.0 * math.pi) - math.pi


@dataclass(frozen=True)
class Pose:
    """Agent position and heading in the world frame (meters, radians)."""

    x: float
    y: float
    heading: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y) and math.isfinite(self.heading)):
            raise ValueError("pose coordinates must be finite")
        object.__setattr__(self, "heading", wrap_angle(self.heading))

    def heading_vector(self) -> tuple[float, float]:
        return math.cos(self.heading), math.sin(self.heading)


@dataclass(frozen=True)
class GridSpec:
    """Grid dimensions in cells plus metric resolution (meters per cell)."""

    width: int
    height: int
    resolution: float = 0.05

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError("grid dimensions must be >= 1")
        if self.resolution <= 0:
            raise ValueError("resolution must be positive")

    @property
    def shape(self) -> tuple[int, int]:
        return self.height, self.width

    def in_bounds(self, row: int, col: int) -> bool:
        return 0 <= row < self.height and 0 <= col < self.width

    def empty_mask(self) -> CellMask:
        return np.zeros(self.shape, dtype=bool)


@dataclass(frozen=True)
class Frustum:
    """Egocentric sector: origin pose, horizontal field of view, max range."""

    origin: Pose
    hfov: float = DEFAULT_HFOV
    max_range: float = DEFAULT_MAX_RANGE

    def __post_init__(self):
        if not (0.0 < self.hfov < math.pi + 1e-12):
            raise ValueError("hfov must lie in (0, pi]")
        if self.max_range <= 0:
            raise ValueError("max_range must be positive")


def world_to_cell(p: Pose, spec: GridSpec) -> tuple[int, int]:
    """Map a pose to its containing cell, raising on out-of-bounds poses."""
    col = math.floor(p.x / spec.resolution)
    row = math.floor(p.y / spec.resolution)
    if not spec.in_bounds(row, col):
        raise OutOfBoundsError(f"pose ({p.x}, {p.y}) outside {spec.width}x{spec.height} grid")
    return row, col


def cell_center(row: int, col: int, spec: GridSpec) -> tuple[float, float]:
    """World coordinates of a cell center."""
    return (col + 0.5) * spec.resolution, (row + 0.5) * spec.resolution


def supercover_line(r0: int, c0: int, r1: int, c1: int) -> list[tuple[int, int]]:
    """Every cell touched by the segment between two cell centers.

    Passing exactly through a corner includes both adjacent side cells,
    so a diagonal pair of occupied cells blocks the segment.
    """
    cells = [(r0, c0)]
    dr, dc = r1 - r0, c1 - c0
    nr, nc = abs(dr), abs(dc)
    sr = 1 if dr > 0 else -1
    sc = 1 if dc > 0 else -1
    r, c = r0, c0
    ir = ic = 0
    while ir < nr or ic < nc:
        a = (1 + 2 * ir) * nc
        b = (1 + 2 * ic) * nr
        if nr and nc and a == b:
            cells.append((r + sr, c))
            cells.append((r, c + sc))
            r += sr
            c += sc
            ir += 1
            ic += 1
        elif (nc == 0) or (nr and a < b):
            r += sr
            ir += 1
        else:
            c += sc
            ic += 1
        cells.append((r, c))
    return cells


@njit(cache=True)
def _los_clear(occ, r0, c0, r1, c1):
    """True if no strictly-interior supercover cell between the two centers is occupied."""
    dr = r1 - r0
    dc = c1 - c0
    nr = abs(dr)
    nc = abs(dc)
    sr = 1 if dr > 0 else -1
    sc = 1 if dc > 0 else -1
    r = r0
    c = c0
    ir = 0
    ic = 0
    while ir < nr or ic < nc:
        a = (1 + 2 * ir) * nc
        b = (1 + 2 * ic) * nr
        if nr > 0 and nc > 0 and a == b:
            if occ[r + sr, c] or occ[r, c + sc]:
                return False
            r += sr
            c += sc
            ir += 1
            ic += 1
        elif nc == 0 or (nr > 0 and a < b):
            r += sr
            ir += 1
        else:
            c += sc
            ic += 1
        if (r != r1 or c != c1) and occ[r, c]:
            return False
    return True


@njit(cache=True)
def _visible_kernel(occ, r0, c0, ox, oy, heading, half_fov, max_range, res, out):
    height, width = occ.shape
    rad = int(max_range / res) + 2
    rmin = max(0, r0 - rad)
    rmax = min(height - 1, r0 + rad)
    cmin = max(0, c0 - rad)
    cmax = min(width - 1, c0 + rad)
    for r in range(rmin, rmax + 1):
        cy = (r + 0.5) * res
        for c in range(cmin, cmax + 1):
            if r == r0 and c == c0:
                continue
            cx = (c + 0.5) * res
            dx = cx - ox
            dy = cy - oy
            if math.sqrt(dx * dx + dy * dy) > max_range:
                continue
            theta = math.atan2(dy, dx) - heading
            theta = (theta + math.pi) % (2.0 * math.pi) - math.pi
            if abs(theta) > half_fov + 1e-12:
                continue
            if _los_clear(occ, r0, c0, r, c):
                out[r, c] = True
    out[r0, c0] = True


def visible_mask(f: Frustum, occupancy: CellMask, spec: GridSpec) -> CellMask:
    """Cells whose centers lie inside the frustum and are not ray-occluded.

    The agent's own cell is always visible.
    """
    r0, c0 = world_to_cell(f.origin, spec)
    out = spec.empty_mask()
    occ = np.ascontiguousarray(occupancy, dtype=np.bool_)
    _visible_kernel(
        occ, r0, c0, f.origin.x, f.origin.y, f.origin.heading,
        f.hfov / 2.0, f.max_range, spec.resolution, out,
    )
    return out


def bearing_angle(f: Frustum, cell: tuple[int, int], spec: GridSpec) -> float:
    """Absolute angular offset of a cell center from the optical axis, in [0, pi]."""
    row, col = cell
    if not spec.in_bounds(row, col):
        raise OutOfBoundsError(f"cell {cell} outside grid")
    if (row, col) == world_to_cell(f.origin, spec):
        return 0.0
    cx, cy = cell_center(row, col, spec)
    theta = math.atan2(cy - f.origin.y, cx - f.origin.x) - f.origin.heading
    return abs(wrap_angle(theta))


def bearing_field(f: Frustum, spec: GridSpec) -> np.ndarray:
    """Per-cell absolute bearing from the optical axis, vectorized over the grid."""
    rows = (np.arange(spec.height, dtype=np.float64) + 0.5) * spec.resolution
    cols = (np.arange(spec.width, dtype=np.float64) + 0.5) * spec.resolution
    dy = rows[:, None] - f.origin.y
    dx = cols[None, :] - f.origin.x
    theta = np.arctan2(dy, dx) - f.origin.heading
    theta = np.abs((theta + np.pi) % (2.0 * np.pi) - np.pi)
    r0, c0 = world_to_cell(f.origin, spec)
    theta[r0, c0] = 0.0
    return theta


def range_field(f: Frustum, spec: GridSpec) -> np.ndarray:
    """Per-cell Euclidean distance from the frustum origin to each cell center."""
    rows = (np.arange(spec.height, dtype=np.float64) + 0.5) * spec.resolution
    cols = (np.arange(spec.width, dtype=np.float64) + 0.5) * spec.resolution
    dy = rows[:, None] - f.origin.y
    dx = cols[None, :] - f.origin.x
    return np.hypot(dx, dy)
