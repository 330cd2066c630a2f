"""Low-level control: Eikonal distance fields and discrete steering.

``fmm_field`` solves |grad T| = 1 with first-order upwind updates on the
4-neighborhood (heap-ordered wavefront), after inflating obstacles by the
agent radius. ``next_action`` descends the field with the discrete action
space: MOVE FORWARD 0.25 m, TURN LEFT/RIGHT 30 degrees, STOP.
"""

from __future__ import annotations

import heapq
import math

import numpy as np
from scipy import ndimage

from gridnav.errors import UnreachableGoalError
from gridnav.grid_core import CellMask, GridSpec, Pose, supercover_line, \
    world_to_cell, wrap_angle
from gridnav.world import FORWARD_STEP, TURN_STEP

ACTIONS = ("FORWARD", "LEFT", "RIGHT", "STOP")

# Planner signals that are not simulator actions.
REACHED = "STOP"
STUCK = "STUCK"

DEFAULT_GOAL_TOLERANCE = 0.25


def inflate_obstacles(obstacles: CellMask, spec: GridSpec,
                      inflation_radius: float) -> CellMask:
    """Dilate the obstacle mask by a Euclidean disk of the given radius (meters)."""
    if inflation_radius <= 0:
        return obstacles.copy()
    cells = int(math.floor(inflation_radius / spec.resolution + 1e-9))
    if cells <= 0:
        return obstacles.copy()
    size = 2 * cells + 1
    yy, xx = np.mgrid[-cells:cells + 1, -cells:cells + 1]
    disk = (yy ** 2 + xx ** 2) <= cells ** 2 + 1e-9
    assert disk.shape == (size, size)
    return ndimage.binary_dilation(obstacles, structure=disk)


def fmm_field(waypoint: tuple[int, int], obstacles: CellMask, spec: GridSpec,
              inflation_radius: float = 0.0) -> np.ndarray:
    """Geodesic distance (meters) from the waypoint to every cell.

    First-order upwind Eikonal solve; occupied and unreachable cells are
    infinite. Raises UnreachableGoalError when the waypoint is blocked
    after inflation.
    """
    blocked = inflate_obstacles(obstacles, spec, inflation_radius)
    wr, wc = waypoint
    if not spec.in_bounds(wr, wc):
        raise UnreachableGoalError(f"waypoint {waypoint} out of bounds")
    if blocked[wr, wc]:
        raise UnreachableGoalError(f"waypoint {waypoint} occupied after inflation")

    height, width = spec.shape
    h = spec.resolution
    dist = np.full((height, width), np.inf, dtype=np.float64)
    done = np.zeros((height, width), dtype=bool)
    dist[wr, wc] = 0.0
    heap = [(0.0, wr, wc)]
    while heap:
        d, r, c = heapq.heappop(heap)
        if done[r, c]:
            continue
        done[r, c] = True
        for nr, nc in ((r - 1, c), (r + 1, c), (r, c - 1), (r, c + 1)):
            if not (0 <= nr < height and 0 <= nc < width):
                continue
            if blocked[nr, nc] or done[nr, nc]:
                continue
            a = min(dist[nr - 1, nc] if nr > 0 else np.inf,
                    dist[nr + 1, nc] if nr < height - 1 else np.inf)
            b = min(dist[nr, nc - 1] if nc > 0 else np.inf,
                    dist[nr, nc + 1] if nc < width - 1 else np.inf)
            if a > b:
                a, b = b, a
            if b - a >= h or not math.isfinite(b):
                t = a + h
            else:
                t = 0.5 * (a + b + math.sqrt(2.0 * h * h - (b - a) ** 2))
            if t < dist[nr, nc]:
                dist[nr, nc] = t
                heapq.heappush(heap, (t, nr, nc))
    return dist


def _lookahead_offsets(radius: int):
    offsets = []
    for dr in range(-radius, radius + 1):
        for dc in range(-radius, radius + 1):
            if dr == 0 and dc == 0:
                continue
            offsets.append((dr, dc))
    return tuple(offsets)


_DESCENT_RADIUS = 3
_DESCENT_OFFSETS = _lookahead_offsets(_DESCENT_RADIUS)


def descent_direction(cell: tuple[int, int], field: np.ndarray) -> float | None:
    """World-frame angle toward the lowest-distance reachable cell nearby.

    Scans a small look-ahead window (finer angular resolution than the
    immediate 8-neighborhood) and requires the straight cell segment to the
    candidate to stay on finite-distance cells. Returns None when no finite
    neighbor exists.
    """
    r, c = cell
    height, width = field.shape
    best = None
    for dr, dc in _DESCENT_OFFSETS:
        nr, nc = r + dr, c + dc
        if not (0 <= nr < height and 0 <= nc < width):
            continue
        d = field[nr, nc]
        if not math.isfinite(d):
            continue
        if max(abs(dr), abs(dc)) > 1:
            if any(not math.isfinite(field[rr, cc])
                   for rr, cc in supercover_line(r, c, nr, nc)):
                continue
        if best is None or d < best[0]:
            best = (d, dr, dc)
    if best is None:
        return None
    _, dr, dc = best
    return math.atan2(dr, dc)


def next_action(pose: Pose, field: np.ndarray, spec: GridSpec,
                goal_tolerance: float = DEFAULT_GOAL_TOLERANCE,
                prev_action: str = "") -> str:
    """One discrete action descending the distance field.

    Returns "STOP" once the field distance at the pose is within the goal
    tolerance, "STUCK" when the agent sits on an unreachable cell, else
    FORWARD when roughly aligned with the descent direction and the
    forward cell is free, otherwise a single turn toward it (tie: LEFT).
    ``prev_action`` enables an anti-oscillation guard: a turn that would
    directly undo the previous turn is replaced by FORWARD when the
    forward sweep is free.
    """
    r, c = world_to_cell(pose, spec)
    d_here = field[r, c]
    if not math.isfinite(d_here):
        return STUCK
    if d_here <= goal_tolerance:
        return REACHED

    direction = descent_direction((r, c), field)
    if direction is None:
        return STUCK
    diff = wrap_angle(direction - pose.heading)

    fx = pose.x + FORWARD_STEP * math.cos(pose.heading)
    fy = pose.y + FORWARD_STEP * math.sin(pose.heading)
    forward_free = False
    if 0.0 <= fx < spec.width * spec.resolution and 0.0 <= fy < spec.height * spec.resolution:
        fr, fc = world_to_cell(Pose(fx, fy), spec)
        forward_free = all(math.isfinite(field[rr, cc])
                           for rr, cc in supercover_line(r, c, fr, fc))

    if abs(diff) <= TURN_STEP / 2.0 + 1e-12 and forward_free:
        return "FORWARD"
    if abs(abs(diff) - math.pi) <= 1e-12:
        return "LEFT"
    turn = "LEFT" if diff >= 0.0 else "RIGHT"
    opposite = {"LEFT": "RIGHT", "RIGHT": "LEFT"}
    if forward_free and prev_action == opposite[turn]:
        return "FORWARD"
    return turn
