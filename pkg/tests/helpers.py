"""Independent oracles and small builders shared across the test suite.

Every oracle here is written from the contract, not from the package
internals: plain-loop Dijkstra variants, exhaustive alignment search for
DTW, and brute-force scans for the waypoint strategies. Agreement between
the package and these oracles is what the equivalence suites assert.
"""

from __future__ import annotations

import heapq
import math

import numpy as np

from gridnav.csm import SubInstruction, Constraint, OBJECT
from gridnav.grid_core import GridSpec, Pose, supercover_line
from gridnav.perception import Detection
from gridnav.world import Episode, GridWorld, Landmark


# ---------------------------------------------------------------------------
# Distance-field oracles
# ---------------------------------------------------------------------------

def dijkstra_4neighbor(goal, blocked, resolution: float) -> np.ndarray:
    """Plain 4-neighbor Dijkstra: the Manhattan-metric upper envelope."""
    height, width = blocked.shape
    dist = np.full((height, width), np.inf)
    if blocked[goal]:
        return dist
    dist[goal] = 0.0
    heap = [(0.0, goal[0], goal[1])]
    while heap:
        d, r, c = heapq.heappop(heap)
        if d > dist[r, c]:
            continue
        for nr, nc in ((r - 1, c), (r + 1, c), (r, c - 1), (r, c + 1)):
            if not (0 <= nr < height and 0 <= nc < width) or blocked[nr, nc]:
                continue
            nd = d + resolution
            if nd < dist[nr, nc]:
                dist[nr, nc] = nd
                heapq.heappush(heap, (nd, nr, nc))
    return dist


def _lattice_moves(radius: int):
    """Coprime lattice moves up to the radius, with interior line offsets."""
    moves = []
    for dr in range(-radius, radius + 1):
        for dc in range(-radius, radius + 1):
            if (dr, dc) == (0, 0) or math.gcd(abs(dr), abs(dc)) != 1:
                continue
            interior = [(r, c) for r, c in supercover_line(0, 0, dr, dc)
                        if (r, c) not in ((0, 0), (dr, dc))]
            moves.append((dr, dc, math.hypot(dr, dc), interior))
    return moves


def dijkstra_lattice(goal, blocked, resolution: float, radius: int = 2) -> np.ndarray:
    """High-connectivity Dijkstra: near-Euclidean lower envelope.

    Long moves are only taken when every supercover cell they sweep is
    free, so no move tunnels through walls or cuts corners.
    """
    moves = _lattice_moves(radius)
    height, width = blocked.shape
    dist = np.full((height, width), np.inf)
    if blocked[goal]:
        return dist
    dist[goal] = 0.0
    heap = [(0.0, goal[0], goal[1])]
    while heap:
        d, r, c = heapq.heappop(heap)
        if d > dist[r, c]:
            continue
        for dr, dc, length, interior in moves:
            nr, nc = r + dr, c + dc
            if not (0 <= nr < height and 0 <= nc < width) or blocked[nr, nc]:
                continue
            if any(blocked[r + ir, c + ic] for ir, ic in interior):
                continue
            nd = d + length * resolution
            if nd < dist[nr, nc]:
                dist[nr, nc] = nd
                heapq.heappush(heap, (nd, nr, nc))
    return dist


# ---------------------------------------------------------------------------
# Waypoint-strategy oracles (brute force, loop-based)
# ---------------------------------------------------------------------------

def oracle_pixel(values, navigable):
    best = None
    for r in range(values.shape[0]):
        for c in range(values.shape[1]):
            if not navigable[r, c]:
                continue
            if best is None or values[r, c] > values[best]:
                best = (r, c)
    return best


def oracle_frontier_cells(explored, navigable):
    height, width = explored.shape
    cells = []
    for r in range(height):
        for c in range(width):
            if not (navigable[r, c] and explored[r, c]):
                continue
            for nr, nc in ((r - 1, c), (r + 1, c), (r, c - 1), (r, c + 1)):
                if 0 <= nr < height and 0 <= nc < width and not explored[nr, nc]:
                    cells.append((r, c))
                    break
    return cells


def oracle_fbe(values, explored, navigable):
    cells = oracle_frontier_cells(explored, navigable)
    if not cells:
        return None
    return min(cells, key=lambda rc: (-values[rc], rc))


def oracle_best_superpixel(superpixels, values):
    """Exhaustive region-mean scan; ties to the lowest id."""
    best = None
    for sp in superpixels:
        mean = sum(values[r, c] for r, c in sp.cells) / len(sp.cells)
        if best is None or mean > best[0] + 1e-12 or \
                (abs(mean - best[0]) <= 1e-12 and sp.id < best[1].id):
            best = (mean, sp)
    return best[1]


def oracle_snap(point, cells):
    return min(cells, key=lambda rc: ((rc[0] - point[0]) ** 2
                                      + (rc[1] - point[1]) ** 2, rc))


def oracle_superpixel(superpixels, values):
    sp = oracle_best_superpixel(superpixels, values)
    centroid = (sum(r for r, _ in sp.cells) / len(sp.cells),
                sum(c for _, c in sp.cells) / len(sp.cells))
    return oracle_snap(centroid, sp.cells)


def oracle_orp(superpixels, values):
    sp = oracle_best_superpixel(superpixels, values)
    return min(sp.cells, key=lambda rc: (-values[rc], rc))


# ---------------------------------------------------------------------------
# DTW oracle: exhaustive enumeration of monotone alignments
# ---------------------------------------------------------------------------

def dtw_exhaustive(trajectory, reference) -> float:
    t = [tuple(p) for p in trajectory]
    ref = [tuple(p) for p in reference]
    n, m = len(t), len(ref)

    def cost(i, j):
        return math.hypot(t[i][0] - ref[j][0], t[i][1] - ref[j][1])

    best = [math.inf]

    def walk(i, j, acc):
        acc += cost(i, j)
        if acc >= best[0]:
            return
        if i == n - 1 and j == m - 1:
            best[0] = acc
            return
        if i + 1 < n:
            walk(i + 1, j, acc)
        if j + 1 < m:
            walk(i, j + 1, acc)
        if i + 1 < n and j + 1 < m:
            walk(i + 1, j + 1, acc)

    walk(0, 0, 0.0)
    return best[0]


# ---------------------------------------------------------------------------
# Small worlds and perception stubs
# ---------------------------------------------------------------------------

def box_occupancy(height: int, width: int, border: int = 2) -> np.ndarray:
    occ = np.zeros((height, width), dtype=bool)
    occ[:border, :] = occ[-border:, :] = True
    occ[:, :border] = occ[:, -border:] = True
    return occ


def door_episode(step_budget: int = 150) -> Episode:
    """One-room world with a single detectable door landmark."""
    spec = GridSpec(width=60, height=40, resolution=0.1)
    occ = box_occupancy(40, 60)
    world = GridWorld(spec=spec, occupancy=occ,
                      landmarks=[Landmark("door", [(20, 52)])])
    start_cell, goal_cell = (20, 8), (20, 50)
    path = [(20, c) for c in range(start_cell[1], goal_cell[1] + 1)]
    sub = SubInstruction.build("Go to the door.", [Constraint(OBJECT, "door")])
    return Episode(
        id="door-0",
        world=world,
        start=Pose((start_cell[1] + 0.5) * 0.1, (start_cell[0] + 0.5) * 0.1, 0.0),
        goal=goal_cell,
        instruction="Go to the door.",
        decomposition=[sub],
        reference_path=path,
        step_budget=step_budget,
    )


class StubPerception:
    """Scripted perception for CSM unit tests."""

    def __init__(self, detections=(), visible_locations=()):
        self.detections = list(detections)
        self.visible_locations = set(visible_locations)

    def detect_objects(self, pose, label):
        return [d for d in self.detections if d.label == label]

    def location_query(self, pose, location):
        return location in self.visible_locations


def detection(label: str, distance: float) -> Detection:
    return Detection(label=label, distance=distance, bearing=0.0)
