"""Navigation metrics: NE, SR, OSR, SPL, nDTW, SDTW.

Success uses a strict 3 m threshold (NE < radius). nDTW is
exp(-DTW / (|reference| * d_th)) with Euclidean point cost and d_th equal
to the success radius.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

import numpy as np

from gridnav.grid_core import CellMask, GridSpec

SUCCESS_RADIUS = 3.0


@dataclass
class MetricBundle:
    ne: float
    sr: int
    osr: int
    spl: float
    ndtw: float
    sdtw: float
    trajectory_length: float

    def __post_init__(self):
        assert self.sdtw <= self.ndtw + 1e-12
        assert self.sdtw <= self.sr + 1e-12
        assert self.spl <= self.sr + 1e-12

    def to_json(self) -> dict:
        return {
            "ne": self.ne, "sr": self.sr, "osr": self.osr, "spl": self.spl,
            "ndtw": self.ndtw, "sdtw": self.sdtw,
            "trajectory_length": self.trajectory_length,
        }


def navigation_error(final_point, goal_point) -> float:
    return math.hypot(final_point[0] - goal_point[0], final_point[1] - goal_point[1])


def success(ne: float, radius: float = SUCCESS_RADIUS) -> int:
    """Strict threshold: exactly at the radius counts as failure."""
    return 1 if ne < radius else 0


def oracle_success(trajectory, goal_point, radius: float = SUCCESS_RADIUS) -> int:
    """1 iff any trajectory point comes within the radius of the goal."""
    for p in trajectory:
        if math.hypot(p[0] - goal_point[0], p[1] - goal_point[1]) < radius:
            return 1
    return 0


def trajectory_length(trajectory) -> float:
    total = 0.0
    for a, b in zip(trajectory, trajectory[1:]):
        total += math.hypot(b[0] - a[0], b[1] - a[1])
    return total


def spl(succeeded: int, shortest: float, taken: float) -> float:
    if shortest <= 0.0:
        return float(succeeded)
    return succeeded * shortest / max(shortest, taken)


def dtw(trajectory, reference) -> float:
    """Standard DTW with Euclidean point cost."""
    t = np.asarray(trajectory, dtype=np.float64)
    ref = np.asarray(reference, dtype=np.float64)
    n, m = len(t), len(ref)
    if n == 0 or m == 0:
        return math.inf
    acc = np.full((n + 1, m + 1), np.inf)
    acc[0, 0] = 0.0
    cost = np.hypot(t[:, None, 0] - ref[None, :, 0], t[:, None, 1] - ref[None, :, 1])
    for i in range(1, n + 1):
        row = cost[i - 1]
        for j in range(1, m + 1):
            acc[i, j] = row[j - 1] + min(acc[i - 1, j], acc[i, j - 1], acc[i - 1, j - 1])
    return float(acc[n, m])


def ndtw(trajectory, reference, d_th: float = SUCCESS_RADIUS) -> float:
    d = dtw(trajectory, reference)
    if not math.isfinite(d):
        return 0.0
    return math.exp(-d / (len(reference) * d_th))


def shortest_path_length(start_cell, goal_cell, navigable: CellMask,
                         spec: GridSpec) -> float:
    """8-neighbor Dijkstra geodesic (meters) on the navigable grid."""
    height, width = navigable.shape
    if not navigable[start_cell] or not navigable[goal_cell]:
        return math.inf
    straight = spec.resolution
    diag = spec.resolution * math.sqrt(2.0)
    dist = np.full((height, width), np.inf)
    dist[start_cell] = 0.0
    heap = [(0.0, start_cell[0], start_cell[1])]
    moves = [(-1, 0, straight), (1, 0, straight), (0, -1, straight), (0, 1, straight),
             (-1, -1, diag), (-1, 1, diag), (1, -1, diag), (1, 1, diag)]
    while heap:
        d, r, c = heapq.heappop(heap)
        if d > dist[r, c]:
            continue
        if (r, c) == tuple(goal_cell):
            return d
        for dr, dc, w in moves:
            nr, nc = r + dr, c + dc
            if not (0 <= nr < height and 0 <= nc < width) or not navigable[nr, nc]:
                continue
            # No corner cutting through diagonally adjacent obstacles.
            if dr and dc and not (navigable[r + dr, c] and navigable[r, c + dc]):
                continue
            nd = d + w
            if nd < dist[nr, nc]:
                dist[nr, nc] = nd
                heapq.heappush(heap, (nd, nr, nc))
    return math.inf


def compute_bundle(trajectory, reference, goal_point, shortest: float,
                   radius: float = SUCCESS_RADIUS) -> MetricBundle:
    """Full metric bundle for one episode."""
    ne = navigation_error(trajectory[-1], goal_point)
    sr = success(ne, radius)
    osr = oracle_success(trajectory, goal_point, radius)
    length = trajectory_length(trajectory)
    nd = ndtw(trajectory, reference, radius)
    return MetricBundle(
        ne=ne, sr=sr, osr=osr,
        spl=spl(sr, shortest, length),
        ndtw=nd, sdtw=nd * sr,
        trajectory_length=length,
    )


def aggregate(bundles) -> dict:
    """Mean metrics over an episode set."""
    if not bundles:
        return {}
    keys = ("ne", "osr", "sr", "spl", "ndtw", "sdtw", "trajectory_length")
    return {k: float(np.mean([getattr(b, k) for b in bundles])) for k in keys}


def report_table(agg: dict) -> str:
    """Aligned text table with the headline metric columns."""
    cols = [("NE", "ne"), ("OSR", "osr"), ("SR", "sr"), ("SPL", "spl"),
            ("NDTW", "ndtw"), ("SDTW", "sdtw")]
    header = "  ".join(f"{name:>6}" for name, _ in cols)
    row = "  ".join(f"{agg.get(key, float('nan')):6.3f}" for _, key in cols)
    return header + "\n" + row
