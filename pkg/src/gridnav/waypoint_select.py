"""Waypoint selection over the effective value map.

Default strategy clusters the navigable region into SLIC-style superpixels
in (value, row, col) feature space and targets the centroid of the highest
mean-value cluster. Frontier, pixel-argmax, and region-then-pixel
baselines share the same interface. All tie-breaks are declared (lowest
superpixel id, row-major cell order) so selection is deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from gridnav.grid_core import CellMask

STRATEGIES = ("superpixel", "fbe", "pixel", "orp")

DEFAULT_REGION_SIZE = 48
DEFAULT_COMPACTNESS = 10.0


@dataclass
class Superpixel:
    id: int
    cells: list[tuple[int, int]]
    mean_value: float
    centroid: tuple[float, float]


@dataclass(frozen=True)
class Waypoint:
    cell: tuple[int, int]
    source: str


def _snap_to_cells(point: tuple[float, float], cells: np.ndarray) -> tuple[int, int]:
    """Nearest cell (Euclidean) from a candidate (N, 2) array; row-major tie-break."""
    d2 = (cells[:, 0] - point[0]) ** 2 + (cells[:, 1] - point[1]) ** 2
    order = np.lexsort((cells[:, 1], cells[:, 0], d2))
    r, c = cells[order[0]]
    return int(r), int(c)


def slic_partition(values: np.ndarray, navigable: CellMask,
                   region_size: int = DEFAULT_REGION_SIZE,
                   compactness: float = DEFAULT_COMPACTNESS,
                   max_iters: int = 10) -> list[Superpixel]:
    """Partition the navigable region into value-coherent superpixels.

    K-means in (value, row, col) with distance^2 =
    (dvalue * S / m)^2 + drow^2 + dcol^2, seeded on a region_size grid and
    run to convergence (at most max_iters). Orphaned fragments are merged
    into an adjacent superpixel so every cluster is connected.
    """
    if region_size < 2:
        raise ValueError("region_size must be >= 2")
    nav_cells = np.argwhere(navigable)
    if len(nav_cells) == 0:
        raise ValueError("no navigable cells to partition")

    height, width = navigable.shape
    value_scale = region_size / compactness

    # Seeds on a region_size lattice, snapped to the nearest navigable cell.
    seeds = []
    for sr in range(region_size // 2, height, region_size):
        for sc in range(region_size // 2, width, region_size):
            seeds.append(_snap_to_cells((sr, sc), nav_cells))
    seeds = sorted(set(seeds))
    if not seeds:
        seeds = [_snap_to_cells(((height - 1) / 2, (width - 1) / 2), nav_cells)]

    rows = nav_cells[:, 0].astype(np.float64)
    cols = nav_cells[:, 1].astype(np.float64)
    vals = values[nav_cells[:, 0], nav_cells[:, 1]].astype(np.float64)

    centers = np.array(
        [[values[r, c], float(r), float(c)] for r, c in seeds], dtype=np.float64
    )
    assign = np.zeros(len(nav_cells), dtype=np.int64)
    for _ in range(max_iters):
        d2 = ((vals[:, None] - centers[None, :, 0]) * value_scale) ** 2 \
            + (rows[:, None] - centers[None, :, 1]) ** 2 \
            + (cols[:, None] - centers[None, :, 2]) ** 2
        new_assign = np.argmin(d2, axis=1)
        if np.array_equal(new_assign, assign) and _ > 0:
            break
        assign = new_assign
        for k in range(len(centers)):
            member = assign == k
            if member.any():
                centers[k, 0] = vals[member].mean()
                centers[k, 1] = rows[member].mean()
                centers[k, 2] = cols[member].mean()

    label_grid = np.full((height, width), -1, dtype=np.int64)
    label_grid[nav_cells[:, 0], nav_cells[:, 1]] = assign
    label_grid = _enforce_connectivity(label_grid, navigable)

    superpixels = []
    labels = np.unique(label_grid[navigable])
    # Deterministic ids ordered by each cluster's first row-major cell.
    firsts = []
    for lab in labels:
        cells = np.argwhere(label_grid == lab)
        firsts.append((tuple(cells[0]), lab, cells))
    firsts.sort(key=lambda t: t[0])
    for new_id, (_, lab, cells) in enumerate(firsts):
        mean_val = float(values[cells[:, 0], cells[:, 1]].mean())
        centroid = (float(cells[:, 0].mean()), float(cells[:, 1].mean()))
        superpixels.append(Superpixel(
            id=new_id,
            cells=[(int(r), int(c)) for r, c in cells],
            mean_value=mean_val,
            centroid=centroid,
        ))
    return superpixels


def _enforce_connectivity(label_grid: np.ndarray, navigable: CellMask) -> np.ndarray:
    """Keep the largest component per label; merge fragments into neighbors.

    A fragment with no adjacent labeled neighbor (an isolated navigable
    island) becomes its own new label.
    """
    height, width = label_grid.shape
    out = np.full_like(label_grid, -1)
    comp_of = np.full_like(label_grid, -1)
    components = []  # (label, [cells])
    for r0, c0 in np.argwhere(navigable):
        if comp_of[r0, c0] != -1:
            continue
        lab = label_grid[r0, c0]
        comp_id = len(components)
        stack = [(int(r0), int(c0))]
        comp_of[r0, c0] = comp_id
        cells = []
        while stack:
            r, c = stack.pop()
            cells.append((r, c))
            for nr, nc in ((r - 1, c), (r + 1, c), (r, c - 1), (r, c + 1)):
                if 0 <= nr < height and 0 <= nc < width and comp_of[nr, nc] == -1 \
                        and navigable[nr, nc] and label_grid[nr, nc] == lab:
                    comp_of[nr, nc] = comp_id
                    stack.append((nr, nc))
        components.append((int(lab), cells))

    # Primary component per label: the largest, ties by first row-major cell.
    primary: dict[int, int] = {}
    for comp_id, (lab, cells) in enumerate(components):
        if lab not in primary:
            primary[lab] = comp_id
            continue
        cur_cells = components[primary[lab]][1]
        if len(cells) > len(cur_cells) or \
                (len(cells) == len(cur_cells) and min(cells) < min(cur_cells)):
            primary[lab] = comp_id

    for comp_id, (lab, cells) in enumerate(components):
        if primary[lab] == comp_id:
            for r, c in cells:
                out[r, c] = lab

    next_label = int(label_grid.max()) + 1
    # Iteratively absorb orphan fragments into an adjacent assigned label.
    pending = [comp_id for comp_id, (lab, _) in enumerate(components)
               if primary[lab] != comp_id]
    while pending:
        progressed = False
        still = []
        for comp_id in pending:
            _, cells = components[comp_id]
            neighbor_lab = None
            for r, c in sorted(cells):
                for nr, nc in ((r - 1, c), (r + 1, c), (r, c - 1), (r, c + 1)):
                    if 0 <= nr < height and 0 <= nc < width and out[nr, nc] != -1:
                        lab2 = int(out[nr, nc])
                        if neighbor_lab is None or lab2 < neighbor_lab:
                            neighbor_lab = lab2
                if neighbor_lab is not None:
                    break
            if neighbor_lab is None:
                still.append(comp_id)
            else:
                for r, c in cells:
                    out[r, c] = neighbor_lab
                progressed = True
        if not progressed:
            # Isolated islands: promote each remaining fragment to a new label.
            for comp_id in still:
                _, cells = components[comp_id]
                for r, c in cells:
                    out[r, c] = next_label
                next_label += 1
            break
        pending = still
    return out


def select_superpixel_waypoint(superpixels: list[Superpixel]) -> Waypoint:
    """Centroid of the highest mean-value superpixel; ties to the lowest id."""
    if not superpixels:
        raise ValueError("no superpixels to select from")
    best = max(superpixels, key=lambda s: (s.mean_value, -s.id))
    cells = np.array(best.cells)
    cell = _snap_to_cells(best.centroid, cells)
    return Waypoint(cell=cell, source="superpixel")


def frontier_mask(explored: CellMask, navigable: CellMask) -> CellMask:
    """Explored navigable cells with at least one unexplored 4-neighbor."""
    unexplored = ~explored
    adjacent = np.zeros_like(explored)
    adjacent[:-1, :] |= unexplored[1:, :]
    adjacent[1:, :] |= unexplored[:-1, :]
    adjacent[:, :-1] |= unexplored[:, 1:]
    adjacent[:, 1:] |= unexplored[:, :-1]
    return navigable & explored & adjacent


def select_fbe_waypoint(values: np.ndarray, explored: CellMask,
                        navigable: CellMask) -> Optional[Waypoint]:
    """Highest-value frontier cell; None when the frontier is exhausted."""
    frontier = frontier_mask(explored, navigable)
    cells = np.argwhere(frontier)
    if len(cells) == 0:
        return None
    vals = values[cells[:, 0], cells[:, 1]]
    order = np.lexsort((cells[:, 1], cells[:, 0], -vals))
    r, c = cells[order[0]]
    return Waypoint(cell=(int(r), int(c)), source="fbe")


def select_pixel_waypoint(values: np.ndarray, navigable: CellMask) -> Waypoint:
    """Global navigable argmax cell; row-major tie-break."""
    cells = np.argwhere(navigable)
    if len(cells) == 0:
        raise ValueError("no navigable cells")
    vals = values[cells[:, 0], cells[:, 1]]
    order = np.lexsort((cells[:, 1], cells[:, 0], -vals))
    r, c = cells[order[0]]
    return Waypoint(cell=(int(r), int(c)), source="pixel")


def select_orp_waypoint(superpixels: list[Superpixel], values: np.ndarray) -> Waypoint:
    """Argmax cell within the argmax-mean superpixel."""
    if not superpixels:
        raise ValueError("no superpixels to select from")
    best = max(superpixels, key=lambda s: (s.mean_value, -s.id))
    cells = np.array(best.cells)
    vals = values[cells[:, 0], cells[:, 1]]
    order = np.lexsort((cells[:, 1], cells[:, 0], -vals))
    r, c = cells[order[0]]
    return Waypoint(cell=(int(r), int(c)), source="orp")


def goal_waypoint(mask: CellMask, navigable: CellMask) -> Waypoint:
    """Centroid of a segmentation mask, snapped to the nearest navigable cell."""
    cells = np.argwhere(mask)
    if len(cells) == 0:
        raise ValueError("empty goal mask")
    centroid = (float(cells[:, 0].mean()), float(cells[:, 1].mean()))
    nav_cells = np.argwhere(navigable)
    if len(nav_cells) == 0:
        raise ValueError("no navigable cells")
    cell = _snap_to_cells(centroid, nav_cells)
    return Waypoint(cell=cell, source="goal_mask")
