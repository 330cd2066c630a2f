"""Procedural gridworlds and solvable episodes.

Three floorplan templates (corridor, rooms, maze) at 0.1 m resolution.
Episodes are built backwards from guarantees: a shortest reference path is
found first, guide points are chosen along it so that each is in line of
sight of the previous one within sensing range, landmarks are placed at
the guide points, and the constraint sequence mirrors that chain. Every
episode is therefore path-connected and every constraint detectable from
the reference path by construction.
"""

from __future__ import annotations

import heapq
import math
from collections import deque

import numpy as np

from gridnav.csm import Constraint, SubInstruction, OBJECT, LOCATION, DIRECTION
from gridnav.grid_core import GridSpec, Pose, cell_center, supercover_line
from gridnav.world import Episode, GridWorld, Landmark, Region

TEMPLATES = ("corridor", "rooms", "maze")

RESOLUTION = 0.1
CHAIN_RANGE = 3.8        # max anchor-to-guide distance, below sensing range
DETECT_RANGE = 5.0
STEP_BUDGETS = {"corridor": 250, "rooms": 250, "maze": 250}

_COLORS = ["red", "blue", "green", "white", "black", "yellow", "brown", "gray"]
_OBJECTS = ["chair", "table", "lamp", "plant", "sofa", "shelf", "cabinet",
            "vase", "statue", "bench"]
_REGIONS = ["living area", "kitchen", "bedroom", "office", "hallway",
            "dining area", "lobby", "study"]


def _object_labels(rng: np.random.Generator) -> list[str]:
    labels = [f"{c} {o}" for c in _COLORS for o in _OBJECTS]
    rng.shuffle(labels)
    return labels


def _corridor_occupancy(rng: np.random.Generator) -> np.ndarray:
    height, width = 48, 128
    occ = np.zeros((height, width), dtype=bool)
    occ[:2, :] = occ[-2:, :] = True
    occ[:, :2] = occ[:, -2:] = True
    # Partial partitions alternating from top and bottom create corners.
    n_stubs = 3
    xs = np.linspace(28, width - 28, n_stubs).astype(int)
    for i, x in enumerate(xs):
        x += int(rng.integers(-6, 7))
        depth = height - 14 - int(rng.integers(0, 6))
        if i % 2 == 0:
            occ[:depth, x:x + 2] = True
        else:
            occ[-depth:, x:x + 2] = True
    return occ


def _rooms_occupancy(rng: np.random.Generator):
    height = width = 96
    occ = np.zeros((height, width), dtype=bool)
    occ[:2, :] = occ[-2:, :] = True
    occ[:, :2] = occ[:, -2:] = True
    mid = height // 2
    occ[mid - 1:mid + 1, :] = True
    occ[:, mid - 1:mid + 1] = True
    # One door per shared wall, positions jittered.
    for horiz, fixed in ((True, mid), (False, mid)):
        for half in (0, 1):
            lo = 2 + half * mid
            hi = lo + mid - 4
            pos = int(rng.integers(lo + 8, hi - 8))
            if horiz:
                occ[fixed - 1:fixed + 1, pos:pos + 8] = False
            else:
                occ[pos:pos + 8, fixed - 1:fixed + 1] = False
    regions = []
    names = list(_REGIONS)
    rng.shuffle(names)
    quads = [(2, mid - 1, 2, mid - 1), (2, mid - 1, mid + 1, width - 2),
             (mid + 1, height - 2, 2, mid - 1),
             (mid + 1, height - 2, mid + 1, width - 2)]
    for name, (r0, r1, c0, c1) in zip(names, quads):
        cells = [(r, c) for r in range(r0, r1) for c in range(c0, c1)
                 if not occ[r, c]]
        regions.append(Region(name, cells))
    return occ, regions


def _maze_occupancy(rng: np.random.Generator) -> np.ndarray:
    blocks = 4
    cell = 16
    wall = 2
    size = wall + blocks * (cell + wall)
    occ = np.ones((size, size), dtype=bool)

    def carve_block(br, bc):
        r0 = wall + br * (cell + wall)
        c0 = wall + bc * (cell + wall)
        occ[r0:r0 + cell, c0:c0 + cell] = False

    def carve_link(a, b):
        (ar, ac), (br, bc) = a, b
        r0 = wall + ar * (cell + wall)
        c0 = wall + ac * (cell + wall)
        if ar == br:
            cmin = min(ac, bc)
            cc = wall + cmin * (cell + wall) + cell
            occ[r0 + 4:r0 + cell - 4, cc:cc + wall] = False
        else:
            rmin = min(ar, br)
            rr = wall + rmin * (cell + wall) + cell
            occ[rr:rr + wall, c0 + 4:c0 + cell - 4] = False

    visited = {(0, 0)}
    stack = [(0, 0)]
    carve_block(0, 0)
    while stack:
        br, bc = stack[-1]
        options = [(br + dr, bc + dc) for dr, dc in ((-1, 0), (1, 0), (0, -1), (0, 1))
                   if 0 <= br + dr < blocks and 0 <= bc + dc < blocks
                   and (br + dr, bc + dc) not in visited]
        if not options:
            stack.pop()
            continue
        nxt = options[int(rng.integers(len(options)))]
        visited.add(nxt)
        carve_block(*nxt)
        carve_link((br, bc), nxt)
        stack.append(nxt)
    # A few extra links turn the spanning tree into a braided maze so
    # exploration does not pay full dead-end backtracking costs.
    for _ in range(3):
        br = int(rng.integers(blocks))
        bc = int(rng.integers(blocks - 1))
        carve_link((br, bc), (br, bc + 1))
    return occ


def make_floorplan(seed: int, template: str):
    """Occupancy plus region labels for one template."""
    if template not in TEMPLATES:
        raise ValueError(f"unknown template {template!r}; choose from {TEMPLATES}")
    rng = np.random.default_rng((seed, 0xF100))
    if template == "corridor":
        return _corridor_occupancy(rng), []
    if template == "rooms":
        return _rooms_occupancy(rng)
    return _maze_occupancy(rng), []


def _bfs_distances(navigable: np.ndarray, start) -> np.ndarray:
    dist = np.full(navigable.shape, -1, dtype=np.int64)
    dist[start] = 0
    dq = deque([start])
    height, width = navigable.shape
    while dq:
        r, c = dq.popleft()
        for nr, nc in ((r - 1, c), (r + 1, c), (r, c - 1), (r, c + 1)):
            if 0 <= nr < height and 0 <= nc < width and navigable[nr, nc] \
                    and dist[nr, nc] < 0:
                dist[nr, nc] = dist[r, c] + 1
                dq.append((nr, nc))
    return dist


def _shortest_path(navigable: np.ndarray, start, goal):
    """8-neighbor Dijkstra path (no diagonal corner cutting), or None."""
    height, width = navigable.shape
    dist = np.full(navigable.shape, np.inf)
    dist[start] = 0.0
    parent = {start: None}
    heap = [(0.0, start)]
    moves = [(-1, 0, 1.0), (1, 0, 1.0), (0, -1, 1.0), (0, 1, 1.0),
             (-1, -1, math.sqrt(2)), (-1, 1, math.sqrt(2)),
             (1, -1, math.sqrt(2)), (1, 1, math.sqrt(2))]
    while heap:
        d, (r, c) = heapq.heappop(heap)
        if (r, c) == goal:
            path = []
            cur = goal
            while cur is not None:
                path.append(cur)
                cur = parent[cur]
            return path[::-1]
        if d > dist[r, c]:
            continue
        for dr, dc, w in moves:
            nr, nc = r + dr, c + dc
            if not (0 <= nr < height and 0 <= nc < width) or not navigable[nr, nc]:
                continue
            if dr and dc and not (navigable[r + dr, c] and navigable[r, c + dc]):
                continue
            nd = d + w
            if nd < dist[nr, nc]:
                dist[nr, nc] = nd
                parent[(nr, nc)] = (r, c)
                heapq.heappush(heap, (nd, (nr, nc)))
    return None


def _los_clear_cells(occ: np.ndarray, a, b) -> bool:
    cells = supercover_line(a[0], a[1], b[0], b[1])
    return not any(occ[r, c] for r, c in cells[1:-1]) if len(cells) > 2 else True


def _guide_chain(occ: np.ndarray, path, spec: GridSpec):
    """Greedy farthest-visible guide points along the path, ending at the goal."""
    max_step = CHAIN_RANGE / spec.resolution
    chain = []
    anchor_idx = 0
    while anchor_idx < len(path) - 1:
        anchor = path[anchor_idx]
        best = None
        for j in range(len(path) - 1, anchor_idx, -1):
            tgt = path[j]
            if math.hypot(tgt[0] - anchor[0], tgt[1] - anchor[1]) > max_step:
                continue
            if _los_clear_cells(occ, anchor, tgt):
                best = j
                break
        if best is None:
            # Narrow corner: fall back to the next path cell.
            best = anchor_idx + 1
        chain.append(path[best])
        anchor_idx = best
    return chain


def _turn_between(path, idx_a, idx_b) -> float:
    """Signed heading change (radians) of the path between two indices."""

    def heading_at(i):
        j = min(len(path) - 1, i + 3)
        k = max(0, i - 3)
        dr = path[j][0] - path[k][0]
        dc = path[j][1] - path[k][1]
        return math.atan2(dr, dc)

    d = heading_at(idx_b) - heading_at(idx_a)
    return (d + math.pi) % (2 * math.pi) - math.pi


def _place_landmark(occ: np.ndarray, navigable: np.ndarray, used: set,
                    path_cells: set, guide, anchor):
    """A free cell adjacent to the guide point, off the reference path.

    The cell must be in line of sight of the approach anchor, so the
    landmark is actually observable while its sub-instruction is active.
    """
    r0, c0 = guide
    height, width = navigable.shape
    for radius in (1, 2, 3):
        for dr in range(-radius, radius + 1):
            for dc in range(-radius, radius + 1):
                if max(abs(dr), abs(dc)) != radius:
                    continue
                r, c = r0 + dr, c0 + dc
                if not (0 <= r < height and 0 <= c < width):
                    continue
                if navigable[r, c] and (r, c) not in used \
                        and (r, c) not in path_cells \
                        and _los_clear_cells(occ, anchor, (r, c)) \
                        and _los_clear_cells(occ, guide, (r, c)):
                    return (r, c)
    return None


def generate_episodes(seed: int, template: str, count: int) -> list[Episode]:
    """Generate ``count`` solvable episodes; each carries its own world copy.

    Sub-instruction counts cycle through 1..7 as far as each floorplan's
    geometry allows.
    """
    occ, regions = make_floorplan(seed, template)
    height, width = occ.shape
    spec = GridSpec(width=width, height=height, resolution=RESOLUTION)
    base_navigable = ~occ
    episodes = []
    for i in range(count):
        rng = np.random.default_rng((seed, template.encode()[0], i))
        n_target = 1 + i % 7
        episode = _build_episode(
            f"{template}-s{seed}-e{i:03d}", occ, regions, spec, base_navigable,
            rng, n_target, STEP_BUDGETS[template])
        episodes.append(episode)
    return episodes


def _build_episode(ep_id, occ, regions, spec, base_navigable, rng, n_target,
                   step_budget):
    nav_cells = np.argwhere(base_navigable)
    labels = _object_labels(rng)
    region_lookup = {}
    for rg in regions:
        for cell in rg.cells:
            region_lookup[cell] = rg.label

    for attempt in range(60):
        start = tuple(int(v) for v in nav_cells[rng.integers(len(nav_cells))])
        dist = _bfs_distances(base_navigable, start)
        lo = (2.4 + 1.15 * n_target) / spec.resolution
        hi = lo + 1.5 / spec.resolution
        candidates = np.argwhere((dist >= lo) & (dist <= hi))
        if len(candidates) == 0:
            far = dist.max()
            if far < 3.3 / spec.resolution:
                continue
            candidates = np.argwhere(dist >= min(far * 0.8, lo))
            if len(candidates) == 0:
                continue
        goal = tuple(int(v) for v in candidates[rng.integers(len(candidates))])
        path = _shortest_path(base_navigable, start, goal)
        if path is None or len(path) < int(3.3 / spec.resolution):
            continue
        chain = _guide_chain(occ, path, spec)
        if not (1 <= len(chain) <= 7):
            continue
        if attempt < 40 and len(chain) != n_target:
            continue

        path_cells = set(path)
        used: set = set()
        landmark_cells = []
        ok = True
        anchor = start
        for guide in chain:
            cell = _place_landmark(occ, base_navigable, used, path_cells, guide,
                                   anchor)
            if cell is None:
                ok = False
                break
            used.add(cell)
            landmark_cells.append(cell)
            anchor = guide
        if not ok:
            continue

        # Landmarks must not disconnect the reference path.
        navigable = base_navigable.copy()
        for r, c in used:
            navigable[r, c] = False
        if _bfs_distances(navigable, start)[goal] < 0:
            continue

        landmarks = [Landmark(labels[k], [landmark_cells[k]])
                     for k in range(len(chain))]
        world = GridWorld(spec=spec, occupancy=occ.copy(),
                          landmarks=landmarks, regions=regions)

        subs = _constraint_sequence(chain, path, landmarks, region_lookup, rng)
        instruction = " ".join(s.text for s in subs)

        first = chain[0]
        fx, fy = cell_center(first[0], first[1], spec)
        sx, sy = cell_center(start[0], start[1], spec)
        heading = math.atan2(fy - sy, fx - sx)
        episode = Episode(
            id=ep_id,
            world=world,
            start=Pose(sx, sy, heading),
            goal=goal,
            instruction=instruction,
            decomposition=subs,
            reference_path=[tuple(p) for p in path],
            step_budget=step_budget,
        )
        return episode
    raise RuntimeError(f"could not construct a solvable episode for {ep_id}")


def _constraint_sequence(chain, path, landmarks, region_lookup, rng):
    """Ground-truth sub-instructions mirroring the guide chain."""
    path_index = {cell: i for i, cell in enumerate(path)}
    subs = []
    prev_idx = 0
    for k, (guide, lm) in enumerate(zip(chain, landmarks)):
        constraints = [Constraint(OBJECT, lm.label)]
        text = f"Go to the {lm.label}."
        idx = path_index.get(guide, prev_idx)
        turn = _turn_between(path, prev_idx, idx)
        if abs(turn) >= math.radians(75) and k > 0:
            side = "left" if turn > 0 else "right"
            constraints.append(Constraint(DIRECTION, direction=side))
            text = f"Turn {side} and go to the {lm.label}."
        region = region_lookup.get(guide)
        if region is not None and rng.random() < 0.5:
            constraints.append(Constraint(LOCATION, region))
            text = f"Go to the {lm.label} in the {region}."
        subs.append(SubInstruction.build(text, constraints))
        prev_idx = idx
    return subs
