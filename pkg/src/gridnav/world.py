"""Synthetic 2D gridworld: floorplans, labeled landmarks, episodes.

Worlds are static: occupancy holds walls, landmarks occupy navigable-free
cells but do not occlude sight, and regions label room areas. Episodes
bundle a start pose, a goal cell, an instruction with its ground-truth
decomposition, and a reference path.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from gridnav.csm import SubInstruction
from gridnav.grid_core import (
    CellMask,
    Frustum,
    GridSpec,
    Pose,
    cell_center,
    supercover_line,
    visible_mask,
    world_to_cell,
    wrap_angle,
)

SCHEMA_VERSION = 1


@dataclass
class Landmark:
    label: str
    cells: list[tuple[int, int]]


@dataclass
class Region:
    label: str
    cells: list[tuple[int, int]]


@dataclass
class GridWorld:
    """Ground-truth map: walls, labeled landmarks, labeled room regions."""

    spec: GridSpec
    occupancy: CellMask
    landmarks: list[Landmark] = field(default_factory=list)
    regions: list[Region] = field(default_factory=list)
    navigable: CellMask = field(init=False)

    def __post_init__(self):
        if self.occupancy.shape != self.spec.shape:
            raise ValueError("occupancy shape does not match spec")
        solid = np.zeros(self.spec.shape, dtype=bool)
        for lm in self.landmarks:
            for r, c in lm.cells:
                if not self.spec.in_bounds(r, c):
                    raise ValueError(f"landmark {lm.label} cell {(r, c)} out of bounds")
                solid[r, c] = True
        for rg in self.regions:
            for r, c in rg.cells:
                if not self.spec.in_bounds(r, c):
                    raise ValueError(f"region {rg.label} cell {(r, c)} out of bounds")
        self.navigable = ~self.occupancy & ~solid

    def landmark_by_label(self, label: str) -> Optional[Landmark]:
        for lm in self.landmarks:
            if lm.label == label:
                return lm
        return None

    def region_by_label(self, label: str) -> Optional[Region]:
        for rg in self.regions:
            if rg.label == label:
                return rg
        return None

    def to_json(self) -> dict:
        rows = ["".join("1" if v else "0" for v in row) for row in self.occupancy]
        return {
            "schema_version": SCHEMA_VERSION,
            "spec": {
                "width": self.spec.width,
                "height": self.spec.height,
                "resolution": self.spec.resolution,
            },
            "occupancy": rows,
            "landmarks": [
                {"label": lm.label, "cells": [list(c) for c in lm.cells]}
                for lm in self.landmarks
            ],
            "regions": [
                {"label": rg.label, "cells": [list(c) for c in rg.cells]}
                for rg in self.regions
            ],
        }

    @classmethod
    def from_json(cls, d: dict) -> "GridWorld":
        spec = GridSpec(**d["spec"])
        occ = np.array(
            [[ch == "1" for ch in row] for row in d["occupancy"]], dtype=bool
        )
        landmarks = [
            Landmark(lm["label"], [tuple(c) for c in lm["cells"]])
            for lm in d["landmarks"]
        ]
        regions = [
            Region(rg["label"], [tuple(c) for c in rg["cells"]])
            for rg in d.get("regions", [])
        ]
        return cls(spec=spec, occupancy=occ, landmarks=landmarks, regions=regions)


@dataclass
class LandmarkHit:
    """A landmark inside the current view, with range and signed bearing."""

    label: str
    distance: float
    bearing: float
    cell: tuple[int, int]


@dataclass
class Observation:
    """Deterministic egocentric observation: visibility plus visible labels."""

    pose: Pose
    visible: CellMask
    landmark_hits: list[LandmarkHit]
    visible_regions: list[str]


def observe(world: GridWorld, pose: Pose, hfov: float, max_range: float) -> Observation:
    """Top-down egocentric observation at a pose."""
    frustum = Frustum(origin=pose, hfov=hfov, max_range=max_range)
    mask = visible_mask(frustum, world.occupancy, world.spec)
    hits = []
    for lm in world.landmarks:
        best = None
        for r, c in lm.cells:
            if not mask[r, c]:
                continue
            cx, cy = cell_center(r, c, world.spec)
            d = math.hypot(cx - pose.x, cy - pose.y)
            if best is None or d < best[0]:
                bearing = wrap_angle(math.atan2(cy - pose.y, cx - pose.x) - pose.heading)
                best = (d, bearing, (r, c))
        if best is not None:
            hits.append(LandmarkHit(lm.label, best[0], best[1], best[2]))
    hits.sort(key=lambda h: (h.distance, h.label))
    region_labels = [
        rg.label for rg in world.regions if any(mask[r, c] for r, c in rg.cells)
    ]
    return Observation(pose=pose, visible=mask, landmark_hits=hits,
                       visible_regions=region_labels)


FORWARD_STEP = 0.25
TURN_STEP = math.radians(30.0)


def apply_action(world: GridWorld, pose: Pose, action: str) -> tuple[Pose, bool]:
    """Apply one discrete action; returns (new pose, collided).

    A blocked FORWARD (any swept cell occupied, landmark-solid, or out of
    bounds) leaves the pose unchanged and flags the collision.
    """
    if action == "LEFT":
        return Pose(pose.x, pose.y, pose.heading + TURN_STEP), False
    if action == "RIGHT":
        return Pose(pose.x, pose.y, pose.heading - TURN_STEP), False
    if action == "STOP":
        return pose, False
    if action != "FORWARD":
        raise ValueError(f"unknown action {action!r}")

    nx = pose.x + FORWARD_STEP * math.cos(pose.heading)
    ny = pose.y + FORWARD_STEP * math.sin(pose.heading)
    spec = world.spec
    if not (0.0 <= nx < spec.width * spec.resolution
            and 0.0 <= ny < spec.height * spec.resolution):
        return pose, True
    r0, c0 = world_to_cell(pose, spec)
    target = Pose(nx, ny, pose.heading)
    r1, c1 = world_to_cell(target, spec)
    for r, c in supercover_line(r0, c0, r1, c1):
        if not world.navigable[r, c]:
            return pose, True
    return target, False


@dataclass
class Episode:
    """One navigation task over a world, with ground truth for the oracle."""

    id: str
    world: GridWorld
    start: Pose
    goal: tuple[int, int]
    instruction: str
    decomposition: list[SubInstruction]
    reference_path: list[tuple[int, int]]
    success_radius: float = 3.0
    step_budget: int = 500

    def goal_point(self) -> tuple[float, float]:
        return cell_center(self.goal[0], self.goal[1], self.world.spec)

    def to_json(self, include_world: bool = False) -> dict:
        d = {
            "schema_version": SCHEMA_VERSION,
            "id": self.id,
            "start": {"x": self.start.x, "y": self.start.y, "heading": self.start.heading},
            "goal": list(self.goal),
            "instruction": self.instruction,
            "decomposition": [s.to_json() for s in self.decomposition],
            "reference_path": [list(c) for c in self.reference_path],
            "success_radius": self.success_radius,
            "step_budget": self.step_budget,
        }
        if include_world:
            d["world"] = self.world.to_json()
        return d

    @classmethod
    def from_json(cls, d: dict, world: Optional[GridWorld] = None) -> "Episode":
        if world is None:
            world = GridWorld.from_json(d["world"])
        s = d["start"]
        return cls(
            id=d["id"],
            world=world,
            start=Pose(s["x"], s["y"], s["heading"]),
            goal=tuple(d["goal"]),
            instruction=d["instruction"],
            decomposition=[SubInstruction.from_json(x) for x in d["decomposition"]],
            reference_path=[tuple(c) for c in d["reference_path"]],
            success_radius=d.get("success_radius", 3.0),
            step_budget=d.get("step_budget", 500),
        )
