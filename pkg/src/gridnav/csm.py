"""Sub-instruction queue with constraint-checked switching.

Holds the decomposed instruction as an ordered queue of constraint sets,
evaluates the active set every step, and advances under min/max step
thresholds. Satisfied constraints latch until the set switches.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Optional, Sequence

from gridnav.grid_core import Pose

OBJECT = "object"
LOCATION = "location"
DIRECTION = "direction"
CONSTRAINT_KINDS = (OBJECT, LOCATION, DIRECTION)

LEFT = "left"
RIGHT = "right"


@dataclass(frozen=True)
class Constraint:
    """One completion criterion: an object in range, a visible location, or a turn."""

    kind: str
    argument: str = ""
    direction: Optional[str] = None

    def __post_init__(self):
        if self.kind not in CONSTRAINT_KINDS:
            raise ValueError(f"unknown constraint kind {self.kind!r}")
        if self.kind in (OBJECT, LOCATION) and not self.argument:
            raise ValueError(f"{self.kind} constraint needs a non-empty argument")
        if self.kind == DIRECTION and self.direction not in (LEFT, RIGHT):
            raise ValueError("direction constraint needs direction 'left' or 'right'")

    def to_json(self) -> dict:
        d = {"kind": self.kind}
        if self.argument:
            d["argument"] = self.argument
        if self.direction:
            d["direction"] = self.direction
        return d

    @classmethod
    def from_json(cls, d: dict) -> "Constraint":
        return cls(kind=d["kind"], argument=d.get("argument", ""),
                   direction=d.get("direction"))


@dataclass(frozen=True)
class SubInstruction:
    """One instruction segment with its constraint set and value-map prompt."""

    text: str
    constraints: tuple[Constraint, ...]
    landmark_prompt: str = ""

    def __post_init__(self):
        if not self.constraints:
            raise ValueError("sub-instruction needs at least one constraint")

    @classmethod
    def build(cls, text: str, constraints: Sequence[Constraint]) -> "SubInstruction":
        """Derive the landmark prompt from the object/location constraints."""
        names = [c.argument for c in constraints if c.kind in (OBJECT, LOCATION)]
        return cls(text=text, constraints=tuple(constraints),
                   landmark_prompt=" ".join(names))

    def to_json(self) -> dict:
        return {
            "text": self.text,
            "constraints": [c.to_json() for c in self.constraints],
            "landmark_prompt": self.landmark_prompt,
        }

    @classmethod
    def from_json(cls, d: dict) -> "SubInstruction":
        return cls(text=d["text"],
                   constraints=tuple(Constraint.from_json(c) for c in d["constraints"]),
                   landmark_prompt=d.get("landmark_prompt", ""))


@dataclass
class CsmConfig:
    r_object_range: float = 5.0
    tau_window: int = 5
    min_steps: int = 10
    max_steps: int = 25
    turn_threshold_deg: float = 45.0


def check_object(c: Constraint, pose: Pose, perception, r_object_range: float = 5.0) -> bool:
    """Satisfied iff a matching detection lies within the object range."""
    assert c.kind == OBJECT
    detections = perception.detect_objects(pose, c.argument)
    return any(d.distance <= r_object_range for d in detections)


def check_location(c: Constraint, pose: Pose, perception) -> bool:
    """Satisfied iff the named location is visible from the pose."""
    assert c.kind == LOCATION
    return bool(perception.location_query(pose, c.argument))


def check_direction(c: Constraint, history: Sequence[Pose], tau_window: int = 5,
                    turn_threshold_deg: float = 45.0) -> bool:
    """Compare headings at t and t-tau via 2D cross/dot products.

    Satisfied iff the turn sign matches the constraint and the turn
    magnitude reaches the threshold. Not assessable (False) until the
    window holds tau+1 poses.
    """
    assert c.kind == DIRECTION
    if len(history) < tau_window + 1:
        return False
    old = history[-(tau_window + 1)]
    now = history[-1]
    ux, uy = old.heading_vector()
    vx, vy = now.heading_vector()
    cross = ux * vy - uy * vx
    dot = max(-1.0, min(1.0, ux * vx + uy * vy))
    angle = math.acos(dot)
    if angle < math.radians(turn_threshold_deg):
        return False
    if c.direction == LEFT:
        return cross > 0.0
    return cross < 0.0


@dataclass
class CsmState:
    """Per-episode switching state over a decomposed queue."""

    queue: tuple[SubInstruction, ...]
    config: CsmConfig = field(default_factory=CsmConfig)
    active_index: int = 0
    steps_on_active: int = 0
    switch_event: bool = False
    pose_history: deque = field(init=False)
    satisfied_flags: list = field(init=False)

    def __post_init__(self):
        if not self.queue:
            raise ValueError("queue must hold at least one sub-instruction")
        self.queue = tuple(self.queue)
        self.pose_history = deque(maxlen=self.config.tau_window + 1)
        self._reset_flags()

    def _reset_flags(self):
        if self.active_index < len(self.queue):
            self.satisfied_flags = [False] * len(self.queue[self.active_index].constraints)
        else:
            self.satisfied_flags = []

    @property
    def terminal(self) -> bool:
        return self.active_index >= len(self.queue)

    @property
    def active(self) -> Optional[SubInstruction]:
        if self.terminal:
            return None
        return self.queue[self.active_index]

    def _check(self, c: Constraint, pose: Pose, perception) -> bool:
        if c.kind == OBJECT:
            return check_object(c, pose, perception, self.config.r_object_range)
        if c.kind == LOCATION:
            return check_location(c, pose, perception)
        return check_direction(c, self.pose_history, self.config.tau_window,
                               self.config.turn_threshold_deg)


def step(state: CsmState, pose: Pose, perception):
    """Advance the state machine by one step.

    Returns (state, active sub-instruction or None when terminal,
    switch_event). The queue index never decreases; a set switches when all
    its constraints are satisfied and the minimum dwell is met, or when the
    maximum dwell forces it.
    """
    state.pose_history.append(pose)
    state.switch_event = False
    if state.terminal:
        return state, None, False

    state.steps_on_active += 1
    active = state.queue[state.active_index]
    for i, c in enumerate(active.constraints):
        if not state.satisfied_flags[i]:
            state.satisfied_flags[i] = state._check(c, pose, perception)

    all_satisfied = all(state.satisfied_flags)
    cfg = state.config
    # max_steps == 0 disables the forced switch (the 0/0 configuration
    # switches exactly when satisfied, never on a stall).
    forced = cfg.max_steps > 0 and state.steps_on_active >= cfg.max_steps
    if (all_satisfied and state.steps_on_active >= cfg.min_steps) or forced:
        state.active_index += 1
        state.steps_on_active = 0
        state.switch_event = True
        state._reset_flags()

    return state, state.active, state.switch_event
