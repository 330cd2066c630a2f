"""Value-map state: cosine-confidence fusion, switch decay, visit masking.

The stored value and confidence matrices only change inside the visible
region of each observation; invisible cells carry over unchanged. The
visit-count mask is applied at read time (``effective_value``), never baked
into storage, so the per-cell weight is exactly lambda**visits.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from gridnav.grid_core import CellMask, GridSpec

log = logging.getLogger(__name__)

DEFAULT_GAMMA = 0.5
DEFAULT_LAMBDA = 0.95


def confidence_profile(theta, hfov: float):
    """Cosine-squared observation confidence by angular offset from the axis.

    Returns cos^2((theta / (hfov/2)) * pi/2) for theta < hfov/2, else 0.
    Accepts scalars or arrays.
    """
    theta = np.asarray(theta, dtype=np.float64)
    half = hfov / 2.0
    scaled = np.cos((theta / half) * (math.pi / 2.0)) ** 2
    out = np.where(theta < half, scaled, 0.0)
    if out.ndim == 0:
        return float(out)
    return out


@dataclass
class ValueState:
    """Global value map, confidence map, and visit counts for one episode."""

    spec: GridSpec
    gamma: float = DEFAULT_GAMMA
    lam: float = DEFAULT_LAMBDA
    reset_on_switch: bool = False
    disable_trajectory_mask: bool = False
    disable_historical_decay: bool = False
    values: np.ndarray = field(init=False)
    confidence: np.ndarray = field(init=False)
    visits: np.ndarray = field(init=False)

    def __post_init__(self):
        if not (0.0 <= self.gamma <= 1.0):
            raise ValueError("gamma must lie in [0, 1]")
        if not (0.0 < self.lam <= 1.0):
            raise ValueError("lambda must lie in (0, 1]")
        self.values = np.zeros(self.spec.shape, dtype=np.float64)
        self.confidence = np.zeros(self.spec.shape, dtype=np.float64)
        self.visits = np.zeros(self.spec.shape, dtype=np.int64)


def observe(state: ValueState, visible: CellMask, score: float, bearings: np.ndarray,
            hfov: float) -> ValueState:
    """Fuse one observation score into the visible region.

    Per visible cell, with c_obs = confidence_profile(theta):
        V <- (c_obs * score + c_prev * V) / (c_obs + c_prev)
        C <- (c_obs^2 + c_prev^2) / (c_obs + c_prev)
    The 0/0 case leaves the cell unchanged; invisible cells are untouched.
    """
    if visible.shape != state.spec.shape:
        raise ValueError("mask shape does not match grid spec")
    if not (0.0 <= score <= 1.0):
        log.warning("similarity score %.4f outside [0, 1]; clamping", score)
        score = min(1.0, max(0.0, score))
    c_obs = np.where(visible, confidence_profile(bearings, hfov), 0.0)
    c_prev = state.confidence
    denom = c_obs + c_prev
    update = visible & (denom > 0.0)
    v_new = np.divide(c_obs * score + c_prev * state.values, denom,
                      out=np.zeros_like(denom), where=update)
    c_new = np.divide(c_obs ** 2 + c_prev ** 2, denom,
                      out=np.zeros_like(denom), where=update)
    state.values = np.where(update, v_new, state.values)
    state.confidence = np.where(update, c_new, state.confidence)
    return state


def on_step_end(state: ValueState, agent_cell: tuple[int, int], switch_event: bool) -> ValueState:
    """Count the visit at the agent's cell and decay stored values on a switch."""
    row, col = agent_cell
    if not state.spec.in_bounds(row, col):
        raise ValueError(f"agent cell {agent_cell} out of bounds")
    state.visits[row, col] += 1
    if switch_event:
        if state.reset_on_switch:
            state.values[:] = 0.0
            state.confidence[:] = 0.0
        elif not state.disable_historical_decay:
            state.values *= state.gamma
    return state


def mark_visited(state: ValueState, cell: tuple[int, int], radius: int = 2) -> ValueState:
    """Count a visit over a square neighborhood of a cell.

    Used when the agent arrives at a selected waypoint: the trajectory mask
    then suppresses the surrounding value peak so selection moves on instead
    of re-electing a stale maximum.
    """
    row, col = cell
    r0, r1 = max(0, row - radius), min(state.spec.height, row + radius + 1)
    c0, c1 = max(0, col - radius), min(state.spec.width, col + radius + 1)
    state.visits[r0:r1, c0:c1] += 1
    return state


def effective_value(state: ValueState) -> np.ndarray:
    """Stored values down-weighted by lambda**visits; storage unmodified."""
    if state.disable_trajectory_mask or state.lam == 1.0:
        return state.values.copy()
    return state.values * np.power(state.lam, state.visits)


def save_snapshot(state: ValueState, path_prefix: str, header: dict) -> None:
    """Export value/confidence/visit matrices as PGM images plus a JSON header.

    One byte per cell, row-major, value * 255 rounded.
    """
    def write_pgm(path, matrix):
        data = np.clip(np.rint(matrix * 255.0), 0, 255).astype(np.uint8)
        h, w = data.shape
        with open(path, "wb") as fh:
            fh.write(f"P5 {w} {h} 255\n".encode("ascii"))
            fh.write(data.tobytes())

    write_pgm(path_prefix + "_value.pgm", state.values)
    write_pgm(path_prefix + "_confidence.pgm", state.confidence)
    write_pgm(path_prefix + "_visits.pgm", np.minimum(state.visits, 255) / 255.0)
    with open(path_prefix + ".json", "w") as fh:
        json.dump(header, fh, sort_keys=True)
        fh.write("\n")
