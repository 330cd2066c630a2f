"""Episode execution: the per-step observe/switch/map/select/plan loop."""

from __future__ import annotations

import zlib
from dataclasses import dataclass, field, asdict
from typing import Optional

import numpy as np
from scipy import ndimage

from gridnav import csm as csm_mod
from gridnav import metrics as metrics_mod
from gridnav import planner, value_map, waypoint_select
from gridnav.csm import CsmConfig, CsmState, SubInstruction
from gridnav.errors import ConfigError
from gridnav.grid_core import DEFAULT_HFOV, DEFAULT_MAX_RANGE, Pose, bearing_field, \
    Frustum, world_to_cell
from gridnav.perception import OraclePerception, SimilarityQuery
from gridnav.world import Episode, apply_action, observe

STRATEGY_CHOICES = waypoint_select.STRATEGIES + ("random",)
BACKEND_CHOICES = ("oracle", "remote", "replay")

RANDOM_WAYPOINT_PERIOD = 10


@dataclass
class RunConfig:
    """Resolved configuration for a run; serialized into every results file."""

    backend: str = "oracle"
    strategy: str = "superpixel"
    hfov: float = DEFAULT_HFOV
    max_range: float = DEFAULT_MAX_RANGE
    gamma: float = value_map.DEFAULT_GAMMA
    lam: float = value_map.DEFAULT_LAMBDA
    reset_on_switch: bool = False
    disable_trajectory_mask: bool = False
    disable_historical_decay: bool = False
    region_size: int = waypoint_select.DEFAULT_REGION_SIZE
    compactness: float = waypoint_select.DEFAULT_COMPACTNESS
    r_object_range: float = 5.0
    tau_window: int = 5
    min_steps: int = 10
    max_steps: int = 25
    turn_threshold_deg: float = 45.0
    goal_tolerance: float = planner.DEFAULT_GOAL_TOLERANCE
    # None resolves to one grid cell at run time.
    inflation_radius: Optional[float] = None
    final_only_constraints: bool = False
    seed: int = 0
    jobs: int = 1
    snapshot_dir: str = ""
    remote_endpoint: str = ""
    fixture_path: str = ""

    def validate(self) -> None:
        if self.strategy not in STRATEGY_CHOICES:
            raise ConfigError(f"unknown strategy {self.strategy!r}; "
                              f"choose from {STRATEGY_CHOICES}")
        if self.backend not in BACKEND_CHOICES:
            raise ConfigError(f"unknown backend {self.backend!r}")
        if not (0.0 <= self.gamma <= 1.0):
            raise ConfigError("gamma must lie in [0, 1]")
        if not (0.0 < self.lam <= 1.0):
            raise ConfigError("lambda must lie in (0, 1]")
        if self.region_size < 2:
            raise ConfigError("region_size must be >= 2")
        if self.jobs < 1:
            raise ConfigError("jobs must be >= 1")

    def csm_config(self) -> CsmConfig:
        return CsmConfig(
            r_object_range=self.r_object_range,
            tau_window=self.tau_window,
            min_steps=self.min_steps,
            max_steps=self.max_steps,
            turn_threshold_deg=self.turn_threshold_deg,
        )

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, d: dict) -> "RunConfig":
        cfg = cls(**d)
        cfg.validate()
        return cfg


@dataclass
class StepRecord:
    step: int
    pose: tuple[float, float, float]
    action: str
    active_index: int
    switch_event: bool
    waypoint: Optional[tuple[int, int]]
    similarity: float

    def to_json(self) -> dict:
        return {
            "step": self.step,
            "pose": list(self.pose),
            "action": self.action,
            "active_index": self.active_index,
            "switch_event": self.switch_event,
            "waypoint": list(self.waypoint) if self.waypoint else None,
            "similarity": self.similarity,
        }


@dataclass
class EpisodeResult:
    episode_id: str
    stop_reason: str
    steps: int
    collisions: int
    metrics: metrics_mod.MetricBundle
    trajectory: list = field(default_factory=list)
    records: list = field(default_factory=list)

    def summary(self) -> dict:
        return {
            "episode_id": self.episode_id,
            "stop_reason": self.stop_reason,
            "steps": self.steps,
            "collisions": self.collisions,
            "metrics": self.metrics.to_json(),
        }


def _episode_rng(config: RunConfig, episode_id: str) -> np.random.Generator:
    return np.random.default_rng(
        (config.seed, zlib.crc32(episode_id.encode("utf-8")))
    )


def _goal_label(queue: list[SubInstruction]) -> Optional[str]:
    for c in queue[-1].constraints:
        if c.kind == csm_mod.OBJECT:
            return c.argument
    return None


def _strategy_waypoint(config, values, explored, navigable, rng, state):
    """Waypoint for the configured strategy; state carries the random hold."""
    if config.strategy == "random":
        held = state.get("random_wp")
        if held is None or state.get("random_age", 0) >= RANDOM_WAYPOINT_PERIOD:
            cells = np.argwhere(navigable)
            r, c = cells[rng.integers(len(cells))]
            held = waypoint_select.Waypoint(cell=(int(r), int(c)), source="random")
            state["random_wp"] = held
            state["random_age"] = 0
        state["random_age"] = state.get("random_age", 0) + 1
        return held
    if config.strategy == "pixel":
        return waypoint_select.select_pixel_waypoint(values, navigable)
    if config.strategy == "fbe":
        wp = waypoint_select.select_fbe_waypoint(values, explored, navigable)
        if wp is not None:
            return wp
        # Frontier exhausted: fall back to superpixel selection.
    superpixels = waypoint_select.slic_partition(
        values, navigable, config.region_size, config.compactness)
    if config.strategy == "orp":
        return waypoint_select.select_orp_waypoint(superpixels, values)
    return waypoint_select.select_superpixel_waypoint(superpixels)


EXPLORE_HOLD_STEPS = 80


def _exploration_waypoint(explored, navigable, rng, state, reached_cells,
                          agent_cell, directed):
    """Sticky exploration waypoint, held until reached or expired.

    ``directed`` (the value map still carries signal that merely went
    stale) explores the nearest frontier cell; without any signal the
    fallback is an undirected random unexplored cell. Map memory is what
    buys the efficient behavior: a freshly cleared map gets the blind one.
    """
    held = state.get("explore_wp")
    age = state.get("explore_age", 0)
    if held is not None and held.cell not in reached_cells \
            and age < EXPLORE_HOLD_STEPS \
            and not (held.source == "frontier" and explored[held.cell]):
        state["explore_age"] = age + 1
        return held
    cell = None
    if directed:
        frontier = navigable & ~explored & ndimage.binary_dilation(explored)
        candidates = [tuple(map(int, rc)) for rc in np.argwhere(frontier)
                      if tuple(map(int, rc)) not in reached_cells]
        if candidates:
            ar, ac = agent_cell
            cell = min(candidates,
                       key=lambda rc: ((rc[0] - ar) ** 2 + (rc[1] - ac) ** 2, rc))
            source = "frontier"
    if cell is None:
        pool = np.argwhere(navigable & ~explored)
        if len(pool) == 0:
            pool = np.argwhere(navigable)
        r, c = pool[rng.integers(len(pool))]
        cell = (int(r), int(c))
        source = "random"
    wp = waypoint_select.Waypoint(cell=cell, source=source)
    state["explore_wp"] = wp
    state["explore_age"] = 1
    return wp


def run_episode(episode: Episode, config: RunConfig,
                perception=None) -> EpisodeResult:
    """Run the full pipeline on one episode and return trajectory + metrics."""
    config.validate()
    world = episode.world
    spec = world.spec
    if perception is None:
        perception = OraclePerception(world, config.hfov, config.max_range)
    if hasattr(perception, "bind_episode"):
        perception.bind_episode(episode)

    queue = perception.decompose_instruction(episode.instruction)
    if config.final_only_constraints:
        queue = [queue[-1]]
    csm_state = CsmState(queue=tuple(queue), config=config.csm_config())
    vstate = value_map.ValueState(
        spec=spec, gamma=config.gamma, lam=config.lam,
        reset_on_switch=config.reset_on_switch,
        disable_trajectory_mask=config.disable_trajectory_mask,
        disable_historical_decay=config.disable_historical_decay,
    )
    rng = _episode_rng(config, episode.id)
    goal_label = _goal_label(list(queue))
    plan = _Planner(world, spec, config.inflation_radius)

    pose = episode.start
    trajectory = [(pose.x, pose.y)]
    records: list[StepRecord] = []
    explored = spec.empty_mask()
    strategy_state: dict = {}
    prompt = ""
    last_goal_wp = None
    reached_cells: set[tuple[int, int]] = set()
    stagnant_steps = 0
    collisions = 0
    stop_reason = "budget"
    steps_taken = 0

    for t in range(episode.step_budget):
        if hasattr(perception, "observation_at"):
            obs = perception.observation_at(pose)
        else:
            obs = observe(world, pose, config.hfov, config.max_range)
        explored |= obs.visible

        csm_state, active, switch_event = csm_mod.step(csm_state, pose, perception)
        if active is not None and active.landmark_prompt:
            prompt = active.landmark_prompt

        if prompt:
            score = perception.similarity_score(SimilarityQuery(obs, prompt))
        else:
            score = 0.0
        frustum = Frustum(origin=pose, hfov=config.hfov, max_range=config.max_range)
        value_map.observe(vstate, obs.visible, score, bearing_field(frustum, spec),
                          config.hfov)
        agent_cell = world_to_cell(pose, spec)
        value_map.on_step_end(vstate, agent_cell, switch_event)

        final_active = csm_state.terminal or \
            csm_state.active_index == len(csm_state.queue) - 1
        wp = None
        if final_active and goal_label and config.strategy != "random":
            seg = perception.segment_target(pose, goal_label)
            if seg.any():
                wp = waypoint_select.goal_waypoint(seg, world.navigable)
                last_goal_wp = wp
            elif csm_state.terminal and last_goal_wp is not None:
                wp = last_goal_wp
        if wp is None:
            # Terminal without goal evidence keeps exploring with the final
            # prompt until the segmentation shows up or the budget runs out.
            values = value_map.effective_value(vstate)
            wp = _strategy_waypoint(config, values, explored, world.navigable,
                                    rng, strategy_state)
            if config.strategy != "random" and wp.cell in reached_cells:
                # The strategy re-elected an exhausted pick: commit to an
                # exploration waypoint instead of camping on it.
                wp = _exploration_waypoint(explored, world.navigable, rng,
                                           strategy_state, reached_cells,
                                           agent_cell,
                                           directed=values.max() > 1e-9)

        # Plan on the raw map after a full spin without moving: the inflated
        # map can leave no legal heading inside tight passages.
        use_raw = stagnant_steps >= 13
        field = plan.field_for(wp.cell, agent_cell, raw=use_raw)
        prev_action = records[-1].action if records else ""
        action = planner.next_action(pose, field, spec, config.goal_tolerance,
                                     prev_action)
        if action == planner.STUCK:
            action = "LEFT"
        if action == "STOP":
            if wp.source == "goal_mask":
                steps_taken = t + 1
                records.append(StepRecord(t, (pose.x, pose.y, pose.heading), "STOP",
                                          csm_state.active_index, switch_event,
                                          wp.cell, score))
                stop_reason = "stop"
                break
            # Sitting on an intermediate waypoint: scan in place and
            # suppress the reached peak so selection moves on.
            value_map.mark_visited(vstate, wp.cell)
            reached_cells.add(wp.cell)
            action = "LEFT"

        records.append(StepRecord(t, (pose.x, pose.y, pose.heading), action,
                                  csm_state.active_index, switch_event, wp.cell, score))
        new_pose, collided = apply_action(world, pose, action)
        if collided:
            collisions += 1
        if (new_pose.x, new_pose.y) == (pose.x, pose.y):
            stagnant_steps += 1
        else:
            stagnant_steps = 0
        pose = new_pose
        trajectory.append((pose.x, pose.y))
        steps_taken = t + 1

        if config.snapshot_dir:
            value_map.save_snapshot(
                vstate, f"{config.snapshot_dir}/{episode.id}_step{t:04d}",
                {"step": t, "active_index": csm_state.active_index, "prompt": prompt},
            )

    goal_point = episode.goal_point()
    reference = [((c + 0.5) * spec.resolution, (r + 0.5) * spec.resolution)
                 for r, c in episode.reference_path]
    start_cell = world_to_cell(episode.start, spec)
    shortest = metrics_mod.shortest_path_length(start_cell, tuple(episode.goal),
                                                world.navigable, spec)
    bundle = metrics_mod.compute_bundle(trajectory, reference, goal_point, shortest,
                                        episode.success_radius)
    return EpisodeResult(
        episode_id=episode.id,
        stop_reason=stop_reason,
        steps=steps_taken,
        collisions=collisions,
        metrics=bundle,
        trajectory=trajectory,
        records=records,
    )


class _Planner:
    """Per-episode planning state: inflated obstacle map plus field cache."""

    def __init__(self, world, spec, inflation_radius: Optional[float]):
        radius = spec.resolution if inflation_radius is None else inflation_radius
        self.spec = spec
        self.obstacles = ~world.navigable
        self.inflated = planner.inflate_obstacles(self.obstacles, spec, radius)
        # Never inflate away the whole map.
        if self.inflated.all():
            self.inflated = self.obstacles.copy()
        self._free = np.argwhere(~self.inflated)
        self._free_raw = np.argwhere(~self.obstacles)
        self._cache: dict = {}

    def snap(self, cell, blocked, free):
        """Nearest unblocked cell (Euclidean, row-major tie-break)."""
        if not blocked[cell]:
            return cell
        d2 = (free[:, 0] - cell[0]) ** 2 + (free[:, 1] - cell[1]) ** 2
        order = np.lexsort((free[:, 1], free[:, 0], d2))
        r, c = free[order[0]]
        return int(r), int(c)

    def field_for(self, wp_cell, agent_cell, raw: bool = False):
        """Distance field to the waypoint; ``raw`` skips obstacle inflation.

        Raw planning is the escape hatch for tight passages where the
        inflated map leaves no room to maneuver; real collisions are still
        prevented by the simulator.
        """
        blocked = self.obstacles if raw else self.inflated
        free = self._free_raw if raw else self._free
        wp_cell = self.snap(wp_cell, blocked, free)
        key = (wp_cell, raw)
        field = self._cache.get(key)
        if field is None:
            field = planner.fmm_field(wp_cell, blocked, self.spec, 0.0)
            self._cache[key] = field
            if len(self._cache) > 8:
                self._cache.pop(next(iter(self._cache)))
        if not np.isfinite(field[agent_cell]) and not raw:
            # Agent inside the inflated band: plan on the raw map instead.
            return self.field_for(wp_cell, agent_cell, raw=True)
        return field


def run_episodes(episodes, config: RunConfig, perception_factory=None):
    """Run a list of episodes sequentially, returning results ordered by id."""
    results = []
    for ep in sorted(episodes, key=lambda e: e.id):
        perception = perception_factory(ep) if perception_factory else None
        results.append(run_episode(ep, config, perception))
    return results
