"""Perception backends: ground-truth oracle and remote HTTP with fixtures.

The oracle answers every query from gridworld geometry, so the whole
pipeline runs deterministically with no model inference. The remote
backend speaks a small JSON protocol (POST /similarity, /detect, /vqa,
/segment, /decompose) and supports record/replay fixtures keyed by a
request content hash, one JSON object per line.
"""

from __future__ import annotations

import hashlib
import json
import os
import threading
from dataclasses import dataclass
from typing import Optional, Protocol

import numpy as np
import requests

from gridnav.csm import Constraint, SubInstruction
from gridnav.errors import DecompositionError, FixtureError, TransportError
from gridnav.grid_core import CellMask, DEFAULT_HFOV, DEFAULT_MAX_RANGE, Pose
from gridnav.world import GridWorld, Observation, observe


@dataclass(frozen=True)
class Detection:
    """One detected object instance."""

    label: str
    distance: float
    bearing: float

    def __post_init__(self):
        if self.distance < 0:
            raise ValueError("detection distance must be >= 0")


@dataclass
class SimilarityQuery:
    """Observation handle plus the text prompt to score it against."""

    observation: Observation
    prompt: str

    def __post_init__(self):
        if not self.prompt:
            raise ValueError("prompt must be non-empty")


# An ordered list of SubInstruction; at least one element.
DecompositionResult = list


class PerceptionBackend(Protocol):
    def similarity_score(self, query: SimilarityQuery) -> float: ...

    def detect_objects(self, pose: Pose, label: str) -> list[Detection]: ...

    def location_query(self, pose: Pose, location: str) -> bool: ...

    def segment_target(self, pose: Pose, label: str) -> CellMask: ...

    def decompose_instruction(self, instruction: str) -> DecompositionResult: ...


def build_decomposition_prompt(instruction: str) -> str:
    """Four-part decomposition prompt: task description, output definition,
    few-shot example, and key content reminder."""
    task = (
        "You are helping a robot follow a navigation instruction. Split the "
        "instruction into ordered sub-instructions, each with the constraints "
        "that tell the robot the segment is complete."
    )
    output = (
        "Answer with JSON: {\"sub_instructions\": [{\"text\": str, "
        "\"constraints\": [{\"kind\": \"object\"|\"location\"|\"direction\", "
        "\"argument\": str, \"direction\": \"left\"|\"right\"}]}]}. Constraint "
        "kinds: object (a detectable object), location (a visible room or "
        "area), direction (a left or right turn)."
    )
    fewshot = (
        "Example instruction: \"Turn left to the living room, then go to the "
        "door.\" Example answer: {\"sub_instructions\": [{\"text\": \"Turn "
        "left to the living room.\", \"constraints\": [{\"kind\": "
        "\"direction\", \"direction\": \"left\"}, {\"kind\": \"location\", "
        "\"argument\": \"living room\"}]}, {\"text\": \"Go to the door.\", "
        "\"constraints\": [{\"kind\": \"object\", \"argument\": \"door\"}]}]}"
    )
    reminder = (
        "Keep the sub-instructions in the order they must be executed, keep "
        "every object and location name exactly as it appears in the "
        "instruction, and output JSON only."
    )
    return "\n\n".join([
        "Task: " + task,
        "Output: " + output,
        "Few-shot: " + fewshot,
        "Reminder: " + reminder,
        "Instruction: " + instruction,
    ])


def parse_decomposition_reply(reply: dict) -> DecompositionResult:
    """Parse the structured decomposition reply into sub-instructions."""
    try:
        subs = reply["sub_instructions"]
        if not subs:
            raise KeyError("empty sub_instructions")
        out = []
        for s in subs:
            constraints = [Constraint.from_json(c) for c in s["constraints"]]
            out.append(SubInstruction.build(s["text"], constraints))
        return out
    except (KeyError, TypeError, ValueError) as exc:
        raise DecompositionError(f"unparseable decomposition reply: {exc}",
                                 raw_reply=reply) from exc


class OraclePerception:
    """Answers queries from gridworld ground truth.

    Pure function of (world, pose, query); the last observation is memoized
    per pose so one step's CSM checks and similarity query share a single
    visibility computation.
    """

    def __init__(self, world: GridWorld, hfov: float = DEFAULT_HFOV,
                 max_range: float = DEFAULT_MAX_RANGE):
        self.world = world
        self.hfov = hfov
        self.max_range = max_range
        self._episode_decomposition: Optional[DecompositionResult] = None
        self._cache_key = None
        self._cache_obs: Optional[Observation] = None

    def bind_episode(self, episode) -> None:
        """Attach the episode whose ground-truth decomposition to serve."""
        self._episode_decomposition = list(episode.decomposition)
        self._cache_key = None
        self._cache_obs = None

    def observation_at(self, pose: Pose) -> Observation:
        key = (round(pose.x, 9), round(pose.y, 9), round(pose.heading, 9))
        if key != self._cache_key:
            self._cache_obs = observe(self.world, pose, self.hfov, self.max_range)
            self._cache_key = key
        return self._cache_obs

    def similarity_score(self, query: SimilarityQuery) -> float:
        """1 - d/(2*max_range) for the nearest visible prompt landmark, else 0."""
        obs = query.observation
        prompt = query.prompt.lower()
        best = None
        for hit in obs.landmark_hits:
            if hit.label.lower() in prompt:
                best = hit.distance if best is None else min(best, hit.distance)
        for rg in self.world.regions:
            if rg.label.lower() in prompt and rg.label in obs.visible_regions:
                mask = obs.visible
                for r, c in rg.cells:
                    if mask[r, c]:
                        cx = (c + 0.5) * self.world.spec.resolution
                        cy = (r + 0.5) * self.world.spec.resolution
                        d = float(np.hypot(cx - obs.pose.x, cy - obs.pose.y))
                        best = d if best is None else min(best, d)
        if best is None:
            return 0.0
        return float(min(1.0, max(0.0, 1.0 - best / (2.0 * self.max_range))))

    def detect_objects(self, pose: Pose, label: str) -> list[Detection]:
        obs = self.observation_at(pose)
        return [Detection(h.label, h.distance, h.bearing)
                for h in obs.landmark_hits if h.label == label]

    def location_query(self, pose: Pose, location: str) -> bool:
        obs = self.observation_at(pose)
        return location in obs.visible_regions

    def segment_target(self, pose: Pose, label: str) -> CellMask:
        obs = self.observation_at(pose)
        mask = self.world.spec.empty_mask()
        lm = self.world.landmark_by_label(label)
        if lm is not None:
            for r, c in lm.cells:
                if obs.visible[r, c]:
                    mask[r, c] = True
        return mask

    def decompose_instruction(self, instruction: str) -> DecompositionResult:
        if not instruction:
            raise ValueError("instruction must be non-empty")
        if self._episode_decomposition is None:
            raise ValueError("oracle has no bound episode decomposition")
        return list(self._episode_decomposition)


class FixtureStore:
    """One-JSON-object-per-line fixture cache keyed by request hash.

    Replay reads are atomic per lookup; record appends under a lock so
    concurrent episodes can share one store.
    """

    def __init__(self, path: str):
        self.path = path
        self._lock = threading.Lock()
        self._entries: dict[str, dict] = {}
        if os.path.exists(path):
            with open(path) as fh:
                for line in fh:
                    line = line.strip()
                    if line:
                        entry = json.loads(line)
                        self._entries[entry["key"]] = entry["response"]

    @staticmethod
    def request_key(endpoint: str, body: dict) -> str:
        stripped = {k: v for k, v in body.items() if k != "query_id"}
        canon = json.dumps({"endpoint": endpoint, "body": stripped},
                           sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode("utf-8")).hexdigest()

    def lookup(self, key: str) -> Optional[dict]:
        with self._lock:
            return self._entries.get(key)

    def record(self, key: str, endpoint: str, body: dict, response: dict) -> None:
        with self._lock:
            if key in self._entries:
                return
            self._entries[key] = response
            with open(self.path, "a") as fh:
                fh.write(json.dumps({"key": key, "endpoint": endpoint,
                                     "request": body, "response": response},
                                    sort_keys=True))
                fh.write("\n")


class RemotePerception:
    """HTTP perception client with record/replay fixture support.

    mode: "replay" serves fixtures only (missing -> FixtureError),
    "record" performs requests and appends fixtures, "live" always
    performs requests.
    """

    def __init__(self, endpoint: str = "", fixture_path: Optional[str] = None,
                 mode: str = "replay", timeout: float = 30.0):
        if mode not in ("replay", "record", "live"):
            raise ValueError(f"unknown mode {mode!r}")
        if mode != "replay" and not endpoint:
            raise ValueError("record/live modes need an endpoint")
        self.endpoint = endpoint.rstrip("/")
        self.mode = mode
        self.timeout = timeout
        self.store = FixtureStore(fixture_path) if fixture_path else None
        self._query_counter = 0
        self._lock = threading.Lock()

    def _next_query_id(self) -> str:
        with self._lock:
            self._query_counter += 1
            return f"q{self._query_counter:06d}"

    def _call(self, path: str, body: dict) -> dict:
        key = FixtureStore.request_key(path, body)
        if self.mode == "replay":
            if self.store is None:
                raise FixtureError("replay mode requires a fixture store")
            response = self.store.lookup(key)
            if response is None:
                raise FixtureError(f"no fixture for {path} request {key[:12]}")
            return response
        query_id = self._next_query_id()
        payload = dict(body, query_id=query_id)
        try:
            resp = requests.post(self.endpoint + path, json=payload,
                                 timeout=self.timeout)
            resp.raise_for_status()
            response = resp.json()
        except (requests.RequestException, ValueError) as exc:
            raise TransportError(f"remote call {path} failed: {exc}") from exc
        response.pop("query_id", None)
        if self.mode == "record" and self.store is not None:
            self.store.record(key, path, body, response)
        return response

    @staticmethod
    def _pose_body(pose: Pose) -> dict:
        return {"x": pose.x, "y": pose.y, "heading": pose.heading}

    @staticmethod
    def _observation_body(obs: Observation) -> dict:
        return {
            "pose": RemotePerception._pose_body(obs.pose),
            "landmarks": [
                {"label": h.label, "distance": h.distance, "bearing": h.bearing}
                for h in obs.landmark_hits
            ],
            "regions": list(obs.visible_regions),
        }

    def similarity_score(self, query: SimilarityQuery) -> float:
        body = {"observation": self._observation_body(query.observation),
                "prompt": query.prompt}
        response = self._call("/similarity", body)
        return float(min(1.0, max(0.0, response["score"])))

    def detect_objects(self, pose: Pose, label: str) -> list[Detection]:
        body = {"pose": self._pose_body(pose), "label": label}
        response = self._call("/detect", body)
        dets = [Detection(d["label"], d["distance"], d["bearing"])
                for d in response.get("detections", [])]
        return sorted(dets, key=lambda d: d.distance)

    def location_query(self, pose: Pose, location: str) -> bool:
        body = {"pose": self._pose_body(pose), "location": location,
                "question": f"Can you see the {location}?"}
        response = self._call("/vqa", body)
        return bool(response["answer"])

    def segment_target(self, pose: Pose, label: str) -> CellMask:
        body = {"pose": self._pose_body(pose), "label": label}
        response = self._call("/segment", body)
        cells = response.get("cells", [])
        shape = response["shape"]
        mask = np.zeros((shape[0], shape[1]), dtype=bool)
        for r, c in cells:
            mask[r, c] = True
        return mask

    def decompose_instruction(self, instruction: str) -> DecompositionResult:
        if not instruction:
            raise ValueError("instruction must be non-empty")
        body = {"instruction": instruction,
                "prompt": build_decomposition_prompt(instruction)}
        response = self._call("/decompose", body)
        return parse_decomposition_reply(response)
