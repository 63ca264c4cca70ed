"""Model-backend plumbing: prompt construction, reply parsing, backends.

Two request shapes exist. Classification requests carry the verbatim query
texts for one strategy plus an image reference; reposition requests carry a
rendered map snapshot, a scene description and the mandated reply format.

The mock backend answers from a script file and is the test/replay
workhorse; the live backend speaks a minimal chat-with-image HTTP contract
(model name, prompt, base64 image) compatible with common local model
servers.
"""

from __future__ import annotations

import base64
import json
import re
import time
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Mapping, Optional, Sequence, Union

from .model import HazardEvent, LabMap, Point, RobotState, WorkerTrack, WorldState
from .perception import PROMPTS
from .safety import SafetyPolicy, filter_safe_nodes


class Condition(Enum):
    """Reposition prompting condition: how much node context is included."""

    C1 = "c1"  # no node list
    C2 = "c2"  # full list of valid nodes
    C3 = "c3"  # filtered list of safe nodes only


class NoSafeNodesError(Exception):
    """c3 filtering left nothing to offer; the caller must fall back."""


class UnscriptedRequestError(Exception):
    """The mock backend has no entry for this request fingerprint."""


class BackendError(Exception):
    """Live endpoint failure (network, HTTP status, timeout)."""


SYMBOL_LEGEND = "triangles for people, orange squares for robots, red circles for fires"

_TEMPLATE_PATH = Path(__file__).parent / "data" / "reposition_prompt.txt"


@dataclass(frozen=True)
class ClassificationRequest:
    strategy: str
    prompts: tuple  # (prompt_id, text) pairs in order
    image_ref: str

    @property
    def fingerprint(self) -> str:
        return self.strategy


@dataclass(frozen=True)
class RepositionRequest:
    condition: Condition
    hazard_kind: str
    robot_count: int
    text: str
    image_png: Optional[bytes] = None
    node_list: Optional[tuple] = None  # node ids offered, None under c1

    @property
    def fingerprint(self) -> str:
        return f"{self.hazard_kind}:{self.condition.value}"


@dataclass(frozen=True)
class PromptConfig:
    """Ingredients for one reposition prompt.

    Invariants: c1 has no node list, c2 lists every graph node, c3 lists
    exactly the filtered safe nodes. Use build_prompt_config to construct.
    """

    condition: Condition
    map_image: bytes
    description: str
    node_list: Optional[tuple] = None

    def __post_init__(self):
        if self.condition is Condition.C1 and self.node_list is not None:
            raise ValueError("c1 prompts must not carry a node list")
        if self.condition is not Condition.C1 and self.node_list is None:
            raise ValueError(f"{self.condition.value} prompts require a node list")


@dataclass(frozen=True)
class RepositionPlan:
    """Parsed node assignments: 1-based robot index -> node id or None
    (stay). parse_ok is False whenever any robot is missing or the text
    resists extraction; the caller counts that as a hallucination."""

    assignments: dict
    raw: str
    parse_ok: bool


def build_classification_prompt(strategy: str, image_ref: str) -> ClassificationRequest:
    """Request carrying the verbatim query texts for one strategy."""
    if strategy not in PROMPTS:
        raise ValueError(f"unknown strategy {strategy}")
    return ClassificationRequest(
        strategy=strategy, prompts=PROMPTS[strategy], image_ref=image_ref
    )


def scene_description(state: WorldState, hazard: HazardEvent) -> str:
    """Plain-text inventory of the map elements relevant to repositioning."""
    lines = [
        f"Incident: {hazard.kind.value} at ({hazard.location.x:.1f}, {hazard.location.y:.1f})."
    ]
    for i, r in enumerate(state.robots, start=1):
        p = state.robot_position(r)
        lines.append(
            f"ROBOT{i} (id {r.id}) is at node {r.at_node} ({p.x:.1f}, {p.y:.1f})."
        )
    for w in state.workers:
        lines.append(f"A person is at ({w.position.x:.1f}, {w.position.y:.1f}).")
    for z in state.zones:
        status = "ALARMED" if z.alarmed else "calm"
        lines.append(
            f"Monitored zone {z.id} at ({z.position.x:.1f}, {z.position.y:.1f}) "
            f"reads {z.current:.1f} C ({status})."
        )
    for e in state.map.exits:
        lines.append(f"An exit is at ({e.x:.1f}, {e.y:.1f}).")
    return "\n".join(lines)


def build_prompt_config(
    state: WorldState,
    hazard: HazardEvent,
    condition: Condition,
    policy: SafetyPolicy,
    map_image: bytes,
) -> PromptConfig:
    """Assemble the per-condition prompt ingredients from a state snapshot.

    Raises NoSafeNodesError when c3 filtering removes every node.
    """
    node_list: Optional[tuple] = None
    if condition is Condition.C2:
        node_list = tuple(sorted(state.map.graph.nodes))
    elif condition is Condition.C3:
        risk_areas = {h.location for h in state.hazards} | {hazard.location}
        safe = filter_safe_nodes(
            state.map.graph,
            hazards=sorted(risk_areas),
            workers=[w.position for w in state.workers],
            exits=state.map.exits,
            policy=policy,
        )
        if not safe:
            raise NoSafeNodesError(
                f"no node clears the safety perimeters for {hazard.kind.value}"
            )
        node_list = tuple(safe)
    return PromptConfig(
        condition=condition,
        map_image=map_image,
        description=scene_description(state, hazard),
        node_list=node_list,
    )


def format_reposition(assignments: Mapping[int, Optional[int]]) -> str:
    """Render assignments in the mandated reply format (0 = no movement)."""
    parts = [
        f"ROBOT{idx}: [{0 if node is None else node}]"
        for idx, node in sorted(assignments.items())
    ]
    return ", ".join(parts)


def reply_format_line(robot_count: int) -> str:
    letters = "XYZUVW"
    parts = [
        f"ROBOT{i + 1}: [{letters[i % len(letters)]}]" for i in range(robot_count)
    ]
    return ", ".join(parts)


def build_reposition_prompt(
    config: PromptConfig, hazard: HazardEvent, robot_count: int
) -> RepositionRequest:
    """Fill the versioned prompt template with scene, legend and node list."""
    if config.condition is Condition.C1:
        node_section = ""
    elif config.condition is Condition.C2:
        node_section = "Valid navigation nodes: " + ", ".join(
            str(n) for n in config.node_list
        ) + "."
    else:
        node_section = "Safe navigation nodes (choose only from these): " + ", ".join(
            str(n) for n in config.node_list
        ) + "."
    template = _TEMPLATE_PATH.read_text()
    text = template.format(
        description=config.description,
        legend=SYMBOL_LEGEND,
        node_section=node_section,
        format_line=reply_format_line(robot_count),
    )
    return RepositionRequest(
        condition=config.condition,
        hazard_kind=hazard.kind.value,
        robot_count=robot_count,
        text=text,
        image_png=config.map_image,
        node_list=config.node_list,
    )


_TOLERANT_ENTRY = re.compile(r"ROBOT\s*(\d+)\s*[:=]\s*\[?\s*(\d+)\s*\]?", re.IGNORECASE)
_STRICT_LINE = re.compile(
    r"^\s*ROBOT1:\s\[\d+\](?:,\sROBOT\d+:\s\[\d+\])*\s*$"
)
_STRICT_ENTRY = re.compile(r"ROBOT(\d+): \[(\d+)\]")


def parse_reposition(raw: str, robot_count: int, strict: bool = False) -> RepositionPlan:
    """Extract per-robot node assignments from a model reply.

    Tolerant mode accepts case and whitespace variation and optional
    brackets, and ignores surrounding prose. Strict mode requires the
    canonical "ROBOT1: [X], ROBOT2: [Y], ..." line and nothing else.
    parse_ok is True only when every robot 1..robot_count has exactly one
    assignment and no entry names an unknown robot. Node numbers are taken
    at face value here; nonexistent nodes are the validator's business.
    """
    if robot_count < 1:
        raise ValueError("robot_count must be >= 1")
    if strict and not _STRICT_LINE.match(raw):
        return RepositionPlan(assignments={}, raw=raw, parse_ok=False)
    entry_re = _STRICT_ENTRY if strict else _TOLERANT_ENTRY
    found: dict[int, int] = {}
    for m in entry_re.finditer(raw):
        idx, node = int(m.group(1)), int(m.group(2))
        if idx < 1 or idx > robot_count or idx in found:
            return RepositionPlan(assignments={}, raw=raw, parse_ok=False)
        found[idx] = node
    if len(found) != robot_count:
        return RepositionPlan(assignments={}, raw=raw, parse_ok=False)
    assignments = {idx: (None if node == 0 else node) for idx, node in found.items()}
    return RepositionPlan(assignments=assignments, raw=raw, parse_ok=True)


# ---------------------------------------------------------------------------
# Backends


@dataclass(frozen=True)
class ClassificationReply:
    responses: dict  # prompt id -> text
    latency: float = 0.0


@dataclass(frozen=True)
class RepositionReply:
    text: str
    latency: float = 0.0


class MockBackend:
    """Deterministic scripted backend for tests and replays.

    The script maps request fingerprints to canned replies::

        {
          "Q1": "YES",
          "Q4": ["YES", "NO", "A white lab coat."],
          "fire:c3": "ROBOT1: [2], ROBOT2: [7], ROBOT3: [11]",
          "accident:c3": {"policy": "first_safe", "latency": 0.4}
        }

    Classification fingerprints are strategy ids; reposition fingerprints
    are "<hazard>:<condition>" with "*" as a wildcard. Reply values may be
    a string, a list of strings (one per prompt), or an object with
    "reply"/"policy" plus optional "latency". Policies compute a reply from
    the request: "first_safe" assigns the lowest offered nodes one per
    robot (0 when the list runs out), "stay" answers all zeros,
    "nonexistent" names a node that is never in a graph.
    """

    def __init__(self, script: Union[Mapping, str, Path, None] = None):
        if script is None:
            script = {}
        elif isinstance(script, (str, Path)):
            script = json.loads(Path(script).read_text())
        self.script = dict(script)

    def _lookup(self, fingerprint: str):
        if fingerprint in self.script:
            return self.script[fingerprint]
        if "*" in self.script:
            return self.script["*"]
        raise UnscriptedRequestError(fingerprint)

    def classify(self, request: ClassificationRequest) -> ClassificationReply:
        entry = self._lookup(request.fingerprint)
        latency = 0.0
        if isinstance(entry, Mapping):
            latency = float(entry.get("latency", 0.0))
            entry = entry.get("reply")
        if isinstance(entry, str):
            texts = [entry]
        else:
            texts = list(entry)
        if len(texts) != len(request.prompts):
            raise UnscriptedRequestError(
                f"{request.fingerprint}: script has {len(texts)} replies "
                f"for {len(request.prompts)} prompts"
            )
        responses = {pid: text for (pid, _), text in zip(request.prompts, texts)}
        return ClassificationReply(responses=responses, latency=latency)

    def reposition(self, request: RepositionRequest) -> RepositionReply:
        entry = self._lookup(request.fingerprint)
        latency = 0.0
        if isinstance(entry, Mapping):
            latency = float(entry.get("latency", 0.0))
            if "reply" in entry:
                return RepositionReply(text=str(entry["reply"]), latency=latency)
            policy = entry.get("policy")
            return RepositionReply(
                text=self._apply_policy(policy, request), latency=latency
            )
        return RepositionReply(text=str(entry), latency=latency)

    @staticmethod
    def _apply_policy(policy: str, request: RepositionRequest) -> str:
        if policy == "stay":
            return format_reposition({i: None for i in range(1, request.robot_count + 1)})
        if policy == "nonexistent":
            return format_reposition(
                {i: 999 for i in range(1, request.robot_count + 1)}
            )
        if policy == "first_safe":
            offered = list(request.node_list or ())
            assignments: dict[int, Optional[int]] = {}
            for i in range(1, request.robot_count + 1):
                assignments[i] = offered.pop(0) if offered else None
            return format_reposition(assignments)
        raise UnscriptedRequestError(f"unknown script policy '{policy}'")


class LiveBackend:
    """Client for a local chat-with-image endpoint.

    Sends {"model", "prompt", "images": [b64], "stream": false} and reads
    the reply text from the usual response keys. Latency is measured
    wall-clock; failures raise BackendError.
    """

    def __init__(self, endpoint: str, model: str, timeout: float = 60.0):
        self.endpoint = endpoint
        self.model = model
        self.timeout = timeout

    def _generate(self, prompt: str, image: Optional[bytes]) -> tuple[str, float]:
        import httpx

        payload: dict = {"model": self.model, "prompt": prompt, "stream": False}
        if image is not None:
            payload["images"] = [base64.b64encode(image).decode("ascii")]
        started = time.monotonic()
        try:
            resp = httpx.post(self.endpoint, json=payload, timeout=self.timeout)
            resp.raise_for_status()
        except Exception as exc:
            raise BackendError(f"endpoint failure: {exc}") from exc
        elapsed = time.monotonic() - started
        body = resp.json()
        for key in ("response", "text", "content"):
            if key in body:
                return str(body[key]), elapsed
        raise BackendError(f"no reply text in response keys {sorted(body)}")

    def classify(self, request: ClassificationRequest) -> ClassificationReply:
        responses = {}
        total = 0.0
        for pid, text in request.prompts:
            reply, elapsed = self._generate(text, None)
            responses[pid] = reply
            total += elapsed
        return ClassificationReply(responses=responses, latency=total)

    def reposition(self, request: RepositionRequest) -> RepositionReply:
        reply, elapsed = self._generate(request.text, request.image_png)
        return RepositionReply(text=reply, latency=elapsed)
