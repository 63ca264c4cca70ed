"""Spatial safety reasoning over the navigation graph.

Safety perimeters are plain Euclidean disks around hazards, people and
exits. A node is safe when it clears all three perimeter kinds; a plan
destination is "too close" when it falls inside the hazard perimeter.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Mapping, Optional, Sequence

from .model import NavGraph, Point, RobotState


class BlockingRule(Enum):
    SAME_NODE = "same_node"
    SAME_OR_ADJACENT = "same_or_adjacent"


class PlanError(Enum):
    E1 = "e1"  # robots blocking each other
    E2 = "e2"  # suggested node does not exist
    E3 = "e3"  # destination too close to the hazard


class NoRouteError(Exception):
    """Exclusions (or the graph itself) disconnect start from goal."""


@dataclass(frozen=True)
class SafetyPolicy:
    hazard_radius: float = 2.0
    person_radius: float = 2.0
    exit_radius: float = 1.5
    blocking_rule: BlockingRule = BlockingRule.SAME_NODE

    def __post_init__(self):
        for name in ("hazard_radius", "person_radius", "exit_radius"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


def filter_safe_nodes(
    graph: NavGraph,
    hazards: Iterable[Point],
    workers: Iterable[Point],
    exits: Iterable[Point],
    policy: SafetyPolicy,
) -> list[int]:
    """Nodes strictly outside every safety perimeter, in ascending id order.

    A node survives when its distance exceeds hazard_radius from every
    hazard, person_radius from every worker, and exit_radius from every
    exit. An empty result is a valid return; the caller decides what to do.
    """
    hazards = list(hazards)
    workers = list(workers)
    exits = list(exits)
    safe = []
    for nid in sorted(graph.nodes):
        p = graph.nodes[nid]
        if any(p.distance_to(h) <= policy.hazard_radius for h in hazards):
            continue
        if any(p.distance_to(w) <= policy.person_radius for w in workers):
            continue
        if any(p.distance_to(e) <= policy.exit_radius for e in exits):
            continue
        safe.append(nid)
    return safe


@dataclass(frozen=True)
class PlanCheck:
    """Validation outcome: empty error set means the plan is executable."""

    errors: frozenset

    @property
    def success(self) -> bool:
        return not self.errors

    def codes(self) -> list[str]:
        return sorted(e.value for e in self.errors)


def validate_plan(
    assignments: Mapping[int, Optional[int]],
    graph: NavGraph,
    hazard: Point,
    robots: Sequence[RobotState],
    policy: SafetyPolicy,
) -> PlanCheck:
    """Score a reposition plan against the e1/e2/e3 taxonomy.

    ``assignments`` maps 1-based robot indexes to a destination node id,
    None meaning stay put. Stay resolves to the robot's current node, so a
    robot told to hold inside the hazard perimeter still scores e3.
    Assignments to nodes absent from the graph score e2 and are excluded
    from the e1/e3 checks (they resolve to no position).
    """
    errors = set()
    resolved: dict[int, int] = {}
    for idx, dest in assignments.items():
        robot = robots[idx - 1]
        if dest is None:
            resolved[idx] = robot.at_node
        elif dest not in graph.nodes:
            errors.add(PlanError.E2)
        else:
            resolved[idx] = dest

    indexes = sorted(resolved)
    for i, a in enumerate(indexes):
        for b in indexes[i + 1 :]:
            na, nb = resolved[a], resolved[b]
            if na == nb:
                errors.add(PlanError.E1)
            elif policy.blocking_rule is BlockingRule.SAME_OR_ADJACENT and graph.has_edge(na, nb):
                errors.add(PlanError.E1)

    for idx in indexes:
        if graph.nodes[resolved[idx]].distance_to(hazard) <= policy.hazard_radius:
            errors.add(PlanError.E3)

    return PlanCheck(errors=frozenset(errors))


def plan_route(
    graph: NavGraph,
    start: int,
    goal: int,
    excluded: Iterable[int] = (),
) -> list[int]:
    """Shortest path by total Euclidean length, avoiding excluded nodes.

    The start node is exempt from exclusion (a robot caught inside a
    perimeter must still be able to leave it). Raises NoRouteError when the
    exclusions disconnect start from goal.
    """
    if start not in graph.nodes:
        raise ValueError(f"start node {start} not in graph")
    if goal not in graph.nodes:
        raise ValueError(f"goal node {goal} not in graph")
    blocked = set(excluded) - {start}
    if goal in blocked:
        raise ValueError(f"goal node {goal} is excluded")
    if start == goal:
        return [start]

    dist = {start: 0.0}
    prev: dict[int, int] = {}
    heap = [(0.0, start)]
    done = set()
    while heap:
        d, node = heapq.heappop(heap)
        if node in done:
            continue
        done.add(node)
        if node == goal:
            break
        for nxt in graph.neighbors(node):
            if nxt in blocked or nxt in done:
                continue
            nd = d + graph.edge_length(node, nxt)
            if nd < dist.get(nxt, math.inf):
                dist[nxt] = nd
                prev[nxt] = node
                heapq.heappush(heap, (nd, nxt))

    if goal not in done:
        raise NoRouteError(f"no route from {start} to {goal} avoiding {sorted(blocked)}")
    path = [goal]
    while path[-1] != start:
        path.append(prev[path[-1]])
    path.reverse()
    return path


def route_length(graph: NavGraph, path: Sequence[int]) -> float:
    return sum(graph.edge_length(a, b) for a, b in zip(path, path[1:]))


def perimeter_nodes(graph: NavGraph, center: Point, radius: float) -> set[int]:
    """Node ids inside (or on) a disk; used to exclude hazard perimeters
    from routing."""
    return {nid for nid, p in graph.nodes.items() if p.distance_to(center) <= radius}
