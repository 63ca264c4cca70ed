"""Shared world model: lab map, navigation graph, tracks, robots, hazards.

Everything here is an immutable snapshot value. Components hold and read
snapshots concurrently; only the coordinator builds new ones (via
``dataclasses.replace`` and the ``WorldState.with_*`` helpers).

Coordinate frame: meters, origin at the map's southwest corner, x east,
y north.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Iterable, Mapping, NamedTuple, Optional, Union


class Point(NamedTuple):
    x: float
    y: float

    def distance_to(self, other: "Point") -> float:
        return math.hypot(self.x - other.x, self.y - other.y)


class StationKind(Enum):
    RGBD = "rgbd"
    IR = "ir"


class Ppe(Enum):
    WEARING = "wearing"
    NOT_WEARING = "not_wearing"
    UNKNOWN = "unknown"


class Posture(Enum):
    UPRIGHT = "upright"
    PRONE = "prone"
    UNKNOWN = "unknown"


class MeepleColor(Enum):
    GREY = "grey"
    YELLOW = "yellow"
    RED = "red"


class HazardKind(Enum):
    PPE_VIOLATION = "ppe"
    ACCIDENT = "accident"
    FIRE = "fire"


class MapError(ValueError):
    """Raised when a map document is malformed or violates an invariant."""


@dataclass(frozen=True)
class StationPose:
    """A fixed monitoring station. RGB-D stations carry speakers and a
    horizontal field of view; IR stations only watch thermal zones."""

    id: str
    position: Point
    heading: float  # radians, in [-pi, pi]
    kind: StationKind
    hfov: Optional[float] = None  # radians, RGB-D only


@dataclass(frozen=True)
class ThermalZone:
    """A watched hot spot (e.g. a hotplate). ``alarmed`` tracks the last
    reading strictly: alarmed iff current > threshold. Incident hold-down
    is the coordinator's business, not the zone's."""

    id: str
    position: Point
    threshold: float  # degrees C
    sensor_min: float = 20.0
    sensor_max: float = 400.0
    current: float = 20.0
    alarmed: bool = False
    saturated: bool = False  # reading above sensor_max

    def with_reading(self, value: float) -> "ThermalZone":
        return replace(
            self,
            current=value,
            alarmed=value > self.threshold,
            saturated=value > self.sensor_max,
        )


@dataclass(frozen=True)
class NavGraph:
    """Undirected waypoint graph the robots navigate on."""

    nodes: Mapping[int, Point]
    edges: frozenset  # frozenset of (a, b) tuples with a < b

    def has_edge(self, a: int, b: int) -> bool:
        return (min(a, b), max(a, b)) in self.edges

    def neighbors(self, node: int) -> list[int]:
        out = []
        for a, b in self.edges:
            if a == node:
                out.append(b)
            elif b == node:
                out.append(a)
        return sorted(out)

    def edge_length(self, a: int, b: int) -> float:
        return self.nodes[a].distance_to(self.nodes[b])

    def is_connected(self) -> bool:
        if not self.nodes:
            return False
        start = next(iter(self.nodes))
        seen = {start}
        stack = [start]
        while stack:
            for n in self.neighbors(stack.pop()):
                if n not in seen:
                    seen.add(n)
                    stack.append(n)
        return len(seen) == len(self.nodes)


@dataclass(frozen=True)
class WorkerTrack:
    """A tracked (anonymized) person. ``color`` is derived, never stored."""

    id: str
    position: Point
    ppe: Ppe = Ppe.UNKNOWN
    posture: Posture = Posture.UNKNOWN

    @property
    def color(self) -> MeepleColor:
        return meeple_color(self)


def meeple_color(track: WorkerTrack) -> MeepleColor:
    """Map a track's safety state to its pawn color.

    Red if a possible accident (prone) was detected; else yellow if PPE is
    missing; else grey. Unknown states render grey so a half-initialized
    track never raises an alarm.
    """
    if track.posture is Posture.PRONE:
        return MeepleColor.RED
    if track.ppe is Ppe.NOT_WEARING:
        return MeepleColor.YELLOW
    return MeepleColor.GREY


@dataclass(frozen=True)
class RobotState:
    """A mobile robot pinned to the navigation graph."""

    id: str
    at_node: int
    path: tuple = ()  # remaining nodes to visit, consecutive graph edges
    frozen: bool = False
    target: Optional[int] = None


@dataclass(frozen=True)
class HazardEvent:
    """A typed safety incident trigger. Fire events carry a zone id as
    subject, the other kinds a worker id."""

    kind: HazardKind
    subject: str
    location: Point
    timestamp: float


@dataclass(frozen=True)
class LabMap:
    """Static world description loaded from a map document."""

    width: float
    height: float
    exits: tuple
    stations: tuple
    thermal_zones: tuple
    graph: NavGraph
    robot_starts: tuple = ()  # (robot id, node id) pairs

    def contains(self, p: Point) -> bool:
        return 0.0 <= p.x <= self.width and 0.0 <= p.y <= self.height

    def station(self, station_id: str) -> StationPose:
        for s in self.stations:
            if s.id == station_id:
                return s
        raise KeyError(station_id)

    def zone(self, zone_id: str) -> ThermalZone:
        for z in self.thermal_zones:
            if z.id == zone_id:
                return z
        raise KeyError(zone_id)


@dataclass(frozen=True)
class WorldState:
    """One published snapshot of everything the coordinator knows."""

    map: LabMap
    workers: tuple = ()
    robots: tuple = ()
    zones: tuple = ()
    hazards: tuple = ()  # active HazardEvents
    frozen: bool = False
    t: float = 0.0
    generation: int = 0

    def worker(self, worker_id: str) -> Optional[WorkerTrack]:
        for w in self.workers:
            if w.id == worker_id:
                return w
        return None

    def robot(self, robot_id: str) -> Optional[RobotState]:
        for r in self.robots:
            if r.id == robot_id:
                return r
        return None

    def zone(self, zone_id: str) -> Optional[ThermalZone]:
        for z in self.zones:
            if z.id == zone_id:
                return z
        return None

    def robot_position(self, robot: RobotState) -> Point:
        return self.map.graph.nodes[robot.at_node]

    def to_dict(self) -> dict:
        """JSON-safe snapshot used by /state and the event stream."""
        g = self.map.graph
        return {
            "t": self.t,
            "generation": self.generation,
            "frozen": self.frozen,
            "map": {
                "width": self.map.width,
                "height": self.map.height,
                "exits": [{"x": p.x, "y": p.y} for p in self.map.exits],
                "nodes": [
                    {"id": nid, "x": p.x, "y": p.y}
                    for nid, p in sorted(g.nodes.items())
                ],
                "edges": sorted([list(e) for e in g.edges]),
                "stations": [
                    {
                        "id": s.id,
                        "x": s.position.x,
                        "y": s.position.y,
                        "heading": s.heading,
                        "kind": s.kind.value,
                    }
                    for s in self.map.stations
                ],
            },
            "workers": [
                {
                    "id": w.id,
                    "x": w.position.x,
                    "y": w.position.y,
                    "ppe": w.ppe.value,
                    "posture": w.posture.value,
                    "color": w.color.value,
                }
                for w in self.workers
            ],
            "robots": [
                {
                    "id": r.id,
                    "node": r.at_node,
                    "x": self.robot_position(r).x,
                    "y": self.robot_position(r).y,
                    "path": list(r.path),
                    "target": r.target,
                    "frozen": r.frozen,
                }
                for r in self.robots
            ],
            "zones": [
                {
                    "id": z.id,
                    "x": z.position.x,
                    "y": z.position.y,
                    "threshold": z.threshold,
                    "current": z.current,
                    "alarmed": z.alarmed,
                    "saturated": z.saturated,
                }
                for z in self.zones
            ],
            "hazards": [
                {
                    "kind": h.kind.value,
                    "subject": h.subject,
                    "x": h.location.x,
                    "y": h.location.y,
                    "t": h.timestamp,
                }
                for h in self.hazards
            ],
        }


def initial_state(lab_map: LabMap) -> WorldState:
    robots = tuple(
        RobotState(id=rid, at_node=node) for rid, node in lab_map.robot_starts
    )
    return WorldState(
        map=lab_map, robots=robots, zones=lab_map.thermal_zones, generation=0
    )


# ---------------------------------------------------------------------------
# Map document loading

MapSource = Union[str, Path, dict]


def _require(doc: dict, key: str, context: str):
    if key not in doc:
        raise MapError(f"{context}: missing required field '{key}'")
    return doc[key]


def _point(doc: dict, context: str) -> Point:
    return Point(float(_require(doc, "x", context)), float(_require(doc, "y", context)))


def load_map(source: MapSource) -> LabMap:
    """Parse and validate a map document.

    Accepts a dict, a JSON string, or a path to a JSON file. The schema is::

        {width, height, exits:[{x,y}], stations:[{id,x,y,heading,kind,hfov?}],
         thermal_zones:[{id,x,y,threshold}], nodes:[{id,x,y}], edges:[[a,b]],
         robots:[{id,node}]}

    Raises MapError naming the offending element for any invariant
    violation (out-of-bounds positions, duplicate ids, edges to unknown
    nodes, disconnected graph, empty exit list).
    """
    if isinstance(source, dict):
        doc = source
    else:
        text = Path(source).read_text() if Path(str(source)).exists() else str(source)
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise MapError(f"map document is not valid JSON: {exc}") from exc

    width = float(_require(doc, "width", "map"))
    height = float(_require(doc, "height", "map"))
    if width <= 0 or height <= 0:
        raise MapError(f"map dimensions must be positive, got {width}x{height}")

    def in_bounds(p: Point) -> bool:
        return 0.0 <= p.x <= width and 0.0 <= p.y <= height

    exits = tuple(_point(e, "exit") for e in doc.get("exits", []))
    if not exits:
        raise MapError("map must declare at least one exit")
    for i, p in enumerate(exits):
        if not in_bounds(p):
            raise MapError(f"exit {i} at ({p.x}, {p.y}) lies outside the map")

    nodes: dict[int, Point] = {}
    for n in doc.get("nodes", []):
        nid = int(_require(n, "id", "node"))
        if nid < 1:
            raise MapError(f"node id {nid} invalid: ids must be >= 1 (0 means 'stay')")
        if nid in nodes:
            raise MapError(f"duplicate node id {nid}")
        p = _point(n, f"node {nid}")
        if not in_bounds(p):
            raise MapError(f"node {nid} at ({p.x}, {p.y}) lies outside the map")
        nodes[nid] = p
    if not nodes:
        raise MapError("map must declare at least one navigation node")

    edges = set()
    for e in doc.get("edges", []):
        a, b = int(e[0]), int(e[1])
        for nid in (a, b):
            if nid not in nodes:
                raise MapError(f"edge ({a}, {b}) references unknown node {nid}")
        if a == b:
            raise MapError(f"edge ({a}, {b}) is a self-loop")
        edges.add((min(a, b), max(a, b)))
    graph = NavGraph(nodes=nodes, edges=frozenset(edges))
    if not graph.is_connected():
        raise MapError("navigation graph is not connected")

    stations = []
    seen_station_ids = set()
    for s in doc.get("stations", []):
        sid = str(_require(s, "id", "station"))
        if sid in seen_station_ids:
            raise MapError(f"duplicate station id '{sid}'")
        seen_station_ids.add(sid)
        p = _point(s, f"station {sid}")
        if not in_bounds(p):
            raise MapError(f"station {sid} at ({p.x}, {p.y}) lies outside the map")
        heading = float(_require(s, "heading", f"station {sid}"))
        if not -math.pi <= heading <= math.pi:
            raise MapError(f"station {sid} heading {heading} outside [-pi, pi]")
        kind_raw = str(_require(s, "kind", f"station {sid}")).lower()
        try:
            kind = StationKind(kind_raw)
        except ValueError:
            raise MapError(f"station {sid} has unknown kind '{kind_raw}'") from None
        hfov = s.get("hfov")
        if kind is StationKind.RGBD:
            if hfov is None:
                raise MapError(f"station {sid} is rgbd and must declare hfov")
            hfov = float(hfov)
            if not 0.0 < hfov < math.pi:
                raise MapError(f"station {sid} hfov {hfov} outside (0, pi)")
        elif hfov is not None:
            raise MapError(f"station {sid} is ir and must not declare hfov")
        stations.append(StationPose(id=sid, position=p, heading=heading, kind=kind, hfov=hfov))

    zones = []
    seen_zone_ids = set()
    for z in doc.get("thermal_zones", []):
        zid = str(_require(z, "id", "thermal zone"))
        if zid in seen_zone_ids:
            raise MapError(f"duplicate thermal zone id '{zid}'")
        seen_zone_ids.add(zid)
        p = _point(z, f"thermal zone {zid}")
        if not in_bounds(p):
            raise MapError(f"thermal zone {zid} at ({p.x}, {p.y}) lies outside the map")
        threshold = float(_require(z, "threshold", f"thermal zone {zid}"))
        zone = ThermalZone(id=zid, position=p, threshold=threshold)
        if not zone.sensor_min < threshold <= zone.sensor_max:
            raise MapError(
                f"thermal zone {zid} threshold {threshold} outside sensor range "
                f"({zone.sensor_min}, {zone.sensor_max}]"
            )
        zones.append(zone)

    robot_starts = []
    seen_robot_ids = set()
    for r in doc.get("robots", []):
        rid = str(_require(r, "id", "robot"))
        if rid in seen_robot_ids:
            raise MapError(f"duplicate robot id '{rid}'")
        seen_robot_ids.add(rid)
        node = int(_require(r, "node", f"robot {rid}"))
        if node not in nodes:
            raise MapError(f"robot {rid} starts at unknown node {node}")
        robot_starts.append((rid, node))

    return LabMap(
        width=width,
        height=height,
        exits=exits,
        stations=tuple(stations),
        thermal_zones=tuple(zones),
        graph=graph,
        robot_starts=tuple(robot_starts),
    )


def dump_map(lab_map: LabMap) -> dict:
    """Inverse of load_map, for round-trip tests and tooling."""
    return {
        "width": lab_map.width,
        "height": lab_map.height,
        "exits": [{"x": p.x, "y": p.y} for p in lab_map.exits],
        "stations": [
            {
                "id": s.id,
                "x": s.position.x,
                "y": s.position.y,
                "heading": s.heading,
                "kind": s.kind.value,
                **({"hfov": s.hfov} if s.hfov is not None else {}),
            }
            for s in lab_map.stations
        ],
        "thermal_zones": [
            {"id": z.id, "x": z.position.x, "y": z.position.y, "threshold": z.threshold}
            for z in lab_map.thermal_zones
        ],
        "nodes": [
            {"id": nid, "x": p.x, "y": p.y}
            for nid, p in sorted(lab_map.graph.nodes.items())
        ],
        "edges": sorted([list(e) for e in lab_map.graph.edges]),
        "robots": [{"id": rid, "node": node} for rid, node in lab_map.robot_starts],
    }
