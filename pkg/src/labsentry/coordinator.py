"""Central event loop: world state, response flows, robot commands.

All inputs (detection frames, thermal readings, injections, ticks, config
patches) enter as timestamped events and are handled one at a time; each
handler mutates the working state and appends to the append-only action
log, the primary verification surface. Identical event streams against the
same backend script produce byte-identical action logs.

Response flows follow the three hazard kinds:

* PPE violation: freeze the fleet, cycle verbal warnings from the nearest
  RGB-D station, run a countdown; escalate with a single notification if
  the violation outlives it. Robots stay frozen for the whole incident.
* Accident (prone worker): notify immediately with a map snapshot, then ask
  the model backend where to send the robots so the passage stays clear.
* Fire (thermal threshold crossed): reposition first, notify after.

A reposition plan is executed only when it parses and validates cleanly;
otherwise the robots hold position and the incident is annotated for
manual intervention. While the fleet is frozen no motion command of any
kind is emitted.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable, Optional

from .model import (
    HazardEvent,
    HazardKind,
    LabMap,
    Point,
    Posture,
    Ppe,
    RobotState,
    StationKind,
    ThermalZone,
    WorkerTrack,
    WorldState,
    initial_state,
)
from .notify import WARNING_PHRASES, Notifier, Receipt, speak
from .perception import Debouncer, DetectionFrame, Verdict, classify_ppe, classify_posture, project_detection
from .render import MapSnapshot, RenderConfig, render_2d
from .safety import NoRouteError, SafetyPolicy, perimeter_nodes, plan_route, validate_plan
from .vlm import (
    BackendError,
    Condition,
    MockBackend,
    NoSafeNodesError,
    UnscriptedRequestError,
    build_prompt_config,
    build_reposition_prompt,
    parse_reposition,
)

MANUAL_NOTE = "manual intervention required"


@dataclass(frozen=True)
class PolicyConfig:
    """Tunable response parameters (the /config surface)."""

    countdown: float = 600.0  # seconds until a PPE violation escalates
    warning_interval: float = 30.0
    thermal_threshold: float = 55.0  # default for zones that declare none
    prompt_condition: Condition = Condition.C3
    clock_scale: float = 1.0  # real seconds per simulated second
    debounce_frames: int = 3
    alarm_holddown: float = 30.0  # calm seconds before a fire incident resolves
    strict_parse: bool = False
    ppe_strategy: str = "Q4"
    posture_strategy: str = "Q10"

    def __post_init__(self):
        if self.countdown <= 0:
            raise ValueError("countdown must be positive")
        if self.warning_interval <= 0:
            raise ValueError("warning_interval must be positive")
        if self.clock_scale <= 0:
            raise ValueError("clock_scale must be positive")
        if self.debounce_frames < 1:
            raise ValueError("debounce_frames must be >= 1")
        if self.alarm_holddown < 0:
            raise ValueError("alarm_holddown must be >= 0")
        if self.ppe_strategy not in ("Q1", "Q2", "Q3", "Q4"):
            raise ValueError(f"unknown ppe strategy '{self.ppe_strategy}'")
        if self.posture_strategy not in ("Q5", "Q6", "Q7", "Q8", "Q9", "Q10"):
            raise ValueError(f"unknown posture strategy '{self.posture_strategy}'")

    def to_dict(self) -> dict:
        return {
            "countdown": self.countdown,
            "warning_interval": self.warning_interval,
            "thermal_threshold": self.thermal_threshold,
            "prompt_condition": self.prompt_condition.value,
            "clock_scale": self.clock_scale,
            "debounce_frames": self.debounce_frames,
            "alarm_holddown": self.alarm_holddown,
            "strict_parse": self.strict_parse,
            "ppe_strategy": self.ppe_strategy,
            "posture_strategy": self.posture_strategy,
        }


class IncidentState(Enum):
    ACTIVE = "active"
    COUNTDOWN_RUNNING = "countdown_running"
    ESCALATED = "escalated"
    RESOLVED = "resolved"


@dataclass
class Incident:
    id: str
    hazard: HazardEvent
    state: IncidentState
    deadline: Optional[float] = None
    actions: list = field(default_factory=list)
    acked: bool = False
    notified: bool = False
    reposition_done: bool = False
    fallback_note: Optional[str] = None
    warn_station: Optional[str] = None
    next_warn_t: Optional[float] = None
    phrase_idx: int = 0
    holddown_until: Optional[float] = None

    @property
    def active(self) -> bool:
        return self.state is not IncidentState.RESOLVED

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "kind": self.hazard.kind.value,
            "subject": self.hazard.subject,
            "state": self.state.value,
            "deadline": self.deadline,
            "opened_at": self.hazard.timestamp,
            "acked": self.acked,
            "notified": self.notified,
        }


@dataclass(frozen=True)
class ActionEntry:
    """One action-log line. Serialization is canonical (sorted keys) so
    equal runs compare byte-for-byte."""

    t: float
    seq: int
    incident: Optional[str]
    action: str
    detail: dict

    def to_json(self) -> str:
        return json.dumps(
            {
                "t": self.t,
                "seq": self.seq,
                "incident_id": self.incident,
                "action": self.action,
                "detail": self.detail,
            },
            sort_keys=True,
        )


# Event vocabulary ----------------------------------------------------------


@dataclass(frozen=True)
class DetectionEvent:
    t: float
    frame: DetectionFrame


@dataclass(frozen=True)
class ThermalEvent:
    t: float
    zone: str
    value: float


@dataclass(frozen=True)
class InjectEvent:
    t: float
    kind: str  # fire | ppe | accident
    target: str
    value: Optional[object] = None
    x: Optional[float] = None
    y: Optional[float] = None


@dataclass(frozen=True)
class TickEvent:
    t: float


@dataclass(frozen=True)
class ConfigEvent:
    t: float
    patch: dict


@dataclass(frozen=True)
class AckEvent:
    t: float
    incident_id: str


@dataclass(frozen=True)
class NotifyReceiptEvent:
    t: float
    incident_id: str
    receipt: Receipt


@dataclass(frozen=True)
class FrameVerdict:
    """Per-frame classification record kept for metric grading."""

    t: float
    worker: str
    category: str  # "ppe" | "posture"
    verdict: Verdict
    truth: Optional[str] = None


class Coordinator:
    """Single-threaded event handler; producers queue events, the owner
    calls handle() in timestamp order."""

    def __init__(
        self,
        lab_map: LabMap,
        policy: Optional[PolicyConfig] = None,
        backend=None,
        notifier: Optional[Notifier] = None,
        safety: Optional[SafetyPolicy] = None,
        render_config: Optional[RenderConfig] = None,
        notify_dispatch: Optional[Callable[[dict, str], Optional[Receipt]]] = None,
    ):
        self.map = lab_map
        self.policy = policy or PolicyConfig()
        self.backend = backend or MockBackend({})
        self.notifier = notifier or Notifier()
        self.safety = safety or SafetyPolicy()
        self.render_config = render_config or RenderConfig()
        # dispatch returns a Receipt (synchronous) or None (receipt arrives
        # later as a NotifyReceiptEvent); replays use the synchronous path
        self._dispatch = notify_dispatch or (lambda payload, _id: self.notifier.deliver(payload))

        self.log: list[ActionEntry] = []
        self.incidents: dict[str, Incident] = {}
        self.verdict_log: list[FrameVerdict] = []
        self.snapshots: dict[int, bytes] = {}
        self.listeners: list[Callable[[str, dict], None]] = []

        self._workers: dict[str, WorkerTrack] = {}
        self._robots: dict[str, RobotState] = {
            rid: RobotState(id=rid, at_node=node) for rid, node in lab_map.robot_starts
        }
        self._zones: dict[str, ThermalZone] = {z.id: z for z in lab_map.thermal_zones}
        self._hazards: dict[str, HazardEvent] = {}  # incident id -> hazard
        self._debounce: dict[tuple, Debouncer] = {}
        self._frozen = False
        self._now = 0.0
        self._seq = 0
        self._incident_seq = 0
        self._generation = 0
        self._dirty = True
        self._current = initial_state(lab_map)

    # -- state publishing ---------------------------------------------------

    @property
    def state(self) -> WorldState:
        return self._publish()

    def _publish(self) -> WorldState:
        if self._dirty:
            self._generation += 1
            self._current = WorldState(
                map=self.map,
                workers=tuple(self._workers.values()),
                robots=tuple(self._robots.values()),
                zones=tuple(self._zones.values()),
                hazards=tuple(self._hazards.values()),
                frozen=self._frozen,
                t=self._now,
                generation=self._generation,
            )
            self._dirty = False
            snapshot_dict = self._current.to_dict()
            snapshot_dict["incidents"] = [
                i.to_dict() for i in self.incidents.values()
            ]
            for cb in self.listeners:
                cb("state", snapshot_dict)
        return self._current

    def _emit(self, action: str, detail: dict, incident: Optional[Incident] = None,
              t: Optional[float] = None) -> ActionEntry:
        entry = ActionEntry(
            t=self._now if t is None else t,
            seq=self._seq,
            incident=incident.id if incident else None,
            action=action,
            detail=detail,
        )
        self._seq += 1
        self.log.append(entry)
        if incident is not None:
            incident.actions.append(entry)
        for cb in self.listeners:
            cb("action", json.loads(entry.to_json()))
        return entry

    def _render(self) -> MapSnapshot:
        return render_2d(self._publish(), self.render_config)

    # -- event entry point ----------------------------------------------------

    def handle(self, event) -> None:
        t = event.t
        if t < self._now:
            raise ValueError(f"event at t={t} arrived after t={self._now}; events must be ordered")
        self._now = t
        if isinstance(event, DetectionEvent):
            self._on_detection(event.frame)
        elif isinstance(event, ThermalEvent):
            self.on_thermal(event.zone, event.value, t)
        elif isinstance(event, InjectEvent):
            self._on_inject(event)
        elif isinstance(event, TickEvent):
            self.tick(t)
        elif isinstance(event, ConfigEvent):
            self._on_config(event.patch)
        elif isinstance(event, AckEvent):
            self._on_ack(event.incident_id)
        elif isinstance(event, NotifyReceiptEvent):
            self._on_receipt(event)
        else:
            raise TypeError(f"unknown event {event!r}")
        self._publish()

    # -- perception -----------------------------------------------------------

    def _on_detection(self, frame: DetectionFrame) -> None:
        station = self.map.station(frame.station)
        worker_id = frame.person or f"{frame.station}-subject"
        if station.kind is StationKind.RGBD:
            pos = project_detection(station, frame.pixel_x, frame.range_m)
            pos = Point(
                min(max(pos.x, 0.0), self.map.width),
                min(max(pos.y, 0.0), self.map.height),
            )
        else:
            pos = station.position
        track = self._workers.get(worker_id) or WorkerTrack(id=worker_id, position=pos)
        track = replace(track, position=pos)
        self._workers[worker_id] = track
        self._dirty = True

        if frame.covers(self.policy.ppe_strategy):
            verdict = classify_ppe(frame.responses, self.policy.ppe_strategy, frame.latency)
            truth = (frame.truth or {}).get("ppe")
            self.verdict_log.append(
                FrameVerdict(frame.t, worker_id, "ppe", verdict, truth)
            )
            if not verdict.hallucination:
                self._feed_ppe(worker_id, verdict.label)
        if frame.covers(self.policy.posture_strategy):
            verdict = classify_posture(frame.responses, self.policy.posture_strategy, frame.latency)
            truth = (frame.truth or {}).get("posture")
            self.verdict_log.append(
                FrameVerdict(frame.t, worker_id, "posture", verdict, truth)
            )
            if not verdict.hallucination:
                self._feed_posture(worker_id, verdict.label)

    def _debouncer(self, worker_id: str, category: str, initial) -> Debouncer:
        key = (worker_id, category)
        if key not in self._debounce:
            self._debounce[key] = Debouncer(m=self.policy.debounce_frames, initial=initial)
        return self._debounce[key]

    def _feed_ppe(self, worker_id: str, label: Ppe, force: bool = False) -> None:
        d = self._debouncer(worker_id, "ppe", Ppe.UNKNOWN)
        stable = d.force(label) if force else d.feed(label)
        track = self._workers[worker_id]
        if stable is track.ppe:
            return
        self._workers[worker_id] = replace(track, ppe=stable)
        self._dirty = True
        incident = self._active_for(worker_id, HazardKind.PPE_VIOLATION)
        if stable is Ppe.NOT_WEARING and incident is None:
            self.on_ppe_violation(worker_id, self._now)
        elif stable is Ppe.WEARING and incident is not None:
            self._resolve_ppe(incident, self._now)

    def _feed_posture(self, worker_id: str, label: Posture, force: bool = False) -> None:
        d = self._debouncer(worker_id, "posture", Posture.UNKNOWN)
        stable = d.force(label) if force else d.feed(label)
        track = self._workers[worker_id]
        if stable is track.posture:
            return
        self._workers[worker_id] = replace(track, posture=stable)
        self._dirty = True
        incident = self._active_for(worker_id, HazardKind.ACCIDENT)
        if stable is Posture.PRONE and incident is None:
            self.on_accident(worker_id, self._now)
        elif stable is Posture.UPRIGHT and incident is not None:
            self._resolve_incident(incident, self._now)

    # -- incident bookkeeping ---------------------------------------------------

    def _active_for(self, subject: str, kind: HazardKind) -> Optional[Incident]:
        for inc in self.incidents.values():
            if inc.active and inc.hazard.subject == subject and inc.hazard.kind is kind:
                return inc
        return None

    def _open_incident(self, kind: HazardKind, subject: str, location: Point,
                       t: float, state: IncidentState) -> Incident:
        self._incident_seq += 1
        hazard = HazardEvent(kind=kind, subject=subject, location=location, timestamp=t)
        incident = Incident(
            id=f"{kind.value}-{self._incident_seq:04d}", hazard=hazard, state=state
        )
        self.incidents[incident.id] = incident
        self._hazards[incident.id] = hazard
        self._dirty = True
        return incident

    def _resolve_incident(self, incident: Incident, t: float) -> None:
        incident.state = IncidentState.RESOLVED
        self._hazards.pop(incident.id, None)
        self._dirty = True
        self._emit("resolve", {"kind": incident.hazard.kind.value,
                               "subject": incident.hazard.subject}, incident)

    # -- PPE flow -----------------------------------------------------------------

    def on_ppe_violation(self, worker_id: str, t: float) -> Incident:
        """Freeze, warn, start the countdown. Pre: debounced not-wearing."""
        track = self._workers[worker_id]
        incident = self._open_incident(
            HazardKind.PPE_VIOLATION, worker_id, track.position, t,
            IncidentState.COUNTDOWN_RUNNING,
        )
        incident.deadline = t + self.policy.countdown
        if not self._frozen:
            self._frozen = True
            for rid, robot in self._robots.items():
                self._robots[rid] = replace(robot, frozen=True)
            self._dirty = True
            self._emit("freeze", {"robots": sorted(self._robots)}, incident)
        station = self._nearest_rgbd(track.position)
        if station is not None:
            incident.warn_station = station.id
            incident.next_warn_t = t
            self._warn(incident, t)
        self._emit(
            "countdown_start",
            {"deadline": incident.deadline, "seconds": self.policy.countdown},
            incident,
        )
        return incident

    def _nearest_rgbd(self, position: Point):
        candidates = [s for s in self.map.stations if s.kind is StationKind.RGBD]
        if not candidates:
            return None
        return min(candidates, key=lambda s: (s.position.distance_to(position), s.id))

    def _warn(self, incident: Incident, t: float) -> None:
        station = self.map.station(incident.warn_station)
        phrase = WARNING_PHRASES[incident.phrase_idx % len(WARNING_PHRASES)]
        incident.phrase_idx += 1
        self._emit("warn", speak(station, phrase, t), incident, t=t)
        incident.next_warn_t = t + self.policy.warning_interval

    def _resolve_ppe(self, incident: Incident, t: float) -> None:
        if incident.state is IncidentState.COUNTDOWN_RUNNING:
            self._emit("countdown_cancel", {"deadline": incident.deadline}, incident)
        incident.deadline = None
        incident.next_warn_t = None
        self._resolve_incident(incident, t)
        still_violating = any(
            i.active and i.hazard.kind is HazardKind.PPE_VIOLATION
            for i in self.incidents.values()
        )
        if self._frozen and not still_violating:
            self._frozen = False
            for rid, robot in self._robots.items():
                self._robots[rid] = replace(robot, frozen=False)
            self._dirty = True
            self._emit("resume", {"robots": sorted(self._robots)}, incident)

    # -- accident flow ---------------------------------------------------------------

    def on_accident(self, worker_id: str, t: float) -> Incident:
        """Notify first (help may be needed), then try to clear the passage.
        Pre: debounced prone posture."""
        track = self._workers[worker_id]
        incident = self._open_incident(
            HazardKind.ACCIDENT, worker_id, track.position, t, IncidentState.ACTIVE
        )
        self._notify(incident)
        self._reposition_flow(incident)
        return incident

    # -- fire flow ----------------------------------------------------------------------

    def on_thermal(self, zone_id: str, value: float, t: float) -> None:
        """Apply one IR reading; a strict threshold crossing opens the fire
        flow (alarm, reposition, notify). Unknown zones raise KeyError."""
        if zone_id not in self._zones:
            raise KeyError(f"unknown thermal zone '{zone_id}'")
        zone = self._zones[zone_id]
        was_alarmed = zone.alarmed
        zone = zone.with_reading(value)
        self._zones[zone_id] = zone
        self._dirty = True
        incident = self._active_for(zone_id, HazardKind.FIRE)

        if zone.alarmed and not was_alarmed:
            if incident is not None:
                # re-alarm during hold-down: same incident continues
                incident.holddown_until = None
                return
            incident = self._open_incident(
                HazardKind.FIRE, zone_id, zone.position, t, IncidentState.ACTIVE
            )
            self._emit(
                "alarm",
                {"zone": zone_id, "value": value, "threshold": zone.threshold,
                 "saturated": zone.saturated},
                incident,
            )
            self._reposition_flow(incident)
            self._notify(incident)
        elif was_alarmed and not zone.alarmed:
            self._emit("alarm_clear", {"zone": zone_id, "value": value}, incident)
            if incident is not None:
                incident.holddown_until = t + self.policy.alarm_holddown

    # -- repositioning ----------------------------------------------------------------------

    def _reposition_flow(self, incident: Incident) -> None:
        """Query the backend once for new robot placements and execute the
        plan only if it parses and validates. Never moves a frozen fleet."""
        if incident.reposition_done:
            return
        incident.reposition_done = True
        hazard = incident.hazard

        if self._frozen:
            self._fallback(incident, "fleet_frozen", {})
            return

        robots = list(self._robots.values())
        if not robots:
            self._fallback(incident, "no_robots", {})
            return

        snapshot = self._render()
        self.snapshots[snapshot.generation] = snapshot.image
        condition = self.policy.prompt_condition
        try:
            config = build_prompt_config(
                self._publish(), hazard, condition, self.safety, snapshot.image
            )
        except NoSafeNodesError as exc:
            self._fallback(incident, "no_safe_nodes", {"error": str(exc)})
            return
        request = build_reposition_prompt(config, hazard, robot_count=len(robots))
        self._emit(
            "prompt",
            {
                "condition": condition.value,
                "fingerprint": request.fingerprint,
                "nodes_offered": list(config.node_list or []),
            },
            incident,
        )
        try:
            reply = self.backend.reposition(request)
        except (UnscriptedRequestError, BackendError) as exc:
            self._fallback(incident, "backend_error", {"error": str(exc)})
            return

        plan = parse_reposition(reply.text, len(robots), strict=self.policy.strict_parse)
        self._emit(
            "parse",
            {
                "ok": plan.parse_ok,
                "raw": plan.raw,
                "latency": reply.latency,
                "assignments": {
                    str(k): (0 if v is None else v)
                    for k, v in sorted(plan.assignments.items())
                },
            },
            incident,
        )
        if not plan.parse_ok:
            self._fallback(incident, "hallucination", {"raw": plan.raw})
            return

        check = validate_plan(
            plan.assignments, self.map.graph, hazard.location, robots, self.safety
        )
        self._emit(
            "validate", {"errors": check.codes(), "success": check.success}, incident
        )
        if not check.success:
            self._fallback(incident, "validation_errors", {"errors": check.codes()})
            return

        excluded = perimeter_nodes(
            self.map.graph, hazard.location, self.safety.hazard_radius
        )
        for idx in sorted(plan.assignments):
            dest = plan.assignments[idx]
            robot = robots[idx - 1]
            if dest is None or dest == robot.at_node:
                continue
            try:
                route = plan_route(self.map.graph, robot.at_node, dest, excluded)
            except NoRouteError as exc:
                self._fallback(incident, "no_route", {"robot": robot.id, "error": str(exc)})
                continue
            self._robots[robot.id] = replace(
                robot, path=tuple(route[1:]), target=dest
            )
            self._dirty = True
            self._emit("move_to", {"robot": robot.id, "to": dest, "route": route}, incident)

    def _fallback(self, incident: Incident, reason: str, detail: dict) -> None:
        incident.fallback_note = reason
        payload = {"reason": reason, "note": MANUAL_NOTE}
        payload.update(detail)
        self._emit("fallback", payload, incident)

    # -- notifications ---------------------------------------------------------------------------

    def _notify(self, incident: Incident) -> None:
        if incident.notified:
            return
        incident.notified = True
        snapshot = self._render()
        self.snapshots[snapshot.generation] = snapshot.image
        text = self._notification_text(incident)
        payload = {
            "incident_id": incident.id,
            "kind": incident.hazard.kind.value,
            "text": text,
            "location": {"x": incident.hazard.location.x, "y": incident.hazard.location.y},
            "snapshot_url": f"/snapshots/{snapshot.generation}.png",
            "t": self._now,
        }
        receipt = self._dispatch(payload, incident.id)
        self._emit("notify", {"payload": payload}, incident)
        if receipt is not None and not receipt.ok:
            self._emit(
                "notify_failed",
                {"attempts": receipt.attempts, "error": receipt.error,
                 "status": receipt.status},
                incident,
            )

    def _notification_text(self, incident: Incident) -> str:
        h = incident.hazard
        loc = f"({h.location.x:.1f}, {h.location.y:.1f})"
        if h.kind is HazardKind.PPE_VIOLATION:
            text = (
                f"PPE non-compliance: worker {h.subject} has not worn a lab coat "
                f"for {self.policy.countdown:.0f} s despite warnings."
            )
        elif h.kind is HazardKind.ACCIDENT:
            text = f"Possible accident: worker {h.subject} may need assistance at {loc}."
        else:
            zone = self._zones.get(h.subject)
            reading = f"{zone.current:.1f}" if zone else "?"
            text = f"Potential fire: zone {h.subject} at {reading} C (location {loc})."
        if incident.fallback_note:
            text += f" Robots held in place, {MANUAL_NOTE} ({incident.fallback_note})."
        return text

    def _on_receipt(self, event: NotifyReceiptEvent) -> None:
        incident = self.incidents.get(event.incident_id)
        if not event.receipt.ok:
            self._emit(
                "notify_failed",
                {"attempts": event.receipt.attempts, "error": event.receipt.error,
                 "status": event.receipt.status},
                incident,
            )

    # -- timers and motion -------------------------------------------------------------------------

    def tick(self, now: float) -> None:
        """Fire due timers (warnings, countdown, hold-down) and advance the
        robots one edge along their pending routes."""
        self._now = max(self._now, now)
        for incident in list(self.incidents.values()):
            if not incident.active:
                continue
            kind = incident.hazard.kind
            if kind is HazardKind.PPE_VIOLATION:
                while incident.next_warn_t is not None and incident.next_warn_t <= now:
                    self._warn(incident, incident.next_warn_t)
                if (
                    incident.state is IncidentState.COUNTDOWN_RUNNING
                    and incident.deadline is not None
                    and now >= incident.deadline
                ):
                    self._escalate(incident)
            elif kind is HazardKind.FIRE:
                zone = self._zones.get(incident.hazard.subject)
                if (
                    incident.holddown_until is not None
                    and now >= incident.holddown_until
                    and zone is not None
                    and not zone.alarmed
                ):
                    self._resolve_incident(incident, now)

        if not self._frozen:
            for rid in list(self._robots):
                robot = self._robots[rid]
                if not robot.path:
                    continue
                nxt = robot.path[0]
                remaining = robot.path[1:]
                self._robots[rid] = replace(
                    robot,
                    at_node=nxt,
                    path=remaining,
                    target=robot.target if remaining else None,
                )
                self._dirty = True
                self._emit(
                    "step",
                    {"robot": rid, "from": robot.at_node, "to": nxt,
                     "arrived": not remaining},
                )

    def _escalate(self, incident: Incident) -> None:
        incident.state = IncidentState.ESCALATED
        self._emit(
            "escalate",
            {"worker": incident.hazard.subject, "deadline": incident.deadline},
            incident,
            t=incident.deadline,
        )
        self._notify(incident)

    # -- injections, config, ack -----------------------------------------------------------------------

    def _on_inject(self, event: InjectEvent) -> None:
        kind = event.kind
        if kind == "fire":
            value = float(event.value) if event.value is not None else None
            if event.target not in self._zones:
                raise KeyError(f"unknown thermal zone '{event.target}'")
            if value is None:
                value = self._zones[event.target].threshold + 5.0
            self._emit("inject", {"kind": kind, "target": event.target, "value": value})
            self.on_thermal(event.target, value, event.t)
        elif kind in ("ppe", "accident"):
            worker_id = event.target
            if worker_id not in self._workers:
                if event.x is None or event.y is None:
                    raise KeyError(
                        f"unknown worker '{worker_id}' (provide x,y to create a track)"
                    )
                self._workers[worker_id] = WorkerTrack(
                    id=worker_id, position=Point(float(event.x), float(event.y))
                )
                self._dirty = True
            elif event.x is not None and event.y is not None:
                self._workers[worker_id] = replace(
                    self._workers[worker_id],
                    position=Point(float(event.x), float(event.y)),
                )
                self._dirty = True
            clear = str(event.value).lower() in ("clear", "wearing", "upright") if event.value else False
            self._emit("inject", {"kind": kind, "target": worker_id, "clear": clear})
            if kind == "ppe":
                self._feed_ppe(worker_id, Ppe.WEARING if clear else Ppe.NOT_WEARING, force=True)
            else:
                self._feed_posture(worker_id, Posture.UPRIGHT if clear else Posture.PRONE, force=True)
        else:
            raise ValueError(f"unknown injection kind '{kind}'")

    def _on_config(self, patch: dict) -> None:
        allowed = {
            "countdown", "warning_interval", "thermal_threshold",
            "prompt_condition", "clock_scale", "debounce_frames",
            "alarm_holddown", "strict_parse", "ppe_strategy", "posture_strategy",
        }
        unknown = set(patch) - allowed
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        values = dict(patch)
        if "prompt_condition" in values:
            values["prompt_condition"] = Condition(values["prompt_condition"])
        if "thermal_threshold" in values:
            threshold = float(values["thermal_threshold"])
            for zone in self._zones.values():
                if not zone.sensor_min < threshold <= zone.sensor_max:
                    raise ValueError(
                        f"thermal_threshold {threshold} outside zone {zone.id} "
                        f"sensor range ({zone.sensor_min}, {zone.sensor_max}]"
                    )
        self.policy = replace(self.policy, **values)
        self._emit("config", {"patch": {k: patch[k] for k in sorted(patch)}})
        if "thermal_threshold" in values:
            for zid, zone in list(self._zones.items()):
                self._zones[zid] = replace(zone, threshold=float(values["thermal_threshold"]))
                self.on_thermal(zid, self._zones[zid].current, self._now)

    def _on_ack(self, incident_id: str) -> None:
        incident = self.incidents.get(incident_id)
        if incident is None:
            raise KeyError(f"unknown incident '{incident_id}'")
        incident.acked = True
        self._emit("ack", {"incident_id": incident_id}, incident)

    # -- helpers for hosts -------------------------------------------------------------------------------

    def log_lines(self) -> list[str]:
        return [entry.to_json() for entry in self.log]
