"""Scenario engine and evaluation harness.

Scenarios are the replayable analog of the original recordings: a JSON
manifest naming a map, a backend script and a timeline of timestamped
events (detection frames, thermal readings, hazard injections). Replay
feeds the timeline plus a regular tick train to a coordinator on a scaled
clock; with the same inputs and seed the action log comes out
byte-identical.

The harness also runs randomized reposition trials (seeded hazard
placement, prompt, parse, validate) and computes the evaluation metrics:
classification accuracy, hallucination rate, mean latency, per-trial error
sets and success rate.
"""

from __future__ import annotations

import json
import random
import time as _time
from dataclasses import dataclass, field, replace as _replace
from pathlib import Path
from typing import Optional, Sequence, Union

from .coordinator import (
    Coordinator,
    DetectionEvent,
    InjectEvent,
    PolicyConfig,
    ThermalEvent,
    TickEvent,
)
from .model import (
    HazardEvent,
    HazardKind,
    LabMap,
    Point,
    Posture,
    WorkerTrack,
    initial_state,
    load_map,
)
from .notify import Notifier
from .perception import DetectionFrame
from .render import render_2d
from .safety import SafetyPolicy, validate_plan
from .vlm import (
    Condition,
    MockBackend,
    NoSafeNodesError,
    build_prompt_config,
    build_reposition_prompt,
    parse_reposition,
)


class ScenarioError(ValueError):
    """Malformed scenario document; the message names the location."""


@dataclass(frozen=True)
class Scenario:
    lab_map: LabMap
    events: tuple  # coordinator events, sorted by t
    script: dict = field(default_factory=dict)
    policy: Optional[dict] = None
    duration: Optional[float] = None
    name: str = "scenario"


def _event_from_record(rec: dict, index: int):
    """Timeline records are shape-discriminated: detection frames carry
    ``responses``, thermal readings carry ``zone``/``value``, injections
    carry ``kind``."""
    where = f"event {index}"
    if "t" not in rec:
        raise ScenarioError(f"{where}: missing timestamp 't'")
    t = float(rec["t"])
    try:
        if "responses" in rec:
            return DetectionEvent(t=t, frame=DetectionFrame.from_record(rec))
        if "zone" in rec:
            return ThermalEvent(t=t, zone=str(rec["zone"]), value=float(rec["value"]))
        if "kind" in rec:
            return InjectEvent(
                t=t,
                kind=str(rec["kind"]),
                target=str(rec["target"]),
                value=rec.get("value"),
                x=rec.get("x"),
                y=rec.get("y"),
            )
    except (KeyError, ValueError, TypeError) as exc:
        raise ScenarioError(f"{where}: {exc}") from exc
    raise ScenarioError(f"{where}: cannot classify record with keys {sorted(rec)}")


def load_scenario(source: Union[str, Path, dict], base: Optional[Path] = None) -> Scenario:
    """Load a scenario manifest and its referenced files.

    Manifest schema: {"map": path|inline, "script": path|inline?,
    "events": path-to-jsonl|inline list, "policy": {...}?, "duration": s?}.
    The timeline must already be sorted by timestamp.
    """
    if isinstance(source, dict):
        doc = source
        base = base or Path(".")
        name = str(doc.get("name", "scenario"))
    else:
        path = Path(source)
        doc = json.loads(path.read_text())
        base = base or path.parent
        name = str(doc.get("name", path.stem))

    if "map" not in doc:
        raise ScenarioError("scenario: missing 'map'")
    map_ref = doc["map"]
    lab_map = load_map(map_ref if isinstance(map_ref, dict) else base / map_ref)

    script = doc.get("script", {})
    if isinstance(script, str):
        script = json.loads((base / script).read_text())

    events_ref = doc.get("events", [])
    if isinstance(events_ref, str):
        records = []
        for i, line in enumerate((base / events_ref).read_text().splitlines()):
            if not line.strip():
                continue
            try:
                records.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise ScenarioError(f"{events_ref}:{i + 1}: {exc}") from exc
    else:
        records = list(events_ref)

    events = [_event_from_record(rec, i) for i, rec in enumerate(records)]
    for i in range(1, len(events)):
        if events[i].t < events[i - 1].t:
            raise ScenarioError(
                f"event {i}: timestamp {events[i].t} precedes event {i - 1} "
                f"({events[i - 1].t}); timeline must be sorted"
            )

    duration = doc.get("duration")
    return Scenario(
        lab_map=lab_map,
        events=tuple(events),
        script=script,
        policy=doc.get("policy"),
        duration=float(duration) if duration is not None else None,
        name=name,
    )


# ---------------------------------------------------------------------------
# Metrics


@dataclass(frozen=True)
class MetricsReport:
    """Evaluation numbers. Classification fields are percentages in
    [0, 100]; success_rate is a fraction. Fields not applicable to the run
    are None."""

    accuracy: Optional[float] = None
    hallucination_rate: Optional[float] = None
    mean_latency: Optional[float] = None
    success_rate: Optional[float] = None
    trial_errors: Optional[tuple] = None  # per-trial frozensets of error codes
    n_frames: int = 0
    n_trials: int = 0
    error_counts: dict = field(default_factory=dict)
    by_category: dict = field(default_factory=dict)
    trials: tuple = ()  # per-trial detail dicts

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "hallucination_rate": self.hallucination_rate,
            "mean_latency": self.mean_latency,
            "success_rate": self.success_rate,
            "n_frames": self.n_frames,
            "n_trials": self.n_trials,
            "error_counts": dict(self.error_counts),
            "by_category": {k: dict(v) for k, v in self.by_category.items()},
            "trial_errors": [sorted(e) for e in self.trial_errors] if self.trial_errors is not None else None,
            "trials": [dict(t) for t in self.trials],
        }


def grade_frames(verdicts: Sequence, truths: Sequence[str],
                 mode: str = "count_incorrect") -> tuple[float, float]:
    """Accuracy and hallucination rate over labeled frames, as percents.

    ``verdicts`` are perception Verdict values, ``truths`` the matching
    ground-truth label strings. ``mode`` controls the hallucinated-frame
    convention: the default counts them as incorrect; "exclude" drops them
    from the accuracy denominator. The hallucination rate is always
    violations / all frames.
    """
    if len(verdicts) != len(truths):
        raise ValueError(
            f"verdicts ({len(verdicts)}) and labels ({len(truths)}) must align"
        )
    total = len(verdicts)
    if total == 0:
        return 0.0, 0.0
    violations = sum(1 for v in verdicts if v.hallucination)
    if mode == "count_incorrect":
        correct = sum(
            1
            for v, truth in zip(verdicts, truths)
            if not v.hallucination and v.label.value == truth
        )
        accuracy = 100.0 * correct / total
    elif mode == "exclude":
        kept = [(v, t) for v, t in zip(verdicts, truths) if not v.hallucination]
        accuracy = (
            100.0 * sum(1 for v, t in kept if v.label.value == t) / len(kept)
            if kept
            else 0.0
        )
    else:
        raise ValueError(f"unknown grading mode '{mode}'")
    return accuracy, 100.0 * violations / total


def _classification_metrics(coordinator: Coordinator, mode: str) -> dict:
    by_category: dict[str, dict] = {}
    for category in ("ppe", "posture"):
        records = [
            fv for fv in coordinator.verdict_log
            if fv.category == category and fv.truth is not None
        ]
        if not records:
            continue
        accuracy, hall = grade_frames(
            [fv.verdict for fv in records], [fv.truth for fv in records], mode=mode
        )
        by_category[category] = {
            "accuracy": accuracy,
            "hallucination_rate": hall,
            "mean_latency": sum(fv.verdict.latency for fv in records) / len(records),
            "n": len(records),
        }
    return by_category


@dataclass(frozen=True)
class ReplayResult:
    log_lines: tuple
    metrics: MetricsReport
    coordinator: Coordinator


def replay(
    scenario: Scenario,
    speed: float = 0.0,
    seed: int = 0,
    tick_interval: float = 1.0,
    policy: Optional[PolicyConfig] = None,
    notifier: Optional[Notifier] = None,
    grading_mode: str = "count_incorrect",
) -> ReplayResult:
    """Feed a scenario to a fresh coordinator and grade the outcome.

    ``speed`` is simulated seconds per wall second; 0 runs flat out. Ticks
    are interleaved every ``tick_interval`` simulated seconds up to the
    scenario duration (default: last event time plus one tick). The run is
    deterministic given (scenario, seed).
    """
    if policy is None:
        overrides = dict(scenario.policy or {})
        if "prompt_condition" in overrides:
            overrides["prompt_condition"] = Condition(overrides["prompt_condition"])
        policy = PolicyConfig(**overrides)
    coordinator = Coordinator(
        scenario.lab_map,
        policy=policy,
        backend=MockBackend(scenario.script),
        notifier=notifier or Notifier(),
    )
    last_t = scenario.events[-1].t if scenario.events else 0.0
    until = scenario.duration if scenario.duration is not None else last_t + tick_interval

    ticks = []
    t = 0.0
    while t <= until:
        ticks.append(TickEvent(t=round(t, 9)))
        t += tick_interval
    merged = sorted(
        list(scenario.events) + ticks,
        key=lambda e: (e.t, 0 if isinstance(e, TickEvent) else 1),
    )

    prev_t = 0.0
    for event in merged:
        if speed > 0 and event.t > prev_t:
            _time.sleep((event.t - prev_t) / speed)
        prev_t = event.t
        coordinator.handle(event)

    by_category = _classification_metrics(coordinator, grading_mode)
    overall = None
    if by_category:
        all_records = [fv for fv in coordinator.verdict_log if fv.truth is not None]
        accuracy, hall = grade_frames(
            [fv.verdict for fv in all_records],
            [fv.truth for fv in all_records],
            mode=grading_mode,
        )
        overall = (
            accuracy,
            hall,
            sum(fv.verdict.latency for fv in all_records) / len(all_records),
        )
    metrics = MetricsReport(
        accuracy=overall[0] if overall else None,
        hallucination_rate=overall[1] if overall else None,
        mean_latency=overall[2] if overall else None,
        n_frames=len([fv for fv in coordinator.verdict_log if fv.truth is not None]),
        by_category=by_category,
    )
    return ReplayResult(
        log_lines=tuple(coordinator.log_lines()),
        metrics=metrics,
        coordinator=coordinator,
    )


# ---------------------------------------------------------------------------
# Randomized reposition trials


def run_reposition_trials(
    lab_map: LabMap,
    condition: Condition,
    hazard_kind: HazardKind,
    n: int,
    backend,
    policy: Optional[SafetyPolicy] = None,
    seed: int = 0,
    strict_parse: bool = False,
    render: bool = True,
) -> MetricsReport:
    """Place a hazard uniformly at random n times and score the backend's
    reposition suggestions with the e1/e2/e3 taxonomy.

    Accident trials put a prone worker at the hazard location; fire trials
    put a free-standing fire marker there. Placement is seeded and uniform
    over the map rectangle. ``render=False`` skips the per-trial snapshot
    (large text-only batches against the mock backend).
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    policy = policy or SafetyPolicy()
    rng = random.Random(seed)
    base = initial_state(lab_map)

    trial_errors: list[frozenset] = []
    trials: list[dict] = []
    hallucinations = 0
    latencies: list[float] = []
    error_counts = {"e1": 0, "e2": 0, "e3": 0}
    successes = 0

    for trial in range(n):
        location = Point(
            rng.uniform(0.0, lab_map.width), rng.uniform(0.0, lab_map.height)
        )
        subject = "sim-victim" if hazard_kind is HazardKind.ACCIDENT else "sim-fire"
        hazard = HazardEvent(
            kind=hazard_kind, subject=subject, location=location, timestamp=float(trial)
        )
        workers = (
            (WorkerTrack(id=subject, position=location, posture=Posture.PRONE),)
            if hazard_kind is HazardKind.ACCIDENT
            else ()
        )
        state = _replace(
            base,
            workers=workers,
            hazards=(hazard,),
            t=float(trial),
            generation=trial + 1,
        )
        record: dict = {"trial": trial, "x": location.x, "y": location.y}

        image = render_2d(state).image if render else b""
        try:
            config = build_prompt_config(state, hazard, condition, policy, image)
        except NoSafeNodesError:
            record.update({"outcome": "no_safe_nodes", "errors": []})
            trials.append(record)
            trial_errors.append(frozenset())
            continue
        request = build_reposition_prompt(config, hazard, robot_count=len(state.robots))
        reply = backend.reposition(request)
        latencies.append(reply.latency)
        plan = parse_reposition(reply.text, len(state.robots), strict=strict_parse)
        if not plan.parse_ok:
            hallucinations += 1
            record.update({"outcome": "hallucination", "raw": reply.text, "errors": []})
            trials.append(record)
            trial_errors.append(frozenset())
            continue
        check = validate_plan(
            plan.assignments, lab_map.graph, hazard.location, list(state.robots), policy
        )
        codes = check.codes()
        for c in codes:
            error_counts[c] += 1
        if check.success:
            successes += 1
        record.update(
            {
                "outcome": "success" if check.success else "errors",
                "errors": codes,
                "assignments": {
                    str(k): (0 if v is None else v)
                    for k, v in sorted(plan.assignments.items())
                },
            }
        )
        trials.append(record)
        trial_errors.append(frozenset(codes))

    return MetricsReport(
        success_rate=successes / n,
        trial_errors=tuple(trial_errors),
        mean_latency=sum(latencies) / len(latencies) if latencies else None,
        hallucination_rate=100.0 * hallucinations / n,
        n_trials=n,
        error_counts=error_counts,
        trials=tuple(trials),
    )
