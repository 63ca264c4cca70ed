"""labsentry: safety orchestration engine for automated chemistry labs.

Station-level hazard perception (PPE, posture, thermal), model-mediated
robot repositioning, a freeze/warn/countdown/notify state machine, and a
deterministic scenario/evaluation harness.
"""

from .coordinator import Coordinator, PolicyConfig
from .harness import MetricsReport, Scenario, grade_frames, load_scenario, replay, run_reposition_trials
from .model import (
    HazardEvent,
    HazardKind,
    LabMap,
    MeepleColor,
    NavGraph,
    Point,
    Posture,
    Ppe,
    RobotState,
    StationKind,
    StationPose,
    ThermalZone,
    WorkerTrack,
    WorldState,
    initial_state,
    load_map,
    meeple_color,
)
from .perception import DetectionFrame, Verdict, classify_posture, classify_ppe, debounce, project_detection
from .render import MapSnapshot, RenderConfig, render_2d
from .safety import BlockingRule, SafetyPolicy, filter_safe_nodes, plan_route, validate_plan
from .vlm import Condition, LiveBackend, MockBackend, RepositionPlan, format_reposition, parse_reposition

__version__ = "0.1.0"
