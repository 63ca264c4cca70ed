"""Detection-frame perception: projection, response classification, debounce.

Person detection and depth happen upstream (simulated); frames arrive with
the response text a vision model gave to one of ten query strategies
(Q1..Q10). This module turns those texts into PPE / posture verdicts.

Classification is deterministic and case-insensitive. A reply that breaks
the instructed answer format is never guessed at: it is flagged as a
hallucination, and the verdict label falls back to the strategy's negative
answer (PPE absent for coat queries, upright for posture queries). Some
multi-prompt strategies can still decide from their remaining answers; the
hallucination flag is set regardless so format violations are always
counted.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence, Union

from .model import Point, Posture, Ppe, StationKind, StationPose

# Verbatim query texts, keyed by prompt id. Multi-prompt strategies use
# "<strategy>.<n>" ids so a frame can carry each reply separately.
PROMPTS: dict[str, tuple[tuple[str, str], ...]] = {
    "Q1": (("Q1", "Is the person wearing a lab coat? ONLY reply with YES or NO."),),
    "Q2": (("Q2", "Is the person wearing a WHITE lab coat? ONLY reply with YES or NO."),),
    "Q3": (("Q3", "What is the person wearing?"),),
    "Q4": (
        ("Q4.1", "Is the person wearing a lab coat?"),
        ("Q4.2", "Is the person wearing a white lab coat?"),
        ("Q4.3", "What is the person wearing?"),
    ),
    "Q5": (("Q5", "Is the person prone? ONLY reply with YES or NO."),),
    "Q6": (
        (
            "Q6",
            "Is the person LYING on the floor or KNEELING or SITTING or CROUCHING "
            "or BENDING OVER or SQUATTING DOWN? ONLY reply with YES or NO.",
        ),
    ),
    "Q7": (("Q7", "Is the person standing? ONLY reply with YES or NO."),),
    "Q8": (("Q8", "Is the person standing or walking? ONLY reply with YES or NO."),),
    "Q9": (("Q9", "What is the person doing?"),),
    "Q10": (
        ("Q10.1", "Is the person standing? ONLY reply with YES or NO."),
        ("Q10.2", "Is the person walking? ONLY reply with YES or NO."),
        ("Q10.3", "What is the person doing?"),
    ),
}

PPE_STRATEGIES = ("Q1", "Q2", "Q3", "Q4")
POSTURE_STRATEGIES = ("Q5", "Q6", "Q7", "Q8", "Q9", "Q10")

# Keyword lists, in precedence order (earlier = more common in replies).
PPE_KEYWORDS = ("WHITE", "LAB COAT", "COAT")
PRONE_KEYWORDS = ("KNEELING", "SITTING", "CROUCHING", "BENDING", "SQUATTING", "LYING")
UPRIGHT_KEYWORDS = ("WALKING", "STANDING", "CHECKING", "EXAMINING", "LOOKING", "WORKING")


def strategy_prompt_ids(strategy: str) -> tuple[str, ...]:
    return tuple(pid for pid, _ in PROMPTS[strategy])


@dataclass(frozen=True)
class Verdict:
    """Outcome of classifying one frame's responses under one strategy."""

    label: Union[Ppe, Posture]
    hallucination: bool = False
    latency: float = 0.0
    matched_keyword: Optional[str] = None


@dataclass(frozen=True)
class DetectionFrame:
    """One simulated station observation.

    ``responses`` maps prompt ids (e.g. "Q7" or "Q4.2") to reply text.
    ``person`` is the simulator's ground-truth association hint; ``truth``
    optionally carries per-frame labels for grading.
    """

    station: str
    t: float
    pixel_x: float
    range_m: float
    responses: Mapping[str, str]
    person: Optional[str] = None
    latency: float = 0.0
    truth: Optional[Mapping[str, str]] = None

    def __post_init__(self):
        if not 0.0 <= self.pixel_x <= 1.0:
            raise ValueError(f"pixel_x {self.pixel_x} outside [0, 1]")
        if self.range_m <= 0:
            raise ValueError(f"range {self.range_m} must be positive")

    @classmethod
    def from_record(cls, rec: Mapping) -> "DetectionFrame":
        return cls(
            station=str(rec["station"]),
            t=float(rec["t"]),
            pixel_x=float(rec["pixel_x"]),
            range_m=float(rec["range"]),
            responses=dict(rec["responses"]),
            person=rec.get("person"),
            latency=float(rec.get("latency", 0.0)),
            truth=rec.get("truth"),
        )

    def to_record(self) -> dict:
        rec = {
            "station": self.station,
            "t": self.t,
            "pixel_x": self.pixel_x,
            "range": self.range_m,
            "responses": dict(self.responses),
        }
        if self.person is not None:
            rec["person"] = self.person
        if self.latency:
            rec["latency"] = self.latency
        if self.truth is not None:
            rec["truth"] = dict(self.truth)
        return rec

    def covers(self, strategy: str) -> bool:
        return all(pid in self.responses for pid in strategy_prompt_ids(strategy))


def project_detection(station: StationPose, pixel_x: float, range_m: float) -> Point:
    """Project a (pixel column, depth) detection into world coordinates.

    The bearing is heading + (0.5 - pixel_x) * hfov: the image center looks
    straight along the station heading, the left edge (pixel_x = 0) half an
    hfov counterclockwise.
    """
    if station.kind is not StationKind.RGBD:
        raise ValueError(f"station {station.id} is not RGB-D, cannot project")
    if range_m <= 0:
        raise ValueError(f"range {range_m} must be positive")
    bearing = station.heading + (0.5 - pixel_x) * (station.hfov or 0.0)
    return Point(
        station.position.x + range_m * math.cos(bearing),
        station.position.y + range_m * math.sin(bearing),
    )


def parse_yes_no(text: str) -> Optional[bool]:
    """True for YES, False for NO, None when the reply breaks the format.

    Tolerates case, surrounding whitespace and trailing punctuation, but
    nothing else: the instruction was to reply with the single word.
    """
    cleaned = text.strip().strip(".!").strip()
    if cleaned.upper() == "YES":
        return True
    if cleaned.upper() == "NO":
        return False
    return None


def find_keyword(text: str, keywords: Sequence[str]) -> Optional[str]:
    """Earliest keyword (by list precedence) contained in the text."""
    upper = text.upper()
    for kw in keywords:
        if kw in upper:
            return kw
    return None


def _require_responses(responses: Mapping[str, str], strategy: str) -> list[str]:
    texts = []
    for pid in strategy_prompt_ids(strategy):
        if pid not in responses:
            raise KeyError(f"missing response for prompt {pid} ({strategy})")
        texts.append(responses[pid])
    return texts


def classify_ppe(responses: Mapping[str, str], strategy: str, latency: float = 0.0,
                 q4_rule: str = "majority") -> Verdict:
    """Decide lab-coat compliance from the replies to a PPE strategy.

    Q1/Q2: YES means wearing, NO means not wearing, anything else is a
    hallucination (fallback: not wearing).
    Q3: keyword search (WHITE, LAB COAT, COAT) means wearing, else not.
    Q4: the two YES/NO answers vote directly, the free-form answer votes by
    the Q3 rule. Under the default "majority" rule the majority of resolved
    votes wins and ties go to wearing; under "priority" the first resolved
    answer decides. Malformed YES/NO answers are dropped from the vote but
    still flag the verdict as a hallucination.
    """
    if strategy not in PPE_STRATEGIES:
        raise ValueError(f"{strategy} is not a PPE strategy")
    texts = _require_responses(responses, strategy)

    if strategy in ("Q1", "Q2"):
        answer = parse_yes_no(texts[0])
        if answer is None:
            return Verdict(Ppe.NOT_WEARING, hallucination=True, latency=latency)
        return Verdict(Ppe.WEARING if answer else Ppe.NOT_WEARING, latency=latency)

    if strategy == "Q3":
        kw = find_keyword(texts[0], PPE_KEYWORDS)
        label = Ppe.WEARING if kw else Ppe.NOT_WEARING
        return Verdict(label, latency=latency, matched_keyword=kw)

    if q4_rule not in ("majority", "priority"):
        raise ValueError(f"unknown q4 rule '{q4_rule}'")
    votes: list[Ppe] = []
    hallucinated = False
    for text in texts[:2]:
        answer = parse_yes_no(text)
        if answer is None:
            hallucinated = True
        else:
            votes.append(Ppe.WEARING if answer else Ppe.NOT_WEARING)
    kw = find_keyword(texts[2], PPE_KEYWORDS)
    votes.append(Ppe.WEARING if kw else Ppe.NOT_WEARING)
    if q4_rule == "priority":
        label = votes[0]
    else:
        wearing = sum(1 for v in votes if v is Ppe.WEARING)
        label = Ppe.WEARING if wearing >= len(votes) - wearing else Ppe.NOT_WEARING
    return Verdict(label, hallucination=hallucinated, latency=latency, matched_keyword=kw)


def classify_posture(responses: Mapping[str, str], strategy: str, latency: float = 0.0) -> Verdict:
    """Decide posture (upright vs prone) from the replies to a strategy.

    Q5/Q6 ask for the prone condition: YES means prone, NO upright.
    Q7/Q8 ask for the upright condition: YES means upright, NO prone.
    Q9 is free-form: a prone keyword means prone, an upright keyword means
    upright (prone set checked first), neither is a hallucination.
    Q10 asks standing? then walking?: any YES means upright, both NO means
    prone; if either answer breaks the YES/NO format the free-form third
    answer is resolved by the Q9 keyword rule instead.
    Hallucination fallback label is upright (an accident is never assumed
    from a malformed reply).
    """
    if strategy not in POSTURE_STRATEGIES:
        raise ValueError(f"{strategy} is not a posture strategy")
    texts = _require_responses(responses, strategy)

    if strategy in ("Q5", "Q6"):
        answer = parse_yes_no(texts[0])
        if answer is None:
            return Verdict(Posture.UPRIGHT, hallucination=True, latency=latency)
        return Verdict(Posture.PRONE if answer else Posture.UPRIGHT, latency=latency)

    if strategy in ("Q7", "Q8"):
        answer = parse_yes_no(texts[0])
        if answer is None:
            return Verdict(Posture.UPRIGHT, hallucination=True, latency=latency)
        return Verdict(Posture.UPRIGHT if answer else Posture.PRONE, latency=latency)

    if strategy == "Q9":
        return _keyword_posture(texts[0], latency)

    # Q10: standing? / walking? with keyword fallback.
    standing = parse_yes_no(texts[0])
    walking = parse_yes_no(texts[1])
    if standing is not None and walking is not None:
        label = Posture.UPRIGHT if (standing or walking) else Posture.PRONE
        return Verdict(label, latency=latency)
    fallback = _keyword_posture(texts[2], latency)
    # The broken YES/NO reply counts as a hallucination even when the
    # keyword fallback rescues the decision.
    return Verdict(
        fallback.label,
        hallucination=True,
        latency=latency,
        matched_keyword=fallback.matched_keyword,
    )


def _keyword_posture(text: str, latency: float) -> Verdict:
    kw = find_keyword(text, PRONE_KEYWORDS)
    if kw:
        return Verdict(Posture.PRONE, latency=latency, matched_keyword=kw)
    kw = find_keyword(text, UPRIGHT_KEYWORDS)
    if kw:
        return Verdict(Posture.UPRIGHT, latency=latency, matched_keyword=kw)
    return Verdict(Posture.UPRIGHT, hallucination=True, latency=latency)


def classify(responses: Mapping[str, str], strategy: str, latency: float = 0.0) -> Verdict:
    """Dispatch to the PPE or posture classifier by strategy id."""
    if strategy in PPE_STRATEGIES:
        return classify_ppe(responses, strategy, latency)
    return classify_posture(responses, strategy, latency)


class Debouncer:
    """Suppresses single-frame flicker: the stable state flips only after
    ``m`` consecutive identical observations."""

    def __init__(self, m: int = 3, initial=None):
        if m < 1:
            raise ValueError("m must be >= 1")
        self.m = m
        self.stable = initial
        self._candidate = None
        self._count = 0

    def feed(self, value):
        """Observe one value; returns the (possibly updated) stable state."""
        if value == self.stable:
            self._candidate = None
            self._count = 0
            return self.stable
        if value == self._candidate:
            self._count += 1
        else:
            self._candidate = value
            self._count = 1
        if self._count >= self.m:
            self.stable = value
            self._candidate = None
            self._count = 0
        return self.stable

    def force(self, value):
        """Set the stable state directly (hazard injection path)."""
        self.stable = value
        self._candidate = None
        self._count = 0
        return self.stable


def debounce(history: Sequence, m: int = 3, initial=None):
    """Pure form of Debouncer: fold a verdict history into a stable state."""
    d = Debouncer(m=m, initial=initial)
    state = initial
    for value in history:
        state = d.feed(value)
    return state
