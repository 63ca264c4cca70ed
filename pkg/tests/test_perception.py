from __future__ import annotations

import cmath
import math
import random

import pytest

from labsentry.model import Point, Posture, Ppe, StationKind, StationPose
from labsentry.perception import (
    Debouncer,
    DetectionFrame,
    PROMPTS,
    classify,
    classify_posture,
    classify_ppe,
    debounce,
    find_keyword,
    parse_yes_no,
    project_detection,
)


def rgbd(x=0.0, y=0.0, heading=0.0, hfov=1.518) -> StationPose:
    return StationPose(id="S", position=Point(x, y), heading=heading,
                       kind=StationKind.RGBD, hfov=hfov)


# -- projection ---------------------------------------------------------------


def test_projection_center_pixel_straight_ahead():
    p = project_detection(rgbd(), pixel_x=0.5, range_m=3.0)
    assert p.x == pytest.approx(3.0, abs=1e-12)
    assert p.y == pytest.approx(0.0, abs=1e-12)


def test_projection_rotated_station():
    p = project_detection(rgbd(heading=math.pi / 2), pixel_x=0.5, range_m=2.0)
    assert p.x == pytest.approx(0.0, abs=1e-12)
    assert p.y == pytest.approx(2.0, abs=1e-12)


def test_projection_left_edge_frozen_oracle():
    # bearing 0.759 rad; endpoint computed with an independent trig oracle
    p = project_detection(rgbd(x=1.0, y=1.0, hfov=1.518), pixel_x=0.0, range_m=2.0)
    assert p.x == pytest.approx(2.4510491393064404, abs=1e-9)
    assert p.y == pytest.approx(2.376392529519845, abs=1e-9)


def test_projection_matches_complex_rotation_oracle():
    rng = random.Random(7)
    for _ in range(1000):
        st = rgbd(
            x=rng.uniform(-5, 25), y=rng.uniform(-5, 25),
            heading=rng.uniform(-math.pi, math.pi), hfov=rng.uniform(0.2, 3.0),
        )
        px = rng.uniform(0, 1)
        rng_m = rng.uniform(0.1, 20)
        got = project_detection(st, px, rng_m)
        # oracle: complex-plane rotation instead of explicit cos/sin
        z = complex(st.position.x, st.position.y) + rng_m * cmath.exp(
            1j * (st.heading + (0.5 - px) * st.hfov)
        )
        assert got.x == pytest.approx(z.real, abs=1e-9)
        assert got.y == pytest.approx(z.imag, abs=1e-9)


def test_projection_rejects_ir_station():
    ir = StationPose(id="I", position=Point(0, 0), heading=0.0, kind=StationKind.IR)
    with pytest.raises(ValueError, match="not RGB-D"):
        project_detection(ir, 0.5, 1.0)


def test_projection_rejects_nonpositive_range():
    with pytest.raises(ValueError, match="range"):
        project_detection(rgbd(), 0.5, 0.0)


# -- YES/NO and keyword primitives ------------------------------------------------


@pytest.mark.parametrize("text,expected", [
    ("YES", True), ("yes", True), (" Yes. ", True), ("YES!", True),
    ("NO", False), ("no.", False), (" NO ", False),
    ("maybe", None), ("", None), ("YES and NO", None), ("Y", None),
    ("Yes, definitely", None),
])
def test_parse_yes_no_shapes(text, expected):
    assert parse_yes_no(text) is expected


def test_keyword_precedence_is_list_order():
    text = "a white lab coat"  # all three PPE keywords match
    assert find_keyword(text, ("WHITE", "LAB COAT", "COAT")) == "WHITE"
    assert find_keyword("the lab coat", ("WHITE", "LAB COAT", "COAT")) == "LAB COAT"


# -- hand-labeled fixture corpus ----------------------------------------------------


def test_fixture_corpus_complete(classifier_fixtures):
    assert len(classifier_fixtures) >= 60
    strategies = {f["strategy"] for f in classifier_fixtures}
    assert strategies == set(PROMPTS)
    # every keyword exercised somewhere in the corpus
    texts = " ".join(
        " ".join(f["responses"].values()) for f in classifier_fixtures
    ).upper()
    for kw in ("WHITE", "LAB COAT", "COAT", "KNEELING", "SITTING", "CROUCHING",
               "BENDING", "SQUATTING", "LYING", "WALKING", "STANDING",
               "CHECKING", "EXAMINING", "LOOKING", "WORKING"):
        assert kw in texts, kw


def test_fixture_corpus_matches_oracle(classifier_fixtures):
    for fx in classifier_fixtures:
        verdict = classify(fx["responses"], fx["strategy"])
        assert verdict.label.value == fx["label"], fx
        assert verdict.hallucination == fx["hallucination"], fx
        if "keyword" in fx:
            assert verdict.matched_keyword == fx["keyword"], fx


def test_format_violation_never_reads_as_yes():
    rng = random.Random(5)
    garbage = [
        "The person is visible", "unsure", "probably", "image unclear",
        "laboratory scene", "ypp", "yes no maybe",
    ]
    for strategy, positive in (("Q1", Ppe.WEARING), ("Q7", Posture.UPRIGHT)):
        pid = PROMPTS[strategy][0][0]
        for _ in range(50):
            text = rng.choice(garbage)
            verdict = classify({pid: text}, strategy)
            assert verdict.hallucination
            # fallback label is the negative answer, never the YES reading
            if strategy == "Q1":
                assert verdict.label is Ppe.NOT_WEARING
            else:
                assert verdict.label is Posture.UPRIGHT


def test_missing_response_raises():
    with pytest.raises(KeyError, match="Q4.2"):
        classify_ppe({"Q4.1": "YES", "Q4.3": "coat"}, "Q4")
    with pytest.raises(KeyError, match="Q10.3"):
        classify_posture({"Q10.1": "YES", "Q10.2": "NO"}, "Q10")


def test_wrong_category_strategy_rejected():
    with pytest.raises(ValueError):
        classify_ppe({"Q7": "YES"}, "Q7")
    with pytest.raises(ValueError):
        classify_posture({"Q1": "YES"}, "Q1")


def test_latency_carried_through():
    v = classify_ppe({"Q1": "YES"}, "Q1", latency=2.75)
    assert v.latency == 2.75


def test_q4_priority_rule_first_resolved_decides():
    responses = {"Q4.1": "NO", "Q4.2": "YES", "Q4.3": "a white lab coat"}
    assert classify_ppe(responses, "Q4").label is Ppe.WEARING  # majority 2-1
    assert classify_ppe(responses, "Q4", q4_rule="priority").label is Ppe.NOT_WEARING
    # a malformed first answer defers to the next resolved one
    responses = {"Q4.1": "blurred", "Q4.2": "YES", "Q4.3": "jeans"}
    v = classify_ppe(responses, "Q4", q4_rule="priority")
    assert v.label is Ppe.WEARING and v.hallucination
    with pytest.raises(ValueError, match="q4 rule"):
        classify_ppe(responses, "Q4", q4_rule="bogus")


# -- debounce -----------------------------------------------------------------------


def test_debounce_requires_m_consecutive():
    assert debounce(["NW"], m=3, initial="W") == "W"
    assert debounce(["NW", "NW"], m=3, initial="W") == "W"
    assert debounce(["NW", "NW", "NW"], m=3, initial="W") == "NW"


def test_debounce_alternation_never_flips():
    seq = ["NW", "W"] * 20
    assert debounce(seq, m=3, initial="W") == "W"


def test_debounce_m1_flips_immediately():
    assert debounce(["NW"], m=1, initial="W") == "NW"


def test_debounce_counter_resets_on_interruption():
    d = Debouncer(m=3, initial="W")
    for v in ["NW", "NW", "W", "NW", "NW"]:
        d.feed(v)
    assert d.stable == "W"
    d.feed("NW")
    assert d.stable == "NW"


def test_debounce_flip_positions_have_m_identical_prefix():
    rng = random.Random(11)
    for _ in range(200):
        seq = [rng.choice("AB") for _ in range(rng.randint(1, 40))]
        d = Debouncer(m=3, initial="A")
        stable = "A"
        for i, v in enumerate(seq):
            new = d.feed(v)
            if new != stable:
                assert seq[i - 2 : i + 1] == [new] * 3
                stable = new


def test_debounce_rejects_bad_m():
    with pytest.raises(ValueError):
        Debouncer(m=0)


# -- detection frame wire format -------------------------------------------------------


def test_frame_record_round_trip():
    rec = {
        "station": "CE-RGBD-1", "t": 4.5, "pixel_x": 0.25, "range": 3.0,
        "responses": {"Q7": "YES"}, "person": "W1", "latency": 2.1,
        "truth": {"posture": "upright"},
    }
    frame = DetectionFrame.from_record(rec)
    assert frame.to_record() == rec
    assert frame.covers("Q7")
    assert not frame.covers("Q10")


def test_frame_validates_ranges():
    with pytest.raises(ValueError):
        DetectionFrame(station="S", t=0, pixel_x=1.5, range_m=1, responses={})
    with pytest.raises(ValueError):
        DetectionFrame(station="S", t=0, pixel_x=0.5, range_m=0, responses={})
