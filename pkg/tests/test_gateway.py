from __future__ import annotations

import json
import time

import httpx
import pytest

from labsentry.coordinator import PolicyConfig
from labsentry.vlm import MockBackend

SAFE_SCRIPT = {
    "fire:c3": {"policy": "first_safe"},
    "accident:c3": {"policy": "first_safe"},
}

FAST = dict(clock_scale=0.02)  # 1 simulated second = 20 ms wall


def make(gateway_factory, lab_map, **policy_over):
    policy = PolicyConfig(**{**FAST, **policy_over})
    return gateway_factory(lab_map, policy=policy, backend=MockBackend(SAFE_SCRIPT))


# explicit generous timeouts: the engine loop and uvicorn share the GIL with
# pytest, so default 5 s client timeouts occasionally flake under load
def GET(url):
    return httpx.get(url, timeout=15)


def POST(url, json):
    return httpx.post(url, json=json, timeout=15)


def PATCH(url, json):
    return httpx.patch(url, json=json, timeout=15)


def wait_for(predicate, timeout=5.0, interval=0.02):
    deadline = time.monotonic() + timeout
    while time.monotonic() < deadline:
        value = predicate()
        if value:
            return value
        time.sleep(interval)
    raise AssertionError("condition not met in time")


def read_stream(base, since=0, want=10, timeout=5.0):
    """Collect up to ``want`` stream items, giving up at the wall deadline
    (keepalive comments defeat httpx's own read timeout)."""
    items = []
    deadline = time.monotonic() + timeout
    with httpx.stream("GET", f"{base}/events?since={since}", timeout=timeout) as resp:
        assert resp.status_code == 200
        for line in resp.iter_lines():
            if line.startswith("data: "):
                items.append(json.loads(line[6:]))
                if len(items) >= want:
                    break
            if time.monotonic() > deadline:
                break
    return items


def test_state_reflects_ppe_injection(gateway_factory, lab_map):
    srv = make(gateway_factory, lab_map)
    r = POST(srv.base + "/inject",
                   json={"kind": "ppe", "target": "W1", "x": 5, "y": 5})
    assert r.status_code == 200
    state = wait_for(lambda: (
        s := GET(srv.base + "/state").json()) and s["workers"] and s)
    worker = state["workers"][0]
    assert worker["color"] == "yellow"
    assert state["frozen"] is True


def test_fire_injection_streams_full_flow(gateway_factory, lab_map):
    srv = make(gateway_factory, lab_map)
    POST(srv.base + "/inject", json={"kind": "fire", "target": "HOT-1", "value": 60})
    wait_for(lambda: GET(srv.base + "/state").json()["zones"][0]["alarmed"])
    items = read_stream(srv.base, want=12)
    seqs = [i["seq"] for i in items]
    assert seqs == list(range(seqs[0], seqs[0] + len(seqs)))  # gapless, ordered
    acts = [i["data"]["action"] for i in items if i["type"] == "action"]
    for expected in ("alarm", "prompt", "parse", "validate", "move_to", "notify"):
        assert expected in acts, (expected, acts)


def test_countdown_patch_then_escalation(gateway_factory, lab_map):
    srv = make(gateway_factory, lab_map)
    r = PATCH(srv.base + "/config", json={"countdown": 5})
    assert r.status_code == 200 and r.json()["countdown"] == 5
    POST(srv.base + "/inject", json={"kind": "ppe", "target": "W1", "x": 5, "y": 5})
    state = wait_for(lambda: (
        s := GET(srv.base + "/state").json())
        and any(i["state"] == "escalated" for i in s["incidents"]) and s)
    assert any(i["state"] == "escalated" for i in state["incidents"])


def test_error_codes(gateway_factory, lab_map):
    srv = make(gateway_factory, lab_map)
    assert POST(srv.base + "/inject",
                      json={"kind": "fire", "target": "NOPE"}).status_code == 404
    assert POST(srv.base + "/inject",
                      json={"kind": "bogus", "target": "HOT-1"}).status_code == 422
    assert POST(srv.base + "/inject",
                      json={"kind": "ppe", "target": "GHOST"}).status_code == 404
    assert PATCH(srv.base + "/config", json={"nope": 1}).status_code == 422
    assert POST(srv.base + "/ack",
                      json={"incident_id": "missing"}).status_code == 404
    assert GET(srv.base + "/snapshots/424242.png").status_code == 404


def test_map_and_snapshot_endpoints(gateway_factory, lab_map):
    srv = make(gateway_factory, lab_map)
    r = GET(srv.base + "/map.png")
    assert r.status_code == 200
    assert r.headers["content-type"] == "image/png"
    assert r.content[:8] == b"\x89PNG\r\n\x1a\n"
    POST(srv.base + "/inject", json={"kind": "fire", "target": "HOT-1", "value": 60})
    state = wait_for(lambda: (
        s := GET(srv.base + "/state").json()) and s["incidents"] and s)
    # the notification snapshot is served by reference
    items = read_stream(srv.base, want=20)
    notif = [i for i in items if i["type"] == "action"
             and i["data"]["action"] == "notify"]
    url = notif[0]["data"]["detail"]["payload"]["snapshot_url"]
    r = GET(srv.base + url)
    assert r.status_code == 200 and r.headers["content-type"] == "image/png"


def test_ack_appears_in_action_log(gateway_factory, lab_map):
    srv = make(gateway_factory, lab_map)
    POST(srv.base + "/inject", json={"kind": "accident", "target": "W2", "x": 8, "y": 4})
    state = wait_for(lambda: (
        s := GET(srv.base + "/state").json()) and s["incidents"] and s)
    incident_id = state["incidents"][0]["id"]
    assert POST(srv.base + "/ack", json={"incident_id": incident_id}).status_code == 200
    items = read_stream(srv.base, want=30, timeout=5.0)
    acks = [i for i in items if i["type"] == "action" and i["data"]["action"] == "ack"]
    assert acks and acks[0]["data"]["incident_id"] == incident_id
    state = GET(srv.base + "/state").json()
    assert state["incidents"][0]["acked"] is True


def test_stream_resume_with_since(gateway_factory, lab_map):
    srv = make(gateway_factory, lab_map)
    POST(srv.base + "/inject", json={"kind": "fire", "target": "HOT-2", "value": 70})
    wait_for(lambda: GET(srv.base + "/state").json()["zones"][1]["alarmed"])
    first = read_stream(srv.base, since=0, want=5)
    rest = read_stream(srv.base, since=first[-1]["seq"], want=3)
    assert rest[0]["seq"] == first[-1]["seq"] + 1


def test_config_roundtrip(gateway_factory, lab_map):
    srv = make(gateway_factory, lab_map)
    cfg = GET(srv.base + "/config").json()
    assert cfg["prompt_condition"] == "c3"
    PATCH(srv.base + "/config", json={"prompt_condition": "c2", "warning_interval": 10})
    cfg = GET(srv.base + "/config").json()
    assert cfg["prompt_condition"] == "c2"
    assert cfg["warning_interval"] == 10
