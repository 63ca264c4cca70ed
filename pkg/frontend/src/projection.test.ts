import { describe, expect, it } from "vitest";

import { countdownSeconds, initialView, project, projectAll } from "./projection.js";
import { StateSnapshot, StreamItem } from "./types.js";

function snapshot(over: Partial<StateSnapshot> = {}): StateSnapshot {
  return {
    t: 5,
    generation: 1,
    frozen: false,
    map: { width: 10, height: 10, exits: [], nodes: [], edges: [], stations: [] },
    workers: [],
    robots: [],
    zones: [],
    hazards: [],
    incidents: [],
    ...over,
  };
}

function stateItem(seq: number, over: Partial<StateSnapshot> = {}): StreamItem {
  return { seq, type: "state", data: snapshot(over) };
}

function actionItem(seq: number, action: string, detail: any = {}, incident: string | null = null): StreamItem {
  return {
    seq,
    type: "action",
    data: { t: seq, seq, incident_id: incident, action, detail },
  };
}

describe("projection", () => {
  it("applies state snapshots and tracks the last sequence number", () => {
    const view = project(initialView(), stateItem(3));
    expect(view.snapshot?.generation).toBe(1);
    expect(view.lastSeq).toBe(3);
    expect(view.stale).toBe(false);
  });

  it("builds alert cards from incident lists and action entries", () => {
    let view = initialView();
    view = project(view, stateItem(1, {
      incidents: [{
        id: "ppe-0001", kind: "ppe", subject: "W1", state: "countdown_running",
        deadline: 600, opened_at: 0, acked: false, notified: false,
      }],
    }));
    expect(view.alerts).toHaveLength(1);
    expect(view.alerts[0].state).toBe("countdown_running");

    view = project(view, actionItem(2, "escalate", {}, "ppe-0001"));
    expect(view.alerts[0].state).toBe("escalated");
    view = project(view, actionItem(3, "ack", {}, "ppe-0001"));
    expect(view.alerts[0].acked).toBe(true);
    view = project(view, actionItem(4, "resolve", {}, "ppe-0001"));
    expect(view.alerts[0].state).toBe("resolved");
  });

  it("records reposition routes as trails", () => {
    let view = initialView();
    view = project(view, actionItem(1, "move_to", { robot: "R2", route: [8, 11, 3], to: 3 }, "fire-0001"));
    expect(view.trails).toEqual([{ robot: "R2", route: [8, 11, 3], startedSeq: 1 }]);
  });

  it("annotates alerts from fallback actions", () => {
    let view = initialView();
    view = project(view, actionItem(1, "alarm", { zone: "HOT-1" }, "fire-0001"));
    view = project(view, actionItem(2, "fallback", { note: "manual intervention required" }, "fire-0001"));
    expect(view.alerts[0].note).toContain("manual intervention");
  });

  it("is a pure fold: replaying the same stream reproduces the same view", () => {
    const stream: StreamItem[] = [
      stateItem(1),
      actionItem(2, "alarm", { zone: "HOT-1", value: 60 }, "fire-0001"),
      actionItem(3, "move_to", { robot: "R1", route: [2, 1], to: 1 }, "fire-0001"),
      stateItem(4, { generation: 2, zones: [{ id: "HOT-1", x: 7, y: 9, threshold: 55, current: 60, alarmed: true, saturated: false }] }),
      actionItem(5, "notify", {}, "fire-0001"),
      actionItem(6, "ack", {}, "fire-0001"),
    ];
    const once = projectAll(stream);
    const twice = projectAll(stream);
    expect(JSON.stringify(twice)).toBe(JSON.stringify(once));
    // and incremental application agrees with the batch fold
    let incremental = initialView();
    for (const item of stream) incremental = project(incremental, item);
    expect(JSON.stringify(incremental)).toBe(JSON.stringify(once));
  });

  it("computes countdowns only while the countdown runs", () => {
    const alert = {
      incidentId: "ppe-0001", kind: "ppe", subject: "W1",
      state: "countdown_running", openedAt: 0, deadline: 600,
      acked: false, notified: false, note: null,
    };
    expect(countdownSeconds(alert, 450)).toBe(150);
    expect(countdownSeconds(alert, 700)).toBe(0);
    expect(countdownSeconds({ ...alert, state: "escalated" }, 450)).toBeNull();
    expect(countdownSeconds({ ...alert, deadline: null }, 450)).toBeNull();
  });
});
