// Pure projection of the gateway event stream into view state.
//
// The console renders nothing it computed itself: every pixel derives from
// this fold over stream items, so replaying a recorded stream reproduces
// the same final view.

import { ActionEntry, StateSnapshot, StreamItem } from "./types.js";

export interface Trail {
  robot: string;
  route: number[];
  startedSeq: number;
}

export interface AlertCard {
  incidentId: string;
  kind: string;
  subject: string;
  state: string;
  openedAt: number;
  deadline: number | null;
  acked: boolean;
  notified: boolean;
  note: string | null;
}

export interface ViewState {
  snapshot: StateSnapshot | null;
  alerts: AlertCard[];
  trails: Trail[];
  log: ActionEntry[];
  lastSeq: number;
  stale: boolean;
}

const TRAIL_KEEP = 8;
const LOG_KEEP = 200;

export function initialView(): ViewState {
  return { snapshot: null, alerts: [], trails: [], log: [], lastSeq: 0, stale: true };
}

function upsertAlert(alerts: AlertCard[], id: string, patch: Partial<AlertCard>): AlertCard[] {
  const idx = alerts.findIndex((a) => a.incidentId === id);
  if (idx === -1) {
    const fresh: AlertCard = {
      incidentId: id,
      kind: "unknown",
      subject: "",
      state: "active",
      openedAt: 0,
      deadline: null,
      acked: false,
      notified: false,
      note: null,
      ...patch,
    };
    return [...alerts, fresh];
  }
  const next = alerts.slice();
  next[idx] = { ...next[idx], ...patch };
  return next;
}

export function project(view: ViewState, item: StreamItem): ViewState {
  const lastSeq = Math.max(view.lastSeq, item.seq);
  if (item.type === "state") {
    const snapshot = item.data;
    // incidents travel with state snapshots; they refresh the alert cards
    let alerts = view.alerts;
    for (const inc of snapshot.incidents ?? []) {
      alerts = upsertAlert(alerts, inc.id, {
        kind: inc.kind,
        subject: inc.subject,
        state: inc.state,
        openedAt: inc.opened_at,
        deadline: inc.deadline,
        acked: inc.acked,
        notified: inc.notified,
      });
    }
    return { ...view, snapshot, alerts, lastSeq, stale: false };
  }

  const entry = item.data;
  const log = [...view.log, entry].slice(-LOG_KEEP);
  let alerts = view.alerts;
  let trails = view.trails;
  switch (entry.action) {
    case "move_to":
      trails = [
        ...trails,
        { robot: entry.detail.robot, route: entry.detail.route, startedSeq: item.seq },
      ].slice(-TRAIL_KEEP);
      break;
    case "alarm":
      if (entry.incident_id) {
        alerts = upsertAlert(alerts, entry.incident_id, {
          kind: "fire",
          subject: entry.detail.zone,
          state: "active",
        });
      }
      break;
    case "escalate":
      if (entry.incident_id) {
        alerts = upsertAlert(alerts, entry.incident_id, { state: "escalated" });
      }
      break;
    case "ack":
      if (entry.incident_id) {
        alerts = upsertAlert(alerts, entry.incident_id, { acked: true });
      }
      break;
    case "resolve":
      if (entry.incident_id) {
        alerts = upsertAlert(alerts, entry.incident_id, { state: "resolved" });
      }
      break;
    case "fallback":
      if (entry.incident_id) {
        alerts = upsertAlert(alerts, entry.incident_id, { note: entry.detail.note ?? null });
      }
      break;
    case "notify":
      if (entry.incident_id) {
        alerts = upsertAlert(alerts, entry.incident_id, { notified: true });
      }
      break;
    default:
      break;
  }
  return { ...view, alerts, trails, log, lastSeq, stale: false };
}

export function projectAll(items: StreamItem[], from?: ViewState): ViewState {
  return items.reduce(project, from ?? initialView());
}

// Remaining countdown seconds for an alert, given the latest simulated time.
export function countdownSeconds(alert: AlertCard, simNow: number): number | null {
  if (alert.deadline == null || alert.state !== "countdown_running") return null;
  return Math.max(0, alert.deadline - simNow);
}
