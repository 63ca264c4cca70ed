// Wire types mirroring the gateway's /state and /events JSON.

export interface MapNode {
  id: number;
  x: number;
  y: number;
}

export interface MapInfo {
  width: number;
  height: number;
  exits: { x: number; y: number }[];
  nodes: MapNode[];
  edges: [number, number][];
  stations: { id: string; x: number; y: number; heading: number; kind: string }[];
}

export interface WorkerInfo {
  id: string;
  x: number;
  y: number;
  ppe: string;
  posture: string;
  color: "grey" | "yellow" | "red";
}

export interface RobotInfo {
  id: string;
  node: number;
  x: number;
  y: number;
  path: number[];
  target: number | null;
  frozen: boolean;
}

export interface ZoneInfo {
  id: string;
  x: number;
  y: number;
  threshold: number;
  current: number;
  alarmed: boolean;
  saturated: boolean;
}

export interface IncidentInfo {
  id: string;
  kind: string;
  subject: string;
  state: string;
  deadline: number | null;
  opened_at: number;
  acked: boolean;
  notified: boolean;
}

export interface StateSnapshot {
  t: number;
  generation: number;
  frozen: boolean;
  map: MapInfo;
  workers: WorkerInfo[];
  robots: RobotInfo[];
  zones: ZoneInfo[];
  hazards: { kind: string; subject: string; x: number; y: number; t: number }[];
  incidents?: IncidentInfo[];
  config?: Record<string, unknown>;
  seq?: number;
}

export interface ActionEntry {
  t: number;
  seq: number;
  incident_id: string | null;
  action: string;
  detail: Record<string, any>;
}

export type StreamItem =
  | { seq: number; type: "state"; data: StateSnapshot }
  | { seq: number; type: "action"; data: ActionEntry };
