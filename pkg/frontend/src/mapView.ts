// Canvas floorplan renderer.
//
// Drawing goes through the small Draw interface so tests can record calls
// without a DOM; app.ts adapts it onto CanvasRenderingContext2D. Symbols
// match the map legend: triangles for people (tinted grey/yellow/red),
// orange squares for robots, red circles for fires/alarmed zones, blue
// circles for calm zones with the temperature above, green dots for
// navigation nodes, outlined squares for exits.

import { ViewState } from "./projection.js";
import { StateSnapshot } from "./types.js";

export interface Draw {
  clear(width: number, height: number): void;
  line(x1: number, y1: number, x2: number, y2: number, color: string, width: number, dashed?: boolean): void;
  circle(x: number, y: number, r: number, fill: string | null, stroke?: string): void;
  rect(x: number, y: number, w: number, h: number, fill: string | null, stroke?: string): void;
  triangle(x: number, y: number, size: number, fill: string): void;
  text(x: number, y: number, s: string, color: string, size?: number): void;
}

export const MEEPLE_COLORS: Record<string, string> = {
  grey: "#808080",
  yellow: "#f0c800",
  red: "#dc143c",
};

export interface Viewport {
  width: number;
  height: number;
  margin: number;
}

export class Transform {
  scale: number;
  offX: number;
  offY: number;

  constructor(private snapshot: StateSnapshot, private vp: Viewport) {
    const usableW = vp.width - 2 * vp.margin;
    const usableH = vp.height - 2 * vp.margin;
    this.scale = Math.min(usableW / snapshot.map.width, usableH / snapshot.map.height);
    this.offX = vp.margin + (usableW - snapshot.map.width * this.scale) / 2;
    this.offY = vp.margin + (usableH - snapshot.map.height * this.scale) / 2;
  }

  px(x: number, y: number): [number, number] {
    return [
      this.offX + x * this.scale,
      this.offY + (this.snapshot.map.height - y) * this.scale,
    ];
  }
}

export interface RobotPositions {
  [robotId: string]: { x: number; y: number };
}

export function renderMap(
  draw: Draw,
  view: ViewState,
  vp: Viewport,
  robotPositions?: RobotPositions,
): void {
  draw.clear(vp.width, vp.height);
  const snapshot = view.snapshot;
  if (!snapshot) {
    draw.text(vp.width / 2 - 40, vp.height / 2, "waiting for state...", "#666");
    return;
  }
  const tf = new Transform(snapshot, vp);
  const nodeAt = new Map(snapshot.map.nodes.map((n) => [n.id, n]));

  for (const [a, b] of snapshot.map.edges) {
    const na = nodeAt.get(a);
    const nb = nodeAt.get(b);
    if (!na || !nb) continue;
    const [x1, y1] = tf.px(na.x, na.y);
    const [x2, y2] = tf.px(nb.x, nb.y);
    draw.line(x1, y1, x2, y2, "#bedcbe", 2);
  }
  for (const node of snapshot.map.nodes) {
    const [x, y] = tf.px(node.x, node.y);
    draw.circle(x, y, 4, "#228b22");
    draw.text(x + 6, y - 6, String(node.id), "#145a14");
  }
  for (const exit of snapshot.map.exits) {
    const [x, y] = tf.px(exit.x, exit.y);
    draw.rect(x - 7, y - 7, 14, 14, null, "#008000");
    draw.text(x - 10, y + 20, "EXIT", "#008000");
  }

  // recent reposition routes, dashed, so motion is legible while it happens
  for (const trail of view.trails) {
    for (let i = 1; i < trail.route.length; i++) {
      const na = nodeAt.get(trail.route[i - 1]);
      const nb = nodeAt.get(trail.route[i]);
      if (!na || !nb) continue;
      const [x1, y1] = tf.px(na.x, na.y);
      const [x2, y2] = tf.px(nb.x, nb.y);
      draw.line(x1, y1, x2, y2, "#ff8c00", 2, true);
    }
  }

  for (const zone of snapshot.zones) {
    const [x, y] = tf.px(zone.x, zone.y);
    const color = zone.alarmed ? "#dc143c" : "#1e90ff";
    draw.circle(x, y, 10, color);
    draw.text(x - 12, y - 16, `${zone.current.toFixed(1)}`, color);
  }

  for (const hazard of snapshot.hazards) {
    if (hazard.kind !== "fire") continue;
    if (snapshot.zones.some((z) => z.id === hazard.subject)) continue;
    const [x, y] = tf.px(hazard.x, hazard.y);
    draw.circle(x, y, 12, "#dc143c");
  }

  for (const robot of snapshot.robots) {
    const pos = robotPositions?.[robot.id] ?? { x: robot.x, y: robot.y };
    const [x, y] = tf.px(pos.x, pos.y);
    draw.rect(x - 9, y - 9, 18, 18, "#ff8c00");
    draw.text(x - 8, y + 22, robot.id, "#5a3200");
    if (robot.frozen) draw.text(x - 8, y - 12, "❄", "#1e90ff");
  }

  for (const worker of snapshot.workers) {
    const [x, y] = tf.px(worker.x, worker.y);
    draw.triangle(x, y, 10, MEEPLE_COLORS[worker.color] ?? "#808080");
  }

  if (snapshot.frozen) {
    draw.text(10, 18, "FLEET FROZEN", "#dc143c", 14);
  }
}
