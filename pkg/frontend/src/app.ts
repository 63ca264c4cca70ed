// Browser wiring: stream -> projection -> canvas + alert feed + panel.

import { GatewayClient } from "./client.js";
import { Draw, renderMap, RobotPositions, Viewport } from "./mapView.js";
import { countdownSeconds, initialView, project, ViewState } from "./projection.js";
import { EventStream } from "./stream.js";
import { StateSnapshot } from "./types.js";

const VIEWPORT: Viewport = { width: 800, height: 600, margin: 10 };
const ANIMATION_MS = 600;

function canvasDraw(ctx: CanvasRenderingContext2D): Draw {
  return {
    clear(w, h) {
      ctx.fillStyle = "#ffffff";
      ctx.fillRect(0, 0, w, h);
    },
    line(x1, y1, x2, y2, color, width, dashed) {
      ctx.strokeStyle = color;
      ctx.lineWidth = width;
      ctx.setLineDash(dashed ? [6, 4] : []);
      ctx.beginPath();
      ctx.moveTo(x1, y1);
      ctx.lineTo(x2, y2);
      ctx.stroke();
      ctx.setLineDash([]);
    },
    circle(x, y, r, fill, stroke) {
      ctx.beginPath();
      ctx.arc(x, y, r, 0, Math.PI * 2);
      if (fill) {
        ctx.fillStyle = fill;
        ctx.fill();
      }
      if (stroke) {
        ctx.strokeStyle = stroke;
        ctx.stroke();
      }
    },
    rect(x, y, w, h, fill, stroke) {
      if (fill) {
        ctx.fillStyle = fill;
        ctx.fillRect(x, y, w, h);
      }
      if (stroke) {
        ctx.strokeStyle = stroke;
        ctx.lineWidth = 2;
        ctx.strokeRect(x, y, w, h);
      }
    },
    triangle(x, y, size, fill) {
      ctx.fillStyle = fill;
      ctx.strokeStyle = "#282828";
      ctx.beginPath();
      ctx.moveTo(x, y - size);
      ctx.lineTo(x - size, y + size);
      ctx.lineTo(x + size, y + size);
      ctx.closePath();
      ctx.fill();
      ctx.stroke();
    },
    text(x, y, s, color, size) {
      ctx.fillStyle = color;
      ctx.font = `${size ?? 11}px sans-serif`;
      ctx.fillText(s, x, y);
    },
  };
}

interface Animator {
  previous: Map<string, { x: number; y: number }>;
  current: Map<string, { x: number; y: number }>;
  startedAt: number;
}

function robotPositionsAt(anim: Animator, now: number): RobotPositions {
  const k = Math.min(1, (now - anim.startedAt) / ANIMATION_MS);
  const out: RobotPositions = {};
  for (const [id, cur] of anim.current) {
    const prev = anim.previous.get(id) ?? cur;
    out[id] = { x: prev.x + (cur.x - prev.x) * k, y: prev.y + (cur.y - prev.y) * k };
  }
  return out;
}

function advanceAnimator(anim: Animator, snapshot: StateSnapshot, now: number): void {
  const next = new Map(snapshot.robots.map((r) => [r.id, { x: r.x, y: r.y }]));
  let moved = false;
  for (const [id, pos] of next) {
    const cur = anim.current.get(id);
    if (!cur || cur.x !== pos.x || cur.y !== pos.y) moved = true;
  }
  if (moved) {
    anim.previous = new Map(
      [...anim.current.entries()].length ? robotEntriesAt(anim, now) : next,
    );
    anim.current = next;
    anim.startedAt = now;
  }
}

function robotEntriesAt(anim: Animator, now: number): [string, { x: number; y: number }][] {
  return Object.entries(robotPositionsAt(anim, now));
}

export function startApp(root: Document, gatewayBase?: string): void {
  const params = new URLSearchParams(root.defaultView?.location.search ?? "");
  const base = gatewayBase ?? params.get("gateway") ?? "";
  const client = new GatewayClient(base);

  const canvas = root.getElementById("map") as HTMLCanvasElement;
  const ctx = canvas.getContext("2d")!;
  const draw = canvasDraw(ctx);
  const banner = root.getElementById("banner")!;
  const alertsBox = root.getElementById("alerts")!;
  const form = root.getElementById("inject-form") as HTMLFormElement;
  const formError = root.getElementById("inject-error")!;

  let view: ViewState = initialView();
  const anim: Animator = { previous: new Map(), current: new Map(), startedAt: 0 };

  const stream = new EventStream(base, {
    onItem(item) {
      view = project(view, item);
      if (item.type === "state") {
        advanceAnimator(anim, item.data, performance.now());
      }
      renderAlerts();
    },
    onStale(stale) {
      banner.classList.toggle("hidden", !stale);
    },
  });
  stream.start();

  function frame(): void {
    renderMap(draw, view, VIEWPORT, robotPositionsAt(anim, performance.now()));
    requestAnimationFrame(frame);
  }
  requestAnimationFrame(frame);

  function renderAlerts(): void {
    const simNow = view.snapshot?.t ?? 0;
    alertsBox.innerHTML = "";
    const cards = [...view.alerts].reverse();
    for (const alert of cards) {
      const card = root.createElement("div");
      card.className = `card ${alert.kind} ${alert.state}${alert.acked ? " acked" : ""}`;
      const remaining = countdownSeconds(alert, simNow);
      const countdown =
        remaining != null ? `<span class="countdown">${remaining.toFixed(0)} s</span>` : "";
      card.innerHTML = `
        <strong>${alert.kind.toUpperCase()}</strong> ${alert.subject}
        <span class="state">${alert.state}</span> ${countdown}
        ${alert.note ? `<div class="note">${alert.note}</div>` : ""}
      `;
      const ackBtn = root.createElement("button");
      ackBtn.textContent = alert.acked ? "acknowledged" : "acknowledge";
      ackBtn.disabled = alert.acked;
      ackBtn.addEventListener("click", async () => {
        const err = await client.ack(alert.incidentId);
        if (err) formError.textContent = `ack failed: ${err.detail}`;
      });
      card.appendChild(ackBtn);
      alertsBox.appendChild(card);
    }
  }

  // clicking the map fills the injection position fields
  canvas.addEventListener("click", (ev) => {
    if (!view.snapshot) return;
    const rect = canvas.getBoundingClientRect();
    const px = ev.clientX - rect.left;
    const py = ev.clientY - rect.top;
    const usableW = VIEWPORT.width - 2 * VIEWPORT.margin;
    const usableH = VIEWPORT.height - 2 * VIEWPORT.margin;
    const map = view.snapshot.map;
    const scale = Math.min(usableW / map.width, usableH / map.height);
    const offX = VIEWPORT.margin + (usableW - map.width * scale) / 2;
    const offY = VIEWPORT.margin + (usableH - map.height * scale) / 2;
    const x = (px - offX) / scale;
    const y = map.height - (py - offY) / scale;
    (form.elements.namedItem("x") as HTMLInputElement).value = x.toFixed(2);
    (form.elements.namedItem("y") as HTMLInputElement).value = y.toFixed(2);
  });

  form.addEventListener("submit", async (ev) => {
    ev.preventDefault();
    formError.textContent = "";
    const data = new FormData(form);
    const body: any = {
      kind: data.get("kind"),
      target: data.get("target"),
    };
    const value = data.get("value");
    if (value) body.value = isNaN(Number(value)) ? value : Number(value);
    const x = data.get("x");
    const y = data.get("y");
    if (x) body.x = Number(x);
    if (y) body.y = Number(y);
    const err = await client.inject(body);
    if (err) formError.textContent = `${err.status}: ${err.detail}`;
  });
}

declare global {
  interface Window {
    labsentryStart?: typeof startApp;
  }
}

if (typeof window !== "undefined" && typeof document !== "undefined") {
  window.labsentryStart = startApp;
  window.addEventListener("load", () => startApp(document));
}
