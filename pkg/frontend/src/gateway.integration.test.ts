// Round trip against the real gateway: spawn the Python server, consume its
// event stream, inject hazards through the client, and check that the
// projected view shows what an operator would see.

import { ChildProcess, spawn } from "node:child_process";
import { createServer } from "node:net";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { GatewayClient } from "./client.js";
import { renderMap, Viewport } from "./mapView.js";
import { initialView, project, projectAll, ViewState } from "./projection.js";
import { EventStream } from "./stream.js";
import { StreamItem } from "./types.js";

const VP: Viewport = { width: 800, height: 600, margin: 10 };

function freePort(): Promise<number> {
  return new Promise((resolve, reject) => {
    const srv = createServer();
    srv.listen(0, "127.0.0.1", () => {
      const port = (srv.address() as { port: number }).port;
      srv.close(() => resolve(port));
    });
    srv.on("error", reject);
  });
}

async function waitFor<T>(probe: () => T | null | undefined | false, timeoutMs = 5000): Promise<T> {
  const deadline = Date.now() + timeoutMs;
  while (Date.now() < deadline) {
    const value = probe();
    if (value) return value;
    await new Promise((r) => setTimeout(r, 25));
  }
  throw new Error("condition not met in time");
}

function drawCalls(view: ViewState): string {
  const calls: unknown[] = [];
  const record = (name: string) => (...args: unknown[]) => calls.push([name, ...args]);
  renderMap(
    {
      clear: record("clear"),
      line: record("line"),
      circle: record("circle"),
      rect: record("rect"),
      triangle: record("triangle"),
      text: record("text"),
    },
    view,
    VP,
  );
  return JSON.stringify(calls);
}

describe("gateway round trip", () => {
  let proc: ChildProcess;
  let base: string;
  let client: GatewayClient;
  let stream: EventStream;
  let view: ViewState;
  const recorded: StreamItem[] = [];

  beforeAll(async () => {
    const port = await freePort();
    base = `http://127.0.0.1:${port}`;
    proc = spawn(
      "python3",
      ["-m", "labsentry.cli", "serve", "--map", "demo", "--port", String(port),
       "--clock-scale", "0.01", "--countdown", "120"],
      { stdio: "ignore" },
    );
    client = new GatewayClient(base);
    await waitFor(() => true, 0).catch(() => undefined);
    const deadline = Date.now() + 15000;
    for (;;) {
      try {
        await client.state();
        break;
      } catch {
        if (Date.now() > deadline) throw new Error("gateway did not come up");
        await new Promise((r) => setTimeout(r, 100));
      }
    }
    view = initialView();
    stream = new EventStream(base, {
      onItem(item) {
        recorded.push(item);
        view = project(view, item);
      },
    });
    stream.start();
  }, 30000);

  afterAll(() => {
    stream?.stop();
    proc?.kill("SIGTERM");
  });

  it("fire injection shows a red marker, path animation and an alert card within 2 s", async () => {
    const err = await client.inject({ kind: "fire", target: "HOT-1", value: 60 });
    expect(err).toBeNull();
    const started = Date.now();
    await waitFor(() => {
      const zone = view.snapshot?.zones.find((z) => z.id === "HOT-1");
      return zone?.alarmed && view.trails.length > 0 &&
        view.alerts.some((a) => a.kind === "fire") && view;
    }, 2000);
    expect(Date.now() - started).toBeLessThan(2000);

    // the rendered frame contains the alarmed-zone red circle
    expect(drawCalls(view)).toContain('["circle"');
    const zone = view.snapshot!.zones.find((z) => z.id === "HOT-1")!;
    expect(zone.alarmed).toBe(true);
    expect(drawCalls(view)).toContain("#dc143c");
    // robots were sent along real routes
    expect(view.trails[0].route.length).toBeGreaterThan(1);
  }, 15000);

  it("acknowledging the alert card lands in the action log", async () => {
    const alert = await waitFor(() => view.alerts.find((a) => a.kind === "fire"));
    const err = await client.ack(alert.incidentId);
    expect(err).toBeNull();
    await waitFor(() =>
      view.log.some((e) => e.action === "ack" && e.incident_id === alert.incidentId));
    await waitFor(() => view.alerts.find((a) => a.incidentId === alert.incidentId)?.acked);
  }, 15000);

  it("surfaces gateway validation errors inline", async () => {
    const missing = await client.inject({ kind: "fire", target: "NOPE" });
    expect(missing?.status).toBe(404);
    const malformed = await client.inject({ kind: "bogus" as any, target: "HOT-1" });
    expect(malformed?.status).toBe(422);
    const ghost = await client.ack("no-such-incident");
    expect(ghost?.status).toBe(404);
  }, 15000);

  it("replaying the recorded stream reproduces the same final rendered state", () => {
    const replayed = projectAll(recorded);
    expect(JSON.stringify(replayed.snapshot)).toBe(JSON.stringify(view.snapshot));
    expect(JSON.stringify(replayed.alerts)).toBe(JSON.stringify(view.alerts));
    expect(drawCalls(replayed)).toBe(drawCalls(view));
  });
});
