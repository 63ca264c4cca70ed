"""HTTP facade: live state, map snapshots, event stream, hazard injection.

The engine runs the coordinator on its own thread with a scaled wall
clock; HTTP handlers never touch coordinator internals directly. Reads
take the engine lock briefly; writes (injections, config patches, acks)
are queued as events and their outcome is reported back through a future,
so injection stays the only mutation path.

The event stream is server-sent events. Every action-log entry and state
snapshot gets a global sequence number; clients resume with
``Last-Event-ID`` (or ``?since=``) and the ring buffer replays what they
missed, keeping the stream gapless.
"""

from __future__ import annotations

import json
import queue
import threading
import time
from collections import deque
from concurrent.futures import Future
from pathlib import Path
from typing import Any, Callable, Optional

from fastapi import FastAPI, HTTPException, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse, Response, StreamingResponse
from pydantic import BaseModel

from .coordinator import (
    AckEvent,
    ConfigEvent,
    Coordinator,
    InjectEvent,
    NotifyReceiptEvent,
    PolicyConfig,
    TickEvent,
)
from .model import LabMap
from .notify import Notifier
from .render import render_2d


class InjectBody(BaseModel):
    kind: str
    target: str
    value: Optional[Any] = None
    x: Optional[float] = None
    y: Optional[float] = None


class AckBody(BaseModel):
    incident_id: str


class LiveEngine:
    """Owns the coordinator thread, the event queue and the stream fanout."""

    def __init__(
        self,
        lab_map: LabMap,
        policy: Optional[PolicyConfig] = None,
        backend=None,
        notifier: Optional[Notifier] = None,
        tick_interval: float = 1.0,
        ring_size: int = 2000,
    ):
        policy = policy or PolicyConfig()
        if policy.clock_scale <= 0:
            raise ValueError("clock_scale must be positive")
        self.tick_interval = tick_interval
        self.lock = threading.RLock()
        self.coordinator = Coordinator(
            lab_map,
            policy=policy,
            backend=backend,
            notifier=notifier,
            notify_dispatch=self._dispatch_notification,
        )
        self.coordinator.listeners.append(self._fanout)
        self._queue: "queue.Queue[tuple[Callable, Future]]" = queue.Queue()
        self._ring: deque = deque(maxlen=ring_size)
        self._subscribers: list[queue.Queue] = []
        self._seq = 0
        self._stop = threading.Event()
        self._thread: Optional[threading.Thread] = None
        self._t0: Optional[float] = None

    # -- lifecycle ------------------------------------------------------------

    def start(self) -> "LiveEngine":
        self._t0 = time.monotonic()
        self._thread = threading.Thread(target=self._run, daemon=True)
        self._thread.start()
        return self

    def stop(self) -> None:
        self._stop.set()
        if self._thread is not None:
            self._thread.join(timeout=2.0)

    def sim_now(self) -> float:
        return (time.monotonic() - self._t0) / self.coordinator.policy.clock_scale

    def _run(self) -> None:
        next_tick = 0.0
        scale = self.coordinator.policy.clock_scale
        while not self._stop.is_set():
            now = self.sim_now()
            wait = max((next_tick - now) * scale, 0.0)
            try:
                builder, future = self._queue.get(timeout=min(wait, 0.2) or 0.001)
            except queue.Empty:
                builder, future = None, None
            with self.lock:
                now = self.sim_now()
                scale = self.coordinator.policy.clock_scale
                while next_tick <= now:
                    self.coordinator.handle(TickEvent(t=next_tick))
                    next_tick += self.tick_interval
                if builder is not None:
                    try:
                        self.coordinator.handle(builder(self.sim_now()))
                        future.set_result(None)
                    except Exception as exc:  # reported to the HTTP caller
                        future.set_exception(exc)

    # -- event submission -------------------------------------------------------

    def submit(self, builder: Callable[[float], object], timeout: float = 5.0) -> None:
        """Queue an event for the loop; re-raises handler errors here."""
        future: Future = Future()
        self._queue.put((builder, future))
        future.result(timeout=timeout)

    def _dispatch_notification(self, payload: dict, incident_id: str):
        """Deliveries run off-loop; the receipt comes back as an event."""

        def work():
            receipt = self.coordinator.notifier.deliver(payload)
            if not receipt.ok:
                try:
                    self.submit(lambda t: NotifyReceiptEvent(t, incident_id, receipt))
                except Exception:
                    pass

        threading.Thread(target=work, daemon=True).start()
        return None

    # -- stream fanout -------------------------------------------------------------

    def _fanout(self, kind: str, data: dict) -> None:
        self._seq += 1
        item = {"seq": self._seq, "type": kind, "data": data}
        self._ring.append(item)
        for sub in list(self._subscribers):
            sub.put(item)

    def subscribe(self, since: int = 0) -> tuple[queue.Queue, list]:
        with self.lock:
            backlog = [item for item in self._ring if item["seq"] > since]
            sub: queue.Queue = queue.Queue()
            self._subscribers.append(sub)
        return sub, backlog

    def unsubscribe(self, sub: queue.Queue) -> None:
        with self.lock:
            if sub in self._subscribers:
                self._subscribers.remove(sub)

    # -- reads ------------------------------------------------------------------------

    def snapshot(self) -> dict:
        with self.lock:
            state = self.coordinator.state.to_dict()
            state["incidents"] = [
                i.to_dict() for i in self.coordinator.incidents.values()
            ]
            state["config"] = self.coordinator.policy.to_dict()
            state["seq"] = self._seq
            return state

    def map_png(self) -> bytes:
        with self.lock:
            return render_2d(
                self.coordinator.state, self.coordinator.render_config
            ).image

    def stored_snapshot(self, generation: int) -> Optional[bytes]:
        with self.lock:
            return self.coordinator.snapshots.get(generation)


def create_app(engine: LiveEngine, frontend_dir: Optional[Path] = None) -> FastAPI:
    app = FastAPI(title="labsentry gateway")
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )

    def _submit(builder) -> None:
        try:
            engine.submit(builder)
        except KeyError as exc:
            raise HTTPException(status_code=404, detail=str(exc.args[0]))
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=str(exc))

    @app.get("/state")
    def get_state():
        return JSONResponse(engine.snapshot())

    @app.get("/map.png")
    def get_map():
        return Response(content=engine.map_png(), media_type="image/png")

    @app.get("/snapshots/{generation}.png")
    def get_snapshot(generation: int):
        png = engine.stored_snapshot(generation)
        if png is None:
            raise HTTPException(status_code=404, detail=f"no snapshot {generation}")
        return Response(content=png, media_type="image/png")

    @app.post("/inject")
    def post_inject(body: InjectBody):
        if body.kind not in ("fire", "ppe", "accident"):
            raise HTTPException(status_code=422, detail=f"unknown kind '{body.kind}'")
        _submit(
            lambda t: InjectEvent(
                t=t, kind=body.kind, target=body.target,
                value=body.value, x=body.x, y=body.y,
            )
        )
        return {"ok": True}

    @app.get("/config")
    def get_config():
        return engine.snapshot()["config"]

    @app.patch("/config")
    def patch_config(patch: dict):
        _submit(lambda t: ConfigEvent(t=t, patch=patch))
        return engine.snapshot()["config"]

    @app.post("/ack")
    def post_ack(body: AckBody):
        _submit(lambda t: AckEvent(t=t, incident_id=body.incident_id))
        return {"ok": True}

    @app.get("/events")
    def get_events(request: Request, since: int = 0):
        header_id = request.headers.get("last-event-id")
        if header_id is not None:
            try:
                since = int(header_id)
            except ValueError:
                pass
        sub, backlog = engine.subscribe(since)

        def stream():
            try:
                for item in backlog:
                    yield _sse_frame(item)
                while True:
                    try:
                        item = sub.get(timeout=1.0)
                    except queue.Empty:
                        yield ": keepalive\n\n"
                        continue
                    yield _sse_frame(item)
            finally:
                engine.unsubscribe(sub)

        return StreamingResponse(stream(), media_type="text/event-stream")

    if frontend_dir is not None and Path(frontend_dir).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/ui", StaticFiles(directory=str(frontend_dir), html=True), name="ui")

    return app


def _sse_frame(item: dict) -> str:
    return f"id: {item['seq']}\ndata: {json.dumps(item, sort_keys=True)}\n\n"
