from __future__ import annotations

import json
import random
import socket
import threading
import time
from pathlib import Path

import pytest

from labsentry.model import NavGraph, Point, load_map

TESTS_DIR = Path(__file__).parent
DATA_DIR = TESTS_DIR / "data"
PKG_DATA = Path(__file__).parent.parent / "src" / "labsentry" / "data"


@pytest.fixture(scope="session")
def demo_map_path() -> Path:
    return PKG_DATA / "demo_map.json"


@pytest.fixture(scope="session")
def demo_script_path() -> Path:
    return PKG_DATA / "demo_script.json"


@pytest.fixture(scope="session")
def demo_scenario_path() -> Path:
    return PKG_DATA / "demo_scenario.json"


@pytest.fixture()
def lab_map(demo_map_path):
    return load_map(demo_map_path)


@pytest.fixture(scope="session")
def classifier_fixtures() -> list[dict]:
    return json.loads((DATA_DIR / "classifier_fixtures.json").read_text())


def random_connected_graph(rng: random.Random, max_nodes: int = 10,
                           extent: float = 10.0) -> NavGraph:
    """Random spanning tree plus a few chords; node ids start at 1."""
    n = rng.randint(2, max_nodes)
    nodes = {
        i: Point(round(rng.uniform(0, extent), 3), round(rng.uniform(0, extent), 3))
        for i in range(1, n + 1)
    }
    ids = list(nodes)
    rng.shuffle(ids)
    edges = set()
    for i in range(1, len(ids)):
        a, b = ids[rng.randrange(i)], ids[i]
        edges.add((min(a, b), max(a, b)))
    for _ in range(rng.randint(0, max(1, n // 2))):
        a, b = rng.sample(ids, 2)
        edges.add((min(a, b), max(a, b)))
    return NavGraph(nodes=nodes, edges=frozenset(edges))


def free_port() -> int:
    sock = socket.socket()
    sock.bind(("127.0.0.1", 0))
    port = sock.getsockname()[1]
    sock.close()
    return port


class GatewayServer:
    """A real uvicorn server around a LiveEngine, for HTTP-level tests.

    The in-process TestClient buffers streaming responses in this
    environment, so gateway tests talk to an actual socket.
    """

    def __init__(self, lab_map, policy=None, backend=None, notifier=None,
                 tick_interval: float = 1.0):
        import uvicorn

        from labsentry.gateway import LiveEngine, create_app

        self.engine = LiveEngine(
            lab_map, policy=policy, backend=backend, notifier=notifier,
            tick_interval=tick_interval,
        ).start()
        self.port = free_port()
        self.base = f"http://127.0.0.1:{self.port}"
        config = uvicorn.Config(
            create_app(self.engine), host="127.0.0.1", port=self.port,
            log_level="error",
        )
        self._server = uvicorn.Server(config)
        self._thread = threading.Thread(target=self._server.run, daemon=True)
        self._thread.start()
        self._wait_ready()

    def _wait_ready(self, timeout: float = 10.0) -> None:
        import httpx

        deadline = time.monotonic() + timeout
        while time.monotonic() < deadline:
            try:
                httpx.get(self.base + "/state", timeout=0.5)
                return
            except Exception:
                time.sleep(0.02)
        raise RuntimeError("gateway did not come up")

    def stop(self) -> None:
        self._server.should_exit = True
        self._server.force_exit = True  # do not wait for open SSE connections
        self.engine.stop()
        self._thread.join(timeout=5.0)


@pytest.fixture()
def gateway_factory():
    servers: list[GatewayServer] = []

    def factory(lab_map, **kwargs) -> GatewayServer:
        server = GatewayServer(lab_map, **kwargs)
        servers.append(server)
        return server

    yield factory
    for server in servers:
        server.stop()
