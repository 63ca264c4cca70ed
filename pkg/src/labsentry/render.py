"""2D symbolic map rendering.

The rendered snapshot feeds three consumers: reposition prompts, webhook
notification attachments, and the operator view. Symbols follow the map
legend used in prompts: triangles for people (tinted by meeple color),
orange squares for robots, red circles for fires/alarmed zones, blue
circles for calm zones (temperature printed above), green dots for
navigation nodes, and marked exits.

Rendering is a pure function of (state, config): identical inputs must
produce identical PNG bytes, so no timestamps, no randomness, and only
Pillow's embedded bitmap font.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from typing import Optional

from PIL import Image, ImageDraw, ImageFont

from .model import HazardKind, MeepleColor, Point, WorldState

MEEPLE_FILL = {
    MeepleColor.GREY: (128, 128, 128),
    MeepleColor.YELLOW: (240, 200, 0),
    MeepleColor.RED: (220, 20, 60),
}

LEGEND = {
    "triangle": "person (grey: PPE ok, yellow: PPE missing, red: possible accident)",
    "orange square": "mobile robot",
    "red circle": "fire / zone above threshold",
    "blue circle": "monitored zone, temperature shown above",
    "green dot": "navigation node",
    "green outline square": "exit",
}


@dataclass(frozen=True)
class RenderConfig:
    width: int = 800
    height: int = 600
    margin: int = 10
    background: tuple = (255, 255, 255)


@dataclass(frozen=True)
class MapSnapshot:
    image: bytes  # PNG
    legend: dict
    generation: int


class _Canvas:
    """Pixel transform plus the drawing primitives used by render_2d."""

    def __init__(self, state: WorldState, config: RenderConfig):
        self.config = config
        self.img = Image.new("RGB", (config.width, config.height), config.background)
        self.draw = ImageDraw.Draw(self.img)
        self.font = ImageFont.load_default()
        usable_w = config.width - 2 * config.margin
        usable_h = config.height - 2 * config.margin
        self.scale = min(usable_w / state.map.width, usable_h / state.map.height)
        self.off_x = config.margin + (usable_w - state.map.width * self.scale) / 2
        self.off_y = config.margin + (usable_h - state.map.height * self.scale) / 2
        self.map_h = state.map.height

    def px(self, p: Point) -> tuple[int, int]:
        # y grows north on the map, south on the image
        x = self.off_x + p.x * self.scale
        y = self.off_y + (self.map_h - p.y) * self.scale
        return int(round(x)), int(round(y))

    def line(self, a: Point, b: Point, fill, width=1):
        self.draw.line([self.px(a), self.px(b)], fill=fill, width=width)

    def dot(self, p: Point, r: int, fill, outline=None):
        x, y = self.px(p)
        self.draw.ellipse([x - r, y - r, x + r, y + r], fill=fill, outline=outline)

    def square(self, p: Point, half: int, fill=None, outline=None, width=1):
        x, y = self.px(p)
        self.draw.rectangle(
            [x - half, y - half, x + half, y + half],
            fill=fill,
            outline=outline,
            width=width,
        )

    def triangle(self, p: Point, size: int, fill):
        x, y = self.px(p)
        pts = [(x, y - size), (x - size, y + size), (x + size, y + size)]
        self.draw.polygon(pts, fill=fill, outline=(40, 40, 40))

    def text(self, p: Point, s: str, fill, dx=0, dy=0):
        x, y = self.px(p)
        self.draw.text((x + dx, y + dy), s, fill=fill, font=self.font)

    def to_png(self) -> bytes:
        buf = io.BytesIO()
        self.img.save(buf, format="PNG")
        return buf.getvalue()


def render_2d(state: WorldState, config: Optional[RenderConfig] = None) -> MapSnapshot:
    """Render one world snapshot to a PNG with the prompt symbology."""
    config = config or RenderConfig()
    c = _Canvas(state, config)
    graph = state.map.graph

    for a, b in sorted(graph.edges):
        c.line(graph.nodes[a], graph.nodes[b], fill=(190, 220, 190), width=2)
    for nid in sorted(graph.nodes):
        p = graph.nodes[nid]
        c.dot(p, 4, fill=(34, 139, 34))
        c.text(p, str(nid), fill=(20, 90, 20), dx=6, dy=-14)

    for e in state.map.exits:
        c.square(e, 7, outline=(0, 128, 0), width=2)
        c.text(e, "EXIT", fill=(0, 128, 0), dx=-10, dy=9)

    for z in state.zones:
        fill = (220, 20, 60) if z.alarmed else (30, 144, 255)
        c.dot(z.position, 10, fill=fill)
        c.text(z.position, f"{z.current:.1f}", fill=fill, dx=-10, dy=-26)

    for h in state.hazards:
        if h.kind is HazardKind.FIRE and state.zone(h.subject) is None:
            # fires injected off-zone (randomized trials) still need a marker
            c.dot(h.location, 12, fill=(220, 20, 60))

    for r in state.robots:
        p = state.robot_position(r)
        c.square(p, 9, fill=(255, 140, 0))
        c.text(p, r.id, fill=(90, 50, 0), dx=-8, dy=11)

    for w in state.workers:
        c.triangle(w.position, 10, fill=MEEPLE_FILL[w.color])

    return MapSnapshot(image=c.to_png(), legend=dict(LEGEND), generation=state.generation)
