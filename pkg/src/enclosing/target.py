"""Moving-target trajectories, defined as closed-form positions over the step index.

All speeds are per step (meters per step); divide by ``T`` for m/s.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import Vec2

KINDS = ("line", "sinusoid", "circle", "waypoints")

_KEYS = {
    "line": {"kind", "start", "velocity"},
    "sinusoid": {"kind", "start", "speed", "amp", "period"},
    "circle": {"kind", "center", "radius", "angular_period"},
    "waypoints": {"kind", "points", "speed"},
}


@dataclass(frozen=True)
class TargetModel:
    kind: str = "line"
    start: tuple[float, float] = (0.0, 0.0)
    velocity: tuple[float, float] = (0.0, 0.0)
    speed: float = 0.0
    amp: float = 0.0
    period: float = 1.0
    center: tuple[float, float] = (0.0, 0.0)
    radius: float = 0.0
    angular_period: float = 1.0
    points: tuple[tuple[float, float], ...] = ()

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown target model {self.kind!r}")
        if self.kind == "sinusoid" and self.period <= 0:
            raise ValueError("target sinusoid period must be positive")
        if self.kind == "circle" and self.angular_period <= 0:
            raise ValueError("target angular_period must be positive")
        if self.kind == "waypoints" and (len(self.points) < 1 or self.speed < 0):
            raise ValueError("waypoint target needs at least one point and a non-negative speed")

    def position(self, k: int) -> Vec2:
        if self.kind == "line":
            return np.array([self.start[0] + k * self.velocity[0], self.start[1] + k * self.velocity[1]])
        if self.kind == "sinusoid":
            return np.array([self.start[0] + self.speed * k,
                             self.start[1] + self.amp * math.sin(2.0 * math.pi * k / self.period)])
        if self.kind == "circle":
            a = 2.0 * math.pi * k / self.angular_period
            return np.array([self.center[0] + self.radius * math.cos(a),
                             self.center[1] + self.radius * math.sin(a)])
        return self._along_path(self.speed * k)

    def _along_path(self, s: float) -> Vec2:
        pts = np.asarray(self.points, dtype=np.float64)
        for a, b in zip(pts[:-1], pts[1:]):
            seg = float(np.linalg.norm(b - a))
            if s <= seg:
                return a + (b - a) * (s / seg) if seg > 0 else a.copy()
            s -= seg
        return pts[-1].copy()

    def displacement(self, k: int) -> Vec2:
        return self.position(k + 1) - self.position(k)

    def max_step(self, steps: int) -> float:
        """Largest per-step displacement norm over ``k = 0..steps-1``."""
        return max((float(np.linalg.norm(self.displacement(k))) for k in range(max(steps, 1))), default=0.0)

    def to_dict(self) -> dict:
        d = {"kind": self.kind}
        for key in sorted(_KEYS[self.kind] - {"kind"}):
            val = getattr(self, key)
            if key == "points":
                val = [list(p) for p in val]
            elif isinstance(val, tuple):
                val = list(val)
            d[key] = val
        return d

    @classmethod
    def from_dict(cls, d, path: str = "target_model") -> "TargetModel":
        if not isinstance(d, dict):
            raise ValueError(f"{path}: expected object")
        kind = d.get("kind")
        if kind not in _KEYS:
            raise ValueError(f"{path}.kind: expected one of {KINDS}, got {kind!r}")
        extra = set(d) - _KEYS[kind]
        if extra:
            raise ValueError(f"{path}: unknown key(s) {sorted(extra)}")
        kw = {}
        for key, val in d.items():
            if key in ("start", "velocity", "center"):
                kw[key] = (float(val[0]), float(val[1]))
            elif key == "points":
                kw[key] = tuple((float(p[0]), float(p[1])) for p in val)
            elif key != "kind":
                kw[key] = float(val)
        return cls(kind=kind, **kw)
