"""Desired circular formation geometry and affine reshaping of the circle.

The transform applied to a circle point is ``T @ S @ H`` in homogeneous
coordinates: shear first, then scale, then translate. Each parameter may vary
with the step index through a :class:`Waveform`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, fields

import numpy as np

from .core import TARGET, Vec2, as_vec2


@dataclass(frozen=True)
class Waveform:
    """Scalar schedule over the step index.

    kinds:
      ``constant``   -> ``value``
      ``sinusoid``   -> ``offset + amp * sin(2*pi*k/period + phase)``
      ``piecewise``  -> value of the last ``(start, value)`` pair with ``start <= k``
    """

    kind: str = "constant"
    value: float = 0.0
    amp: float = 0.0
    period: float = 1.0
    offset: float = 0.0
    phase: float = 0.0
    pieces: tuple[tuple[int, float], ...] = ()

    def __post_init__(self):
        if self.kind not in ("constant", "sinusoid", "piecewise"):
            raise ValueError(f"unknown waveform kind {self.kind!r}")
        if self.kind == "sinusoid" and self.period <= 0:
            raise ValueError("sinusoid period must be positive")
        if self.kind == "piecewise":
            if not self.pieces or self.pieces[0][0] != 0:
                raise ValueError("piecewise waveform must start at step 0")
            starts = [s for s, _ in self.pieces]
            if starts != sorted(set(starts)):
                raise ValueError("piecewise starts must be strictly increasing")

    def __call__(self, k: int) -> float:
        if self.kind == "constant":
            return self.value
        if self.kind == "sinusoid":
            return self.offset + self.amp * math.sin(2.0 * math.pi * k / self.period + self.phase)
        val = self.pieces[0][1]
        for start, v in self.pieces:
            if start > k:
                break
            val = v
        return val

    def bounds(self, steps: int) -> tuple[float, float]:
        """(min, max) over ``k = 0..steps`` inclusive."""
        if self.kind == "constant":
            return self.value, self.value
        vals = [self(k) for k in range(steps + 1)]
        return min(vals), max(vals)

    def to_dict(self) -> dict:
        if self.kind == "constant":
            return {"kind": "constant", "value": self.value}
        if self.kind == "sinusoid":
            return {"kind": "sinusoid", "amp": self.amp, "period": self.period,
                    "offset": self.offset, "phase": self.phase}
        return {"kind": "piecewise", "pieces": [[s, v] for s, v in self.pieces]}

    @classmethod
    def from_dict(cls, d, path: str = "waveform") -> "Waveform":
        if isinstance(d, (int, float)) and not isinstance(d, bool):
            return cls(value=float(d))
        if not isinstance(d, dict):
            raise ValueError(f"{path}: expected number or object")
        kind = d.get("kind", "constant")
        allowed = {"constant": {"kind", "value"},
                   "sinusoid": {"kind", "amp", "period", "offset", "phase"},
                   "piecewise": {"kind", "pieces"}}.get(kind)
        if allowed is None:
            raise ValueError(f"{path}.kind: unknown waveform kind {kind!r}")
        extra = set(d) - allowed
        if extra:
            raise ValueError(f"{path}: unknown key(s) {sorted(extra)}")
        if kind == "constant":
            return cls(value=float(d.get("value", 0.0)))
        if kind == "sinusoid":
            return cls(kind=kind, amp=float(d.get("amp", 0.0)), period=float(d["period"]),
                       offset=float(d.get("offset", 0.0)), phase=float(d.get("phase", 0.0)))
        return cls(kind=kind, pieces=tuple((int(s), float(v)) for s, v in d["pieces"]))


def constant(value: float) -> Waveform:
    return Waveform(value=float(value))


@dataclass(frozen=True)
class AffineParams:
    T_x: float = 0.0
    T_y: float = 0.0
    S_x: float = 1.0
    S_y: float = 1.0
    H_a: float = 0.0
    H_b: float = 0.0

    def __post_init__(self):
        if not (self.S_x > 0 and self.S_y > 0):
            raise ValueError("scaling factors must be positive")

    def matrix(self) -> np.ndarray:
        t = np.array([[1.0, 0.0, self.T_x], [0.0, 1.0, self.T_y], [0.0, 0.0, 1.0]])
        s = np.array([[self.S_x, 0.0, 0.0], [0.0, self.S_y, 0.0], [0.0, 0.0, 1.0]])
        h = np.array([[1.0, self.H_a, 0.0], [self.H_b, 1.0, 0.0], [0.0, 0.0, 1.0]])
        return t @ s @ h


IDENTITY = AffineParams()


@dataclass(frozen=True)
class AffineSchedule:
    T_x: Waveform = constant(0.0)
    T_y: Waveform = constant(0.0)
    S_x: Waveform = constant(1.0)
    S_y: Waveform = constant(1.0)
    H_a: Waveform = constant(0.0)
    H_b: Waveform = constant(0.0)

    def at(self, k: int) -> AffineParams:
        return AffineParams(**{f.name: getattr(self, f.name)(k) for f in fields(self)})

    def max_scale(self, steps: int) -> float:
        return max(self.S_x.bounds(steps)[1], self.S_y.bounds(steps)[1])

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name).to_dict() for f in fields(self)}

    @classmethod
    def from_dict(cls, d: dict, path: str = "affine") -> "AffineSchedule":
        if not isinstance(d, dict):
            raise ValueError(f"{path}: expected object")
        names = {f.name for f in fields(cls)}
        extra = set(d) - names
        if extra:
            raise ValueError(f"{path}: unknown key(s) {sorted(extra)}")
        return cls(**{k: Waveform.from_dict(v, f"{path}.{k}") for k, v in d.items()})


def desired_position(theta: float, rho: float) -> Vec2:
    if rho <= 0:
        raise ValueError("radius must be positive")
    return np.array([rho * math.cos(theta), rho * math.sin(theta)])


def affine_apply(params: AffineParams, q) -> Vec2:
    qh = np.array([q[0], q[1], 1.0])
    out = params.matrix() @ qh
    return out[:2].copy()


def setpoint(theta: float, rho: float, params: AffineParams = IDENTITY) -> Vec2:
    """Desired position relative to the target for one agent."""
    return affine_apply(params, desired_position(theta, rho))


def desired_displacement(r_next, r_now) -> Vec2:
    return as_vec2(r_next) - as_vec2(r_now)


def desired_relative(r_i, r_j) -> Vec2:
    """``r_i - r_j``; pass ``TARGET`` (0) as ``r_j`` for the target, whose offset is zero."""
    if isinstance(r_j, int) and r_j == TARGET:
        return as_vec2(r_i)
    return as_vec2(r_i) - as_vec2(r_j)
