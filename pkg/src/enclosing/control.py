"""Saturated cooperative tracking control."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Hashable, Mapping

import numpy as np

from .core import Vec2, as_vec2


def saturate(u, cap: float) -> Vec2:
    """Radial projection onto the disk of radius ``cap``: ``u * cap / max(cap, |u|)``."""
    if cap <= 0:
        raise ValueError("saturation cap must be positive")
    u = as_vec2(u)
    return u * (cap / max(cap, math.hypot(u[0], u[1])))


def saturation_ratio(u, cap: float) -> float:
    """Scale factor applied by :func:`saturate`, in ``(0, 1]``."""
    return cap / max(cap, math.hypot(u[0], u[1]))


def consensus_term(estimates: Mapping[Hashable, Vec2], desired: Mapping[Hashable, Vec2],
                   weights: Mapping[Hashable, float], beta: float) -> Vec2:
    """``-beta * sum_j a_ij (p_hat_ij - r_ij)`` over one agent's extended neighbors."""
    keys = set(weights)
    if keys != set(estimates) or keys != set(desired):
        raise KeyError("estimates, desired offsets and weights must share the same neighbor keys")
    acc = np.zeros(2)
    for j in sorted(keys):
        acc += weights[j] * (as_vec2(estimates[j]) - as_vec2(desired[j]))
    return -beta * acc


@dataclass(frozen=True)
class ControlInput:
    u: Vec2
    consensus_part: Vec2
    feedforward_part: Vec2
    target_part: Vec2
    saturated: bool


def control_input(u_bar, cap: float, dr, T: float, u0) -> ControlInput:
    """Saturated consensus + desired-displacement feedforward + target velocity."""
    if T <= 0:
        raise ValueError("T must be positive")
    u_bar = as_vec2(u_bar)
    cons = saturate(u_bar, cap)
    ff = as_vec2(dr) / T
    tgt = as_vec2(u0)
    sat = math.hypot(u_bar[0], u_bar[1]) > cap
    return ControlInput(cons + ff + tgt, cons, ff, tgt, sat)
