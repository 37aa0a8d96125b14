"""Discrete-time coupled phase oscillators driving agents to a splay (regular n-gon) pattern."""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np
from numpy.typing import NDArray

TWO_PI = 2.0 * math.pi

DEFAULT_EQ_TOL = 1e-3
DEFAULT_EQ_HOLD = 50


def default_gains(n: int) -> NDArray[np.float64]:
    """Harmonic gains ``K_l = 1`` for ``l < n`` and ``K_n = -1``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    k = np.ones(n)
    k[-1] = -1.0
    return k


def complete_adjacency(n: int) -> NDArray[np.float64]:
    if n < 2:
        return np.zeros((n, n))
    a = np.full((n, n), 1.0 / (n - 1))
    np.fill_diagonal(a, 0.0)
    return a


@dataclass(frozen=True)
class OscillatorState:
    phases: NDArray[np.float64]
    gains: NDArray[np.float64]
    omega: float
    adjacency: NDArray[np.float64]

    def __post_init__(self):
        n = len(self.phases)
        if np.shape(self.adjacency) != (n, n):
            raise ValueError(f"adjacency shape {np.shape(self.adjacency)} does not match {n} phases")
        if len(self.gains) != n:
            raise ValueError(f"expected {n} harmonic gains, got {len(self.gains)}")

    @classmethod
    def with_defaults(cls, phases: Sequence[float], omega: float) -> "OscillatorState":
        ph = np.asarray(phases, dtype=np.float64)
        return cls(ph, default_gains(len(ph)), float(omega), complete_adjacency(len(ph)))


def coupling(phases, gains, adjacency) -> NDArray[np.float64]:
    """Per-oscillator coupling ``sum_j sum_l K_l a_ij / l * sin(l (th_i - th_j))``."""
    th = np.asarray(phases, dtype=np.float64)
    diff = th[:, None] - th[None, :]
    out = np.zeros_like(th)
    for l, k_l in enumerate(gains, start=1):
        out += (k_l / l) * (adjacency * np.sin(l * diff)).sum(axis=1)
    return out


def phase_step(state: OscillatorState, T: float) -> OscillatorState:
    if T <= 0:
        raise ValueError("T must be positive")
    c = coupling(state.phases, state.gains, state.adjacency)
    return replace(state, phases=state.phases + T * state.omega + T * c)


def phase_spread(phases, n: int | None = None) -> float:
    """Worst pairwise distance from a splay configuration.

    For every pair, the phase difference is compared (on the circle) with the
    nearest *nonzero* multiple of ``2*pi/n``; the maximum over pairs is
    returned. It is zero exactly when the phases form a regular n-gon.
    """
    th = np.asarray(phases, dtype=np.float64)
    n = len(th) if n is None else n
    if n < 2:
        raise ValueError("phase spread needs at least two oscillators")
    i, j = np.triu_indices(len(th), k=1)
    d = np.mod(th[i] - th[j], TWO_PI)
    slots = TWO_PI * np.arange(1, n) / n
    gap = np.abs(np.mod(d[:, None] - slots[None, :] + math.pi, TWO_PI) - math.pi)
    return float(gap.min(axis=1).max())


def detect_equilibrium(spread_history, tol: float = DEFAULT_EQ_TOL, hold: int = DEFAULT_EQ_HOLD) -> int | None:
    """First step from which the spread stays ``<= tol`` for ``hold`` consecutive steps."""
    if tol <= 0 or hold < 1:
        raise ValueError("tol must be > 0 and hold >= 1")
    run = 0
    for k, s in enumerate(spread_history):
        run = run + 1 if s <= tol else 0
        if run >= hold:
            return k - hold + 1
    return None
