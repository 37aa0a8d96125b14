"""Persistent-excitation analysis of relative-displacement histories."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
from numpy.typing import NDArray

from .core import Edge

PE_FLOOR = 1e-8
BOUND_TOL = 1e-9


def window_period(T: float, omega: float) -> int:
    """Steps per revolution, ``floor(2*pi / (T*omega))``."""
    if T <= 0 or omega <= 0:
        raise ValueError("T and omega must be positive")
    # guard exact-integer quotients against round-down (e.g. 2*pi/(0.125*pi/2) -> 31.999...)
    return int(math.floor(2.0 * math.pi / (T * omega) * (1.0 + 1e-12)))


def alpha2_bound(N: int, T: float, rho: float, omega_cap: float, u_bar: float) -> float:
    """Upper excitation level ``N T^2 (rho*Omega + 2*u_bar)^2``."""
    return N * T * T * (rho * omega_cap + 2.0 * u_bar) ** 2


def sym2_eigvals(m) -> tuple[float, float]:
    """Closed-form (min, max) eigenvalues of a symmetric 2x2 matrix."""
    a, b, c = float(m[0][0]), float(m[0][1]), float(m[1][1])
    mean = 0.5 * (a + c)
    r = math.hypot(0.5 * (a - c), b)
    return mean - r, mean + r


@dataclass(frozen=True)
class PEReport:
    edge: Edge | None
    window_start: int
    N: int
    phi: NDArray[np.float64]
    lambda_min: float
    lambda_max: float
    alpha2_bound: float = math.nan
    floor: float = PE_FLOOR

    @property
    def excited(self) -> bool:
        return self.lambda_min > self.floor

    @property
    def within_bound(self) -> bool:
        return math.isnan(self.alpha2_bound) or self.lambda_max <= self.alpha2_bound + BOUND_TOL

    @property
    def passed(self) -> bool:
        return self.excited and self.within_bound


def gramian(v_history, l: int, N: int, edge: Edge | None = None,
            alpha2: float = math.nan, floor: float = PE_FLOOR) -> PEReport:
    """Window Gramian ``sum_{k=l}^{l+N-1} v(k) v(k)^T`` and its eigenvalues."""
    v = np.asarray(v_history, dtype=np.float64).reshape(-1, 2)
    if N < 1 or l < 0 or l + N > len(v):
        raise ValueError(f"history of length {len(v)} does not cover window [{l}, {l + N - 1}]")
    w = v[l:l + N]
    phi = np.zeros((2, 2))
    for vk in w:
        phi += np.outer(vk, vk)
    lo, hi = sym2_eigvals(phi)
    return PEReport(edge, l, N, phi, lo, hi, alpha2, floor)


def scan_windows(v_history, N: int, start: int = 0, stride: int = 1, edge: Edge | None = None,
                 alpha2: float = math.nan, floor: float = PE_FLOOR) -> list[PEReport]:
    """Gramian reports for every window ``l = start, start+stride, ...`` that fits."""
    v = np.asarray(v_history, dtype=np.float64).reshape(-1, 2)
    return [gramian(v, l, N, edge, alpha2, floor) for l in range(max(start, 0), len(v) - N + 1, stride)]


def g_value(W) -> float:
    """``s_max - sqrt(s_max^2 - s_min^2)`` from the singular values of a 2x2 matrix."""
    s = np.linalg.svd(np.asarray(W, dtype=np.float64), compute_uv=False)
    s_max, s_min = float(s[0]), float(s[-1])
    return s_max - math.sqrt(max(s_max * s_max - s_min * s_min, 0.0))


def small_T_threshold(W_star, u_bar: float) -> float:
    """Largest sampling time allowed by the excitation pair ``W_star``.

    Returns 0 when ``W_star`` is rank deficient (no excitation guarantee).
    """
    if u_bar <= 0:
        raise ValueError("u_bar must be positive")
    s = np.linalg.svd(np.asarray(W_star, dtype=np.float64), compute_uv=False)
    if s[-1] <= s[0] * 1e-12:
        return 0.0
    return g_value(W_star) / (2.0 * math.sqrt(2.0) * u_bar)


def _pair_g_matrix(dr: NDArray[np.float64]) -> NDArray[np.float64]:
    """g of ``[dr_a, dr_b]`` for every pair, from ``s1^2+s2^2`` and ``s1*s2 = |det|``."""
    nsq = np.einsum("ki,ki->k", dr, dr)
    S = nsq[:, None] + nsq[None, :]
    P = np.abs(dr[:, None, 0] * dr[None, :, 1] - dr[:, None, 1] * dr[None, :, 0])
    disc = np.sqrt(np.maximum(S * S - 4.0 * P * P, 0.0))
    smax2 = 0.5 * (S + disc)
    smin2 = np.maximum(0.5 * (S - disc), 0.0)
    return np.sqrt(smax2) - np.sqrt(np.maximum(smax2 - smin2, 0.0))


@dataclass(frozen=True)
class SamplingTimeReport:
    T: float
    u_bar: float
    g_max: float
    g_min: float
    worst_edge: Edge | None
    worst_window: int | None

    @property
    def threshold_argmax(self) -> float:
        return self.g_max / (2.0 * math.sqrt(2.0) * self.u_bar)

    @property
    def threshold_uniform(self) -> float:
        return self.g_min / (2.0 * math.sqrt(2.0) * self.u_bar)

    @property
    def passes_argmax(self) -> bool:
        return self.T < self.threshold_argmax

    @property
    def passes_uniform(self) -> bool:
        return self.T < self.threshold_uniform


def sampling_time_report(dr_histories: Mapping[Edge, Sequence], N: int, start: int,
                         T: float, u_bar: float) -> SamplingTimeReport:
    """Evaluate the small-sampling-time condition over all windows from ``start``.

    Within each window the best excitation pair is chosen; across windows and
    edges both the largest (``g_max``) and smallest (``g_min``) best-pair
    values are kept, giving the optimistic and the uniform threshold.
    """
    g_hi, g_lo = -math.inf, math.inf
    worst: tuple[Edge | None, int | None] = (None, None)
    for edge, hist in dr_histories.items():
        dr = np.asarray(hist, dtype=np.float64).reshape(-1, 2)
        if len(dr) < N + start:
            continue
        gm = _pair_g_matrix(dr)
        for l in range(start, len(dr) - N + 1):
            best = float(gm[l:l + N, l:l + N].max())
            g_hi = max(g_hi, best)
            if best < g_lo:
                g_lo, worst = best, (edge, l)
    if g_hi == -math.inf:
        raise ValueError("no complete window available after the start step")
    return SamplingTimeReport(T, u_bar, g_hi, g_lo, *worst)


def chord_bound_check(dr_history, rho: float, omega_cap: float, T: float,
                      omega: float | None = None, tol: float = BOUND_TOL) -> bool:
    """True iff every ``|dr| <= 2 rho |sin(T omega / 2)| <= T rho Omega``.

    ``omega`` defaults to ``omega_cap``. For UAV-UAV edges pass the radius of
    the circle traced by the relative setpoint, ``2 rho |sin(dtheta/2)|``.
    """
    if rho <= 0:
        raise ValueError("rho must be positive")
    w = omega_cap if omega is None else omega
    chord = 2.0 * rho * abs(math.sin(T * w / 2.0))
    if chord > T * rho * omega_cap + tol:
        return False
    dr = np.asarray(dr_history, dtype=np.float64).reshape(-1, 2)
    if len(dr) == 0:
        return True
    return bool(np.all(np.linalg.norm(dr, axis=1) <= chord + tol))
