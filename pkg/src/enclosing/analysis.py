"""Metric series and post-hoc analysis of trajectory logs."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from .core import TARGET, Edge
from .engine import TrajectoryLog
from .oscillator import DEFAULT_EQ_HOLD, DEFAULT_EQ_TOL, detect_equilibrium
from .pe import PEReport, SamplingTimeReport, alpha2_bound, sampling_time_report, scan_windows, window_period

FIT_FLOOR = 1e-12


@dataclass(frozen=True)
class MetricSeries:
    k: NDArray[np.int64]
    tracking_error: NDArray[np.float64]
    max_rel_loc_error: NDArray[np.float64]
    phase_spread: NDArray[np.float64]
    agent_errors: dict[int, NDArray[np.float64]]

    @property
    def max_agent_error(self) -> NDArray[np.float64]:
        return np.nanmax(np.vstack(list(self.agent_errors.values())), axis=0)


def metrics(log: TrajectoryLog) -> MetricSeries:
    if not log.records:
        raise ValueError("log has no records")
    recs = log.records
    agent = {i: np.array([r.agent_errors.get(i, math.nan) for r in recs]) for i in log.initial_ids}
    return MetricSeries(
        k=np.array([r.k for r in recs]),
        tracking_error=np.array([r.tracking_error for r in recs]),
        max_rel_loc_error=np.array([r.max_rel_loc_error for r in recs]),
        phase_spread=np.array([r.phase_spread for r in recs]),
        agent_errors=agent,
    )


def last_fault_step(log: TrajectoryLog) -> int:
    return max((k for k, _ in log.faults), default=0)


def equilibrium_step(log: TrajectoryLog, tol: float = DEFAULT_EQ_TOL, hold: int = DEFAULT_EQ_HOLD) -> int | None:
    """Equilibrium onset of the oscillator network, searched after the last fault."""
    start = last_fault_step(log)
    spread = [r.phase_spread for r in log.records[start:]]
    k = detect_equilibrium(spread, tol, hold)
    return None if k is None else start + k


def decay_slope(series, start: int, floor: float = FIT_FLOOR) -> float:
    """Least-squares slope of ``log(series[k])`` over ``k >= start`` with values above ``floor``.

    Samples at the round-off floor carry no decay information and are
    excluded; NaN is returned when fewer than two samples remain.
    """
    y = np.asarray(series, dtype=np.float64)
    k = np.arange(len(y))
    sel = (k >= start) & np.isfinite(y) & (y > floor)
    if sel.sum() < 2:
        return math.nan
    return float(np.polyfit(k[sel], np.log(y[sel]), 1)[0])


def _entity_positions(log: TrajectoryLog, entity: int) -> NDArray[np.float64]:
    out = np.full((len(log.records), 2), np.nan)
    for n, r in enumerate(log.records):
        p = r.target_pos if entity == TARGET else r.positions.get(entity)
        if p is not None:
            out[n] = p
    return out


def _entity_setpoints(log: TrajectoryLog, entity: int) -> NDArray[np.float64]:
    out = np.full((len(log.records), 2), np.nan)
    for n, r in enumerate(log.records):
        if entity == TARGET:
            out[n] = 0.0
        elif entity in r.setpoints:
            out[n] = r.setpoints[entity]
    return out


def relative_displacements(log: TrajectoryLog, edge: Edge) -> NDArray[np.float64]:
    """True ``v_ij(k)`` for ``k = 0..steps-1`` (NaN once an endpoint is removed)."""
    i, j = edge
    pi, pj = _entity_positions(log, i), _entity_positions(log, j)
    return np.diff(pi, axis=0) - np.diff(pj, axis=0)


def desired_relative_displacements(log: TrajectoryLog, edge: Edge) -> NDArray[np.float64]:
    """``dr_ij(k) = r_ij(k+1) - r_ij(k)`` for ``k = 0..steps-1``."""
    i, j = edge
    ri, rj = _entity_setpoints(log, i), _entity_setpoints(log, j)
    return np.diff(ri, axis=0) - np.diff(rj, axis=0)


def surviving_edges(log: TrajectoryLog) -> list[Edge]:
    alive = set(log.records[-1].positions)
    return [e for e in log.initial_edges if e[0] in alive and (e[1] == TARGET or e[1] in alive)]


def sampling_time_from_log(log: TrajectoryLog, start: int | None = None) -> SamplingTimeReport:
    cfg = log.cfg
    k_o = equilibrium_step(log) if start is None else start
    if k_o is None:
        raise ValueError("oscillator never reached equilibrium")
    N = window_period(cfg.T, cfg.omega)
    hist = {e: desired_relative_displacements(log, e) for e in surviving_edges(log)}
    return sampling_time_report(hist, N, k_o, cfg.T, cfg.u_bar)


def pe_reports(log: TrajectoryLog, start: int | None = None, stride: int = 1) -> list[PEReport]:
    """Window Gramians of every surviving edge from the equilibrium onset onward."""
    cfg = log.cfg
    k_o = equilibrium_step(log) if start is None else start
    if k_o is None:
        raise ValueError("oscillator never reached equilibrium")
    N = window_period(cfg.T, cfg.omega)
    a2 = alpha2_bound(N, cfg.T, cfg.max_radius(), cfg.Omega, cfg.u_bar)
    out = []
    for e in surviving_edges(log):
        v = relative_displacements(log, e)
        out += scan_windows(v, N, k_o, stride, edge=e, alpha2=a2)
    return out


PE_COLUMNS = ("edge", "l", "N", "lambda_min", "lambda_max", "alpha2_bound", "pass")


def pe_rows_from_tables(tab, T: float, omega: float, start: int | None = None, stride: int = 1,
                        rho: float | None = None, omega_cap: float | None = None,
                        u_bar: float | None = None) -> list[tuple]:
    """Per-edge, per-window excitation rows computed from a written log.

    UAV pairs are reported once (``i < j``; the reversed edge has the same
    Gramian) and target edges for every sensing UAV listed in the header.
    Windows touching a removed agent are skipped.
    """
    N = window_period(T, omega)
    rho = tab.meta_float("rho_max", math.nan) if rho is None else rho
    omega_cap = tab.meta_float("Omega", math.nan) if omega_cap is None else omega_cap
    u_bar = tab.meta_float("u_bar", math.nan) if u_bar is None else u_bar
    a2 = alpha2_bound(N, T, rho, omega_cap, u_bar)
    if start is None:
        start = 0
        spread = tab.metrics.get("phase_spread")
        if spread is not None:
            after = max((k for k, _ in tab.faults()), default=0)
            k_o = detect_equilibrium(spread[after:])
            start = 0 if k_o is None else after + k_o

    ids = list(tab.uavs)
    sensors = tab.meta_ints("sensors") or ids
    edges = [(i, j) for n, i in enumerate(ids) for j in ids[n + 1:]] + [(i, TARGET) for i in sensors if i in tab.uavs]
    rows = []
    for i, j in edges:
        pj = tab.target if j == TARGET else tab.uavs[j]
        v = np.diff(tab.uavs[i], axis=0) - np.diff(pj, axis=0)
        for l in range(max(start, 0), len(v) - N + 1, stride):
            if not np.all(np.isfinite(v[l:l + N])):
                continue
            rep = scan_windows(v[l:l + N], N, 0, 1, edge=(i, j), alpha2=a2)[0]
            rows.append((f"{i}-{j}", l, N, rep.lambda_min, rep.lambda_max, a2, rep.passed))
    return rows
