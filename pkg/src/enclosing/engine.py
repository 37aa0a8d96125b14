"""Synchronous simulation loop.

Each step runs a fixed pipeline on a frozen snapshot of step ``k``:

1. advance the oscillator phases and build the setpoints ``r_i(k)``, ``r_i(k+1)``;
2. compute every agent's control from the current estimates;
3. move the target and the agents;
4. synthesize ranges/displacements and update every edge estimator;
5. emit the record describing step ``k``.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .config import ScenarioConfig, resolve, validate_scenario
from .control import ControlInput, consensus_term, control_input, saturate
from .core import TARGET, Edge, ExtendedGraph, ScenarioError, SimulationError, TopologyError, Vec2, build_topology
from .localization import EdgeEstimator, Measurement, rlse_update
from .oscillator import OscillatorState, complete_adjacency, default_gains, phase_spread, phase_step
from .formation import setpoint

log = logging.getLogger(__name__)

CAP_TOL = 1e-12


def _pair(i: int, j: int) -> tuple[int, int]:
    return (i, j) if i < j else (j, i)


@dataclass
class WorldState:
    k: int
    positions: dict[int, Vec2]
    target_pos: Vec2
    osc: OscillatorState
    estimators: dict[Edge, EdgeEstimator]
    graph: ExtendedGraph
    ranges: dict[tuple[int, int], float]
    rng: np.random.Generator = field(repr=False)

    @property
    def alive(self) -> tuple[int, ...]:
        return self.graph.uav_ids

    def phase_of(self, i: int) -> float:
        return float(self.osc.phases[self.alive.index(i)])


@dataclass(frozen=True)
class StepRecord:
    k: int
    positions: dict[int, Vec2]
    target_pos: Vec2
    phases: dict[int, float]
    setpoints: dict[int, Vec2]
    est_errors: dict[Edge, float]
    controls: dict[int, ControlInput] | None
    clamped: tuple[int, ...] = ()

    @property
    def centroid_error(self) -> Vec2:
        """``mean_i p_i - p_0`` over alive agents."""
        return np.mean([p for p in self.positions.values()], axis=0) - self.target_pos

    @property
    def tracking_error(self) -> float:
        return float(np.linalg.norm(self.centroid_error))

    @property
    def agent_errors(self) -> dict[int, float]:
        """``|p_i - r_i - p_0|`` per alive agent."""
        return {i: float(np.linalg.norm(self.positions[i] - self.setpoints[i] - self.target_pos))
                for i in self.positions}

    @property
    def max_rel_loc_error(self) -> float:
        return max(self.est_errors.values(), default=0.0)

    @property
    def phase_spread(self) -> float:
        return phase_spread(list(self.phases.values())) if len(self.phases) >= 2 else 0.0


@dataclass
class TrajectoryLog:
    cfg: ScenarioConfig
    records: list[StepRecord]
    initial_ids: tuple[int, ...]
    initial_edges: list[Edge]
    faults: list[tuple[int, int]] = field(default_factory=list)

    @property
    def clamp_events(self) -> int:
        return sum(len(r.clamped) for r in self.records)


def _noisy(rng: np.random.Generator, value, std: float):
    if std <= 0:
        return value
    return value + rng.normal(0.0, std, size=np.shape(value)) if np.ndim(value) else value + rng.normal(0.0, std)


def _range_keys(graph: ExtendedGraph) -> list[tuple[int, int]]:
    keys = list(graph.uav_edges)
    keys += [(TARGET, i) for i in graph.uav_ids if i in graph.target_sensors]
    return keys


def _measure_ranges(graph, positions, target_pos, rng, std) -> dict[tuple[int, int], float]:
    out = {}
    for a, b in _range_keys(graph):
        pa = target_pos if a == TARGET else positions[a]
        d = float(np.linalg.norm(pa - positions[b]))
        out[(a, b)] = abs(_noisy(rng, d, std))
    return out


def initial_world(cfg: ScenarioConfig) -> WorldState:
    """World at ``k = 0`` from a resolved config (positions and phases filled in)."""
    if cfg.initial_positions is None or cfg.initial_phases is None:
        cfg = resolve(cfg)
    graph = build_topology(cfg.n, cfg.target_sensors)
    positions = {i: np.array(p, dtype=np.float64) for i, p in zip(graph.uav_ids, cfg.initial_positions)}
    osc = OscillatorState(np.array(cfg.initial_phases, dtype=np.float64), np.array(cfg.gains, dtype=np.float64),
                          cfg.omega, complete_adjacency(cfg.n))
    ests = {e: EdgeEstimator(np.zeros(2), cfg.gamma0 * np.eye(2), cfg.beta_f) for e in graph.directed_edges()}
    rng = np.random.default_rng([cfg.seed, 1])
    target = cfg.target_model.position(0)
    std = cfg.noise.distance_std if cfg.noise else 0.0
    ranges = _measure_ranges(graph, positions, target, rng, std)
    return WorldState(0, positions, target, osc, ests, graph, ranges, rng)


def _setpoints(world: WorldState, cfg: ScenarioConfig, phases, k: int) -> dict[int, Vec2]:
    params = cfg.affine.at(k)
    return {i: setpoint(float(th), cfg.rho, params) for i, th in zip(world.alive, phases)}


def _est_errors(world: WorldState) -> dict[Edge, float]:
    out = {}
    for (i, j), est in world.estimators.items():
        pj = world.target_pos if j == TARGET else world.positions[j]
        out[(i, j)] = float(np.linalg.norm(est.p_hat - (world.positions[i] - pj)))
    return out


def _check_finite(world: WorldState) -> None:
    bad = [f"uav{i} position" for i, p in world.positions.items() if not np.all(np.isfinite(p))]
    if not np.all(np.isfinite(world.osc.phases)):
        bad.append("oscillator phases")
    bad += [f"estimate {e}" for e, est in world.estimators.items()
            if not (np.all(np.isfinite(est.p_hat)) and np.all(np.isfinite(est.gamma)))]
    if not np.all(np.isfinite(world.target_pos)):
        bad.append("target position")
    if bad:
        raise SimulationError(f"non-finite state at step {world.k}: {', '.join(bad)}")


def compute_controls(world: WorldState, cfg: ScenarioConfig, r_now, dr, u0) -> dict[int, ControlInput]:
    """Saturated tracking law for every alive agent, evaluated on the frozen snapshot."""
    g = world.graph
    out = {}
    for i in world.alive:
        nbrs = g.neighbors(i)
        est = {j: world.estimators[(i, j)].p_hat for j in nbrs}
        des = {j: (r_now[i] if j == TARGET else r_now[i] - r_now[j]) for j in nbrs}
        w = {j: g.weight(i, j) for j in nbrs}
        ubar = consensus_term(est, des, w, cfg.beta)
        out[i] = control_input(ubar, cfg.u_bar, dr[i], cfg.T, u0)
    return out


def step(world: WorldState, cfg: ScenarioConfig) -> tuple[WorldState, StepRecord]:
    k, T = world.k, cfg.T
    ids = world.alive

    # 1. pattern generation
    osc_next = phase_step(world.osc, T)
    r_now = _setpoints(world, cfg, world.osc.phases, k)
    r_next = _setpoints(world, cfg, osc_next.phases, k + 1)
    dr = {i: r_next[i] - r_now[i] for i in ids}

    # 2. control from current estimates
    target_next = cfg.target_model.position(k + 1)
    v0 = target_next - world.target_pos
    controls = compute_controls(world, cfg, r_now, dr, v0 / T)

    # 3. motion, with the plant's hard velocity limit
    positions_next, clamped = {}, []
    for i in ids:
        u = controls[i].u
        if math.hypot(u[0], u[1]) > cfg.u_max * (1.0 + CAP_TOL):
            u = saturate(u, cfg.u_max)
            clamped.append(i)
        positions_next[i] = world.positions[i] + T * u
    if clamped:
        log.warning("step %d: velocity limit clamped UAV(s) %s", k, clamped)

    # 4. measurements and estimator updates
    d_std = cfg.noise.distance_std if cfg.noise else 0.0
    v_std = cfg.noise.displacement_std if cfg.noise else 0.0
    rng = world.rng
    ranges_next = _measure_ranges(world.graph, positions_next, target_next, rng, d_std)
    disp = {i: _noisy(rng, positions_next[i] - world.positions[i], v_std) for i in ids}
    disp[TARGET] = _noisy(rng, v0, v_std)
    ests_next = {}
    for (i, j), est in world.estimators.items():
        key = _pair(i, j)
        m = Measurement(world.ranges[key], ranges_next[key], disp[i] - disp[j])
        ests_next[(i, j)] = rlse_update(est, m)

    record = StepRecord(
        k=k,
        positions=dict(world.positions),
        target_pos=world.target_pos,
        phases=dict(zip(ids, (float(x) for x in world.osc.phases))),
        setpoints=r_now,
        est_errors=_est_errors(world),
        controls=controls,
        clamped=tuple(clamped),
    )
    new = WorldState(k + 1, positions_next, target_next, osc_next, ests_next, world.graph, ranges_next, rng)
    _check_finite(new)
    return new, record


def terminal_record(world: WorldState, cfg: ScenarioConfig) -> StepRecord:
    ids = world.alive
    return StepRecord(
        k=world.k,
        positions=dict(world.positions),
        target_pos=world.target_pos,
        phases=dict(zip(ids, (float(x) for x in world.osc.phases))),
        setpoints=_setpoints(world, cfg, world.osc.phases, world.k),
        est_errors=_est_errors(world),
        controls=None,
    )


def inject_fault(world: WorldState, uav: int) -> WorldState:
    """Remove a UAV; rebuild topology, oscillator gains/adjacency over survivors.

    Surviving estimators keep their state.
    """
    if uav not in world.alive:
        raise KeyError(f"UAV {uav} is unknown or already removed")
    if len(world.alive) == 1:
        raise TopologyError("cannot remove the last UAV")
    survivors = tuple(i for i in world.alive if i != uav)
    graph = build_topology(len(survivors), world.graph.target_sensors - {uav}, ids=survivors)
    keep = [world.alive.index(i) for i in survivors]
    n = len(survivors)
    osc = OscillatorState(world.osc.phases[keep].copy(), default_gains(n), world.osc.omega, complete_adjacency(n))
    ests = {e: est for e, est in world.estimators.items() if uav not in e}
    ranges = {key: d for key, d in world.ranges.items() if uav not in key}
    positions = {i: p for i, p in world.positions.items() if i != uav}
    return replace(world, positions=positions, osc=osc, estimators=ests, graph=graph, ranges=ranges)


def run(cfg: ScenarioConfig) -> TrajectoryLog:
    report = validate_scenario(cfg)
    if not report.ok:
        raise ScenarioError("scenario failed validation:\n" + "\n".join(c.name + ": " + c.message
                                                                      for c in report.failures()))
    cfg = resolve(cfg)
    world = initial_world(cfg)
    faults: dict[int, list[int]] = {}
    for k, uav in cfg.fault_schedule:
        faults.setdefault(k, []).append(uav)

    out = TrajectoryLog(cfg, [], world.alive, world.graph.directed_edges())
    for k in range(cfg.steps + 1):
        for uav in faults.get(k, ()):
            log.info("step %d: removing UAV %d", k, uav)
            world = inject_fault(world, uav)
            out.faults.append((k, uav))
        if k == cfg.steps:
            break
        world, rec = step(world, cfg)
        out.records.append(rec)
    out.records.append(terminal_record(world, cfg))
    return out
