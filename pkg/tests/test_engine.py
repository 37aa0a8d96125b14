from __future__ import annotations

import math
from dataclasses import replace

import numpy as np
import pytest

from enclosing.analysis import decay_slope, equilibrium_step, metrics
from enclosing.config import Noise, resolve, validate_scenario
from enclosing.core import TARGET, ScenarioError, SimulationError, TopologyError
from enclosing.engine import StepRecord, initial_world, inject_fault, run, step
from enclosing.localization import EdgeEstimator
from enclosing.target import TargetModel


def _reference_first_step(cfg):
    """Straight-line scalar version of one pipeline step for the bundled scenario A."""
    n, T, w, rho, beta, bf, cap = cfg.n, cfg.T, cfg.omega, cfg.rho, cfg.beta, cfg.beta_f, cfg.u_bar
    K = list(cfg.gains)
    th = list(cfg.initial_phases)
    p = [list(q) for q in cfg.initial_positions]
    a = 1.0 / (n - 1)
    th_next = []
    for i in range(n):
        c = 0.0
        for j in range(n):
            if j != i:
                for l in range(1, n + 1):
                    c += K[l - 1] * a / l * math.sin(l * (th[i] - th[j]))
        th_next.append(th[i] + T * w + T * c)
    r = [(rho * math.cos(t), rho * math.sin(t)) for t in th]
    r1 = [(rho * math.cos(t), rho * math.sin(t)) for t in th_next]
    p0, p0n = (0.0, 0.0), (cfg.target_model.velocity[0], cfg.target_model.velocity[1])
    u0 = ((p0n[0] - p0[0]) / T, (p0n[1] - p0[1]) / T)

    p_next = []
    for i in range(n):
        nb = [j for j in range(n) if j != i] + (["t"] if i == 0 else [])
        wt = 1.0 / len(nb)
        ux = uy = 0.0
        for j in nb:
            rx, ry = (r[i][0], r[i][1]) if j == "t" else (r[i][0] - r[j][0], r[i][1] - r[j][1])
            # initial estimates are zero
            ux += -beta * wt * (0.0 - rx)
            uy += -beta * wt * (0.0 - ry)
        m = math.hypot(ux, uy)
        s = cap / max(cap, m)
        vx = ux * s + (r1[i][0] - r[i][0]) / T + u0[0]
        vy = uy * s + (r1[i][1] - r[i][1]) / T + u0[1]
        p_next.append((p[i][0] + T * vx, p[i][1] + T * vy))

    def rls(pi, pj, pi1, pj1):
        d0 = math.hypot(pi[0] - pj[0], pi[1] - pj[1])
        d1 = math.hypot(pi1[0] - pj1[0], pi1[1] - pj1[1])
        vx = (pi1[0] - pi[0]) - (pj1[0] - pj[0])
        vy = (pi1[1] - pi[1]) - (pj1[1] - pj[1])
        z = 0.5 * (d1 * d1 - d0 * d0 - vx * vx - vy * vy)
        den = bf + vx * vx + vy * vy
        g = [[(1 - vx * vx / den) / bf, (-vx * vy / den) / bf], [(-vx * vy / den) / bf, (1 - vy * vy / den) / bf]]
        gvx, gvy = g[0][0] * vx + g[0][1] * vy, g[1][0] * vx + g[1][1] * vy
        return (vx + gvx * z, vy + gvy * z), g

    est = {}
    for i in range(n):
        for j in range(n):
            if j != i:
                est[(i + 1, j + 1)] = rls(p[i], p[j], p_next[i], p_next[j])
    est[(1, TARGET)] = rls(p[0], p0, p_next[0], p0n)
    return th_next, p_next, est


def test_one_step_matches_reference(cfg_a):
    cfg = resolve(cfg_a)
    th_ref, p_ref, est_ref = _reference_first_step(cfg)
    world, rec = step(initial_world(cfg), cfg)
    np.testing.assert_allclose(world.osc.phases, th_ref, atol=1e-12)
    for i in range(cfg.n):
        np.testing.assert_allclose(world.positions[i + 1], p_ref[i], atol=1e-12)
    assert set(world.estimators) == set(est_ref)
    for e, (ph, g) in est_ref.items():
        np.testing.assert_allclose(world.estimators[e].p_hat, ph, atol=1e-10)
        np.testing.assert_allclose(world.estimators[e].gamma, g, atol=1e-12)
    assert rec.k == 0 and world.k == 1


def _balanced_config(cfg, n=4, k_phase=0.3):
    th = tuple(k_phase + 2 * math.pi * i / n for i in range(n))
    start = (2.0, -1.0)
    pos = tuple((start[0] + cfg.rho * math.cos(t), start[1] + cfg.rho * math.sin(t)) for t in th)
    return replace(cfg, n=n, osc_gains=None, initial_phases=th, initial_positions=pos,
                   target_model=TargetModel("line", start=start, velocity=(0.0, 0.0)), steps=100)


def _perfect_estimates(world):
    for (i, j) in list(world.estimators):
        pj = world.target_pos if j == TARGET else world.positions[j]
        world.estimators[(i, j)] = EdgeEstimator(world.positions[i] - pj, np.eye(2), world.estimators[(i, j)].beta_f)


def test_equilibrium_is_held(cfg_a):
    cfg = resolve(_balanced_config(cfg_a))
    world = initial_world(cfg)
    _perfect_estimates(world)
    for _ in range(100):
        world, rec = step(world, cfg)
        assert rec.tracking_error < 1e-9
        assert max(np.linalg.norm(c.consensus_part) for c in rec.controls.values()) < 1e-9
        assert max(rec.agent_errors.values()) < 1e-9


def test_consensus_budget_at_the_edge(cfg_a):
    # u_bar chosen as the analytic velocity budget minus a tiny margin
    need = cfg_a.max_radius() * cfg_a.Omega + cfg_a.target_speed()
    cfg = replace(cfg_a, u_bar=cfg_a.u_max - need - 1e-9, steps=300)
    assert validate_scenario(cfg).ok
    log = run(cfg)
    assert log.clamp_events == 0
    assert any(c.saturated for r in log.records[:-1] for c in r.controls.values())
    for r in log.records[:-1]:
        for c in r.controls.values():
            assert np.linalg.norm(c.consensus_part) <= cfg.u_bar * (1 + 1e-12)
            assert np.linalg.norm(c.u) <= cfg.u_max * (1 + 1e-12)


def test_realized_displacement_respects_cap(log_a, log_b):
    for log in (log_a, log_b):
        cap = log.cfg.T * log.cfg.u_max * (1 + 1e-12)
        for a, b in zip(log.records, log.records[1:]):
            for i, p in b.positions.items():
                assert np.linalg.norm(p - a.positions[i]) <= cap


def test_measurement_consistency(cfg_a):
    cfg = resolve(replace(cfg_a, steps=120))
    world = initial_world(cfg)
    for _ in range(120):
        prev = world
        world, _ = step(world, cfg)
        for (i, j), est in world.estimators.items():
            pi0, pi1 = prev.positions[i], world.positions[i]
            pj0 = prev.target_pos if j == TARGET else prev.positions[j]
            pj1 = world.target_pos if j == TARGET else world.positions[j]
            key = (TARGET, i) if j == TARGET else (min(i, j), max(i, j))
            d0, d1 = prev.ranges[key], world.ranges[key]
            v = (pi1 - pi0) - (pj1 - pj0)
            assert d0 == pytest.approx(np.linalg.norm(pi0 - pj0), abs=1e-12)
            assert abs(d1 - d0) <= np.linalg.norm(v) + 1e-12
            zeta = 0.5 * (d1 * d1 - d0 * d0 - v @ v)
            assert zeta == pytest.approx(v @ (pi0 - pj0), abs=1e-9 * max(1.0, d0 * d0 + d1 * d1))


def test_steps_zero_gives_initial_record(cfg_a):
    log = run(replace(cfg_a, steps=0))
    assert len(log.records) == 1
    assert log.records[0].k == 0 and log.records[0].controls is None


def test_invalid_scenario_refused(cfg_a):
    with pytest.raises(ScenarioError):
        run(replace(cfg_a, beta=9.0))


def test_fault_rebuilds_topology(cfg_a):
    world = initial_world(resolve(cfg_a))
    after = inject_fault(world, 4)
    assert after.alive == (1, 2, 3)
    assert after.osc.gains.tolist() == [1.0, 1.0, -1.0]
    assert np.abs(after.osc.adjacency.sum(axis=1) - 1).max() < 1e-12
    for i in after.alive:
        assert abs(after.graph.row_sum(i) - 1) < 1e-12
    assert all(4 not in e for e in after.estimators)
    for e, est in after.estimators.items():
        assert est is world.estimators[e]


def test_fault_errors(cfg_a):
    world = initial_world(resolve(cfg_a))
    with pytest.raises(TopologyError, match="target not globally reachable"):
        inject_fault(world, 1)
    with pytest.raises(KeyError):
        inject_fault(world, 9)
    one = initial_world(resolve(replace(cfg_a, n=1, osc_gains=None, initial_positions=((1.0, 1.0),),
                                        initial_phases=(0.0,))))
    with pytest.raises((TopologyError, KeyError)):
        inject_fault(one, 1)


def test_fault_run_rebalances(log_b):
    assert log_b.faults == [(250, 4)]
    assert all(4 not in r.positions for r in log_b.records[250:])
    k_o = equilibrium_step(log_b)
    assert k_o is not None and k_o > 250


def test_non_finite_state_aborts(cfg_a):
    cfg = resolve(cfg_a)
    world = initial_world(cfg)
    world.positions[2] = np.array([np.nan, 0.0])
    with pytest.raises(SimulationError, match="non-finite"):
        step(world, cfg)


def test_noise_is_seeded(cfg_a):
    noisy = replace(cfg_a, steps=60, noise=Noise(0.01, 0.001), initial_positions=None, initial_phases=None)
    a, b, c = run(noisy), run(noisy), run(replace(noisy, seed=1))
    pa = [r.positions[2] for r in a.records]
    assert all(np.array_equal(x, r.positions[2]) for x, r in zip(pa, b.records))
    assert not all(np.array_equal(x, r.positions[2]) for x, r in zip(pa, c.records))


def test_record_metric_examples():
    rho, n = 4.0, 4
    r = {i + 1: np.array([rho * math.cos(2 * math.pi * i / n), rho * math.sin(2 * math.pi * i / n)]) for i in range(n)}
    p0 = np.array([5.0, -2.0])
    pos = {i: p0 + r[i] for i in r}
    rec = StepRecord(0, pos, p0, {i: 0.0 for i in r}, r, {}, None)
    assert rec.tracking_error < 1e-12
    eps = 0.3
    pos[2] = pos[2] + np.array([eps, 0.0])
    rec = StepRecord(0, pos, p0, {i: 0.0 for i in r}, r, {}, None)
    assert rec.tracking_error == pytest.approx(eps / n, abs=1e-12)


def test_scenario_a_contracts(log_a):
    ms = metrics(log_a)
    k_o = equilibrium_step(log_a)
    assert k_o is not None
    assert ms.tracking_error[600] < 5e-2
    assert decay_slope(ms.max_agent_error, k_o) < 0
    assert ms.max_rel_loc_error[-1] < 1e-3
