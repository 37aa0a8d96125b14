"""Scenario configuration: strict JSON parsing, dumping and assumption checks."""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any

import numpy as np

from .core import ScenarioError, TopologyError, build_topology
from .formation import AffineSchedule
from .oscillator import default_gains
from .target import TargetModel

SCHEMA_VERSION = "enclosing-scenario/1"


@dataclass(frozen=True)
class Noise:
    distance_std: float = 0.0
    displacement_std: float = 0.0


@dataclass(frozen=True)
class ScenarioConfig:
    """Every free parameter of a run. JSON keys are the field names."""

    n: int
    T: float
    steps: int
    omega: float
    beta: float
    beta_f: float
    u_bar: float
    u_max: float
    target_model: TargetModel
    target_sensors: tuple[int, ...]
    name: str = "scenario"
    rho: float = 4.0
    affine: AffineSchedule = AffineSchedule()
    omega_cap: float | None = None
    osc_gains: tuple[float, ...] | None = None
    gamma0: float = 1.0
    initial_positions: tuple[tuple[float, float], ...] | None = None
    initial_phases: tuple[float, ...] | None = None
    fault_schedule: tuple[tuple[int, int], ...] = ()
    noise: Noise | None = None
    seed: int = 0

    @property
    def Omega(self) -> float:
        """Declared excitation bound; twice the oscillator frequency unless set."""
        return 2.0 * self.omega if self.omega_cap is None else self.omega_cap

    @property
    def gains(self) -> tuple[float, ...]:
        return tuple(default_gains(self.n)) if self.osc_gains is None else self.osc_gains

    def target_speed(self) -> float:
        """``U_0``: largest target speed (m/s) over the run."""
        return self.target_model.max_step(self.steps) / self.T

    def max_radius(self) -> float:
        """Base radius times the largest gain of the affine linear part over the run."""
        worst = 0.0
        for k in range(self.steps + 2):
            lin = self.affine.at(k).matrix()[:2, :2]
            worst = max(worst, float(np.linalg.norm(lin, 2)))
        return self.rho * worst

    def to_dict(self) -> dict:
        d: dict[str, Any] = {"schema": SCHEMA_VERSION}
        for f in fields(self):
            val = getattr(self, f.name)
            if isinstance(val, (TargetModel, AffineSchedule)):
                val = val.to_dict()
            elif isinstance(val, Noise):
                val = asdict(val)
            elif isinstance(val, tuple):
                val = json.loads(json.dumps(val))
            d[f.name] = val
        return d


_REQUIRED = {"n", "T", "steps", "omega", "beta", "beta_f", "u_bar", "u_max", "target_model", "target_sensors"}


def _number(v, path: str) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ScenarioError(f"{path}: expected a number, got {v!r}")
    return float(v)


def _integer(v, path: str) -> int:
    if isinstance(v, bool) or not isinstance(v, int):
        if isinstance(v, float) and v.is_integer():
            return int(v)
        raise ScenarioError(f"{path}: expected an integer, got {v!r}")
    return v


def _list(v, path: str) -> list:
    if not isinstance(v, list):
        raise ScenarioError(f"{path}: expected a list, got {type(v).__name__}")
    return v


def config_from_dict(d: Any) -> ScenarioConfig:
    if not isinstance(d, dict):
        raise ScenarioError("scenario: expected a JSON object at top level")
    known = {f.name for f in fields(ScenarioConfig)} | {"schema"}
    unknown = sorted(set(d) - known)
    if unknown:
        raise ScenarioError(f"scenario: unknown key(s) {unknown}")
    missing = sorted(_REQUIRED - set(d))
    if missing:
        raise ScenarioError(f"scenario: missing required key(s) {missing}")
    if d.get("schema", SCHEMA_VERSION) != SCHEMA_VERSION:
        raise ScenarioError(f"scenario.schema: unsupported version {d['schema']!r}")

    kw: dict[str, Any] = {}
    for key in ("n", "steps", "seed"):
        if key in d:
            kw[key] = _integer(d[key], key)
    for key in ("T", "omega", "beta", "beta_f", "u_bar", "u_max", "rho", "gamma0"):
        if key in d:
            kw[key] = _number(d[key], key)
    if "name" in d:
        if not isinstance(d["name"], str):
            raise ScenarioError("name: expected a string")
        kw["name"] = d["name"]
    if d.get("omega_cap") is not None:
        kw["omega_cap"] = _number(d["omega_cap"], "omega_cap")
    if d.get("osc_gains") is not None:
        kw["osc_gains"] = tuple(_number(v, f"osc_gains[{i}]") for i, v in enumerate(_list(d["osc_gains"], "osc_gains")))
    kw["target_sensors"] = tuple(_integer(v, f"target_sensors[{i}]")
                                 for i, v in enumerate(_list(d["target_sensors"], "target_sensors")))
    if d.get("initial_positions") is not None:
        pts = []
        for i, p in enumerate(_list(d["initial_positions"], "initial_positions")):
            p = _list(p, f"initial_positions[{i}]")
            if len(p) != 2:
                raise ScenarioError(f"initial_positions[{i}]: expected [x, y]")
            pts.append((_number(p[0], f"initial_positions[{i}][0]"), _number(p[1], f"initial_positions[{i}][1]")))
        kw["initial_positions"] = tuple(pts)
    if d.get("initial_phases") is not None:
        kw["initial_phases"] = tuple(_number(v, f"initial_phases[{i}]")
                                     for i, v in enumerate(_list(d["initial_phases"], "initial_phases")))
    if "fault_schedule" in d:
        faults = []
        for i, f in enumerate(_list(d["fault_schedule"], "fault_schedule")):
            f = _list(f, f"fault_schedule[{i}]")
            if len(f) != 2:
                raise ScenarioError(f"fault_schedule[{i}]: expected [step, uav_id]")
            faults.append((_integer(f[0], f"fault_schedule[{i}][0]"), _integer(f[1], f"fault_schedule[{i}][1]")))
        kw["fault_schedule"] = tuple(faults)
    if d.get("noise") is not None:
        nz = d["noise"]
        if not isinstance(nz, dict):
            raise ScenarioError("noise: expected an object or null")
        extra = set(nz) - {"distance_std", "displacement_std"}
        if extra:
            raise ScenarioError(f"noise: unknown key(s) {sorted(extra)}")
        kw["noise"] = Noise(**{k: _number(v, f"noise.{k}") for k, v in nz.items()})
    try:
        kw["target_model"] = TargetModel.from_dict(d["target_model"])
        if "affine" in d:
            kw["affine"] = AffineSchedule.from_dict(d["affine"])
    except (ValueError, KeyError, TypeError, IndexError) as exc:
        raise ScenarioError(str(exc)) from exc
    return ScenarioConfig(**kw)


def parse_scenario(path) -> ScenarioConfig:
    """Strictly parse a scenario file. Missing files raise ``FileNotFoundError``."""
    text = Path(path).read_text()
    if not text.strip():
        raise ScenarioError(f"{path}: empty scenario file")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}: invalid JSON ({exc})") from exc
    return config_from_dict(data)


def dump_scenario(cfg: ScenarioConfig) -> str:
    return json.dumps(cfg.to_dict(), indent=2) + "\n"


def resolve(cfg: ScenarioConfig) -> ScenarioConfig:
    """Fill seeded defaults (gains, Omega, initial positions and phases).

    Initial positions are uniform in a disk of radius ``2*rho`` around the
    target start; phases are uniform in ``[0, 2*pi)``. The draws use their own
    seeded stream, so resolving never shifts the measurement-noise stream.
    """
    rng = np.random.default_rng([cfg.seed, 0])
    center = cfg.target_model.position(0)
    positions = cfg.initial_positions
    if positions is None:
        r = 2.0 * cfg.rho * np.sqrt(rng.uniform(size=cfg.n))
        a = rng.uniform(0.0, 2.0 * math.pi, size=cfg.n)
        positions = tuple((float(center[0] + ri * math.cos(ai)), float(center[1] + ri * math.sin(ai)))
                          for ri, ai in zip(r, a))
    phases = cfg.initial_phases
    if phases is None:
        phases = tuple(float(x) for x in rng.uniform(0.0, 2.0 * math.pi, size=cfg.n))
    return replace(cfg, initial_positions=positions, initial_phases=phases,
                   osc_gains=cfg.gains, omega_cap=cfg.Omega)


@dataclass(frozen=True)
class Check:
    name: str
    status: str  # "pass" | "fail" | "unknown"
    margin: float | None = None
    message: str = ""
    hard: bool = True


@dataclass
class ValidationReport:
    checks: list[Check] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not any(c.hard and c.status == "fail" for c in self.checks)

    def failures(self, hard_only: bool = True) -> list[Check]:
        return [c for c in self.checks if c.status == "fail" and (c.hard or not hard_only)]

    def get(self, name: str) -> Check:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def lines(self) -> list[str]:
        out = []
        for c in self.checks:
            margin = "" if c.margin is None else f" margin={c.margin:.6g}"
            kind = "" if c.hard else " (advisory)"
            status = "warn" if c.status == "fail" and not c.hard else c.status
            out.append(f"[{status.upper():7s}] {c.name}{kind}{margin}" + (f": {c.message}" if c.message else ""))
        return out


def _range_check(name: str, ok: bool, margin: float | None, msg: str, hard: bool = True) -> Check:
    return Check(name, "pass" if ok else "fail", margin, "" if ok else msg, hard)


def validate_scenario(cfg: ScenarioConfig, log=None) -> ValidationReport:
    """Check standing assumptions; failures are reported, never raised.

    Pass a finished trajectory log to evaluate the sampling-time condition,
    which otherwise stays ``unknown``.
    """
    rep = ValidationReport()
    add = rep.checks.append

    add(_range_check("positive sampling time", cfg.T > 0, cfg.T, "T must be positive"))
    add(_range_check("non-negative step count", cfg.steps >= 0, float(cfg.steps), "steps must be >= 0"))
    add(_range_check("positive radius", cfg.rho > 0, cfg.rho, "rho must be positive"))
    try:
        build_topology(cfg.n, cfg.target_sensors)
        add(Check("topology: complete graph, target reachable", "pass"))
    except TopologyError as exc:
        add(Check("topology: complete graph, target reachable", "fail", None, str(exc)))

    add(_fault_check(cfg))

    shapes = []
    if len(cfg.gains) != cfg.n:
        shapes.append(f"osc_gains has {len(cfg.gains)} entries for n={cfg.n}")
    if cfg.initial_positions is not None and len(cfg.initial_positions) != cfg.n:
        shapes.append(f"initial_positions has {len(cfg.initial_positions)} entries for n={cfg.n}")
    if cfg.initial_phases is not None and len(cfg.initial_phases) != cfg.n:
        shapes.append(f"initial_phases has {len(cfg.initial_phases)} entries for n={cfg.n}")
    add(Check("per-agent list lengths", "fail" if shapes else "pass", None, "; ".join(shapes)))

    bf = cfg.beta_f
    add(_range_check("forgetting factor in (0, 1)", 0 < bf < 1, min(bf, 1 - bf), f"beta_f={bf} outside (0, 1)"))
    add(_range_check("estimator prior positive definite", cfg.gamma0 > 0, cfg.gamma0, "gamma0 must be > 0"))
    if cfg.T > 0:
        m = 1.0 / cfg.T - cfg.beta
        add(_range_check("controller gain beta < 1/T", cfg.beta > 0 and m > 0, m,
                         f"beta={cfg.beta} must lie in (0, 1/T={1.0 / cfg.T:g})"))
    add(_range_check("consensus bound 0 < u_bar < u_max", 0 < cfg.u_bar < cfg.u_max, cfg.u_max - cfg.u_bar,
                     f"need 0 < u_bar={cfg.u_bar} < u_max={cfg.u_max}"))

    if cfg.T > 0 and cfg.steps >= 0:
        u0 = cfg.target_speed()
        add(_range_check("target slower than velocity bound (U_0 < u_max)", u0 < cfg.u_max, cfg.u_max - u0,
                         f"target speed {u0:.6g} m/s >= u_max={cfg.u_max}"))
        add(_range_check("target vs consensus budget (U_0 < u_bar)", u0 < cfg.u_bar, cfg.u_bar - u0,
                         f"target faster than consensus budget ({u0:.6g} >= {cfg.u_bar})", hard=False))
        try:
            rho_max = cfg.max_radius()
            need = cfg.u_bar + rho_max * cfg.Omega + u0
            add(_range_check("velocity budget u_bar + rho*Omega + U_0 <= u_max", need <= cfg.u_max,
                             cfg.u_max - need, f"worst-case command {need:.6g} m/s exceeds u_max={cfg.u_max}"))
        except ValueError as exc:
            add(Check("velocity budget u_bar + rho*Omega + U_0 <= u_max", "fail", None, str(exc)))

    om = cfg.Omega - cfg.omega
    add(_range_check("oscillator frequency 0 < omega < Omega", cfg.omega > 0 and om > 0, om,
                     f"need 0 < omega={cfg.omega} < Omega={cfg.Omega}"))
    if cfg.noise is not None:
        ok = cfg.noise.distance_std >= 0 and cfg.noise.displacement_std >= 0
        add(_range_check("noise levels non-negative", ok, None, "noise std-devs must be >= 0"))

    add(_sampling_time_check(cfg, log))
    return rep


def _fault_check(cfg: ScenarioConfig) -> Check:
    name = "fault schedule keeps target reachable"
    alive = set(range(1, cfg.n + 1))
    sensors = set(cfg.target_sensors)
    for k, uav in sorted(cfg.fault_schedule):
        if not 0 <= k <= cfg.steps:
            return Check(name, "fail", None, f"fault at step {k} outside [0, {cfg.steps}]")
        if uav not in alive:
            return Check(name, "fail", None, f"fault at step {k}: UAV {uav} is not alive")
        if len(alive) == 1:
            return Check(name, "fail", None, f"fault at step {k}: cannot remove the last UAV")
        alive.discard(uav)
        if not sensors & alive:
            return Check(name, "fail", None, f"fault at step {k}: target not globally reachable after removing UAV {uav}")
    return Check(name, "pass")


def _sampling_time_check(cfg: ScenarioConfig, log) -> Check:
    name = "small sampling time (excitation pair condition)"
    if log is None:
        return Check(name, "unknown", None, "needs trajectory data", hard=False)
    from .analysis import sampling_time_from_log

    try:
        st = sampling_time_from_log(log)
    except ValueError as exc:
        return Check(name, "unknown", None, str(exc), hard=False)
    msg = (f"argmax threshold {st.threshold_argmax:.6g}, uniform threshold {st.threshold_uniform:.6g}"
           + ("" if st.passes_uniform else "; T exceeds the uniform (min over windows/edges) threshold"))
    return Check(name, "pass" if st.passes_argmax else "fail", st.threshold_argmax - cfg.T, msg, hard=False)
