"""CSV serialization of trajectory logs.

Files written to a run directory:

* ``trajectory.csv`` -- ``k,entity,x,y`` with entity ``target`` or ``uav<i>``
* ``metrics.csv``    -- ``k,tracking_error,max_rel_loc_error,phase_spread``,
  then ``theta_<i>``, ``agent_err_<i>`` per agent and ``err_<i>_<j>`` per
  directed edge (``j = 0`` is the target); blank once an agent is removed
* ``controls.csv``   -- per-agent control decomposition for every step
* ``scenario.resolved.json`` -- the resolved configuration

Every CSV starts with a ``#`` header line carrying the schema version and the
run constants needed to analyse the file on its own.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from numpy.typing import NDArray

from .config import dump_scenario
from .engine import TrajectoryLog

LOG_SCHEMA = "enclosing-log/1"

TRAJECTORY_FILE = "trajectory.csv"
METRICS_FILE = "metrics.csv"
CONTROLS_FILE = "controls.csv"
CONFIG_FILE = "scenario.resolved.json"


class LogFormatError(ValueError):
    pass


def _fmt(x) -> str:
    x = float(x)
    return "" if math.isnan(x) else repr(x)


def header_line(log: TrajectoryLog) -> str:
    cfg = log.cfg
    meta = {
        "T": repr(cfg.T), "omega": repr(cfg.omega), "Omega": repr(cfg.Omega), "rho": repr(cfg.rho),
        "rho_max": repr(cfg.max_radius()), "u_bar": repr(cfg.u_bar),
        "uavs": ";".join(str(i) for i in log.initial_ids),
        "sensors": ";".join(str(i) for i in sorted(cfg.target_sensors)),
        "faults": ";".join(f"{k}:{u}" for k, u in log.faults),
    }
    return "# " + LOG_SCHEMA + " " + " ".join(f"{k}={v}" for k, v in meta.items())


def _metric_columns(log: TrajectoryLog) -> list[str]:
    cols = ["k", "tracking_error", "max_rel_loc_error", "phase_spread"]
    cols += [f"theta_{i}" for i in log.initial_ids]
    cols += [f"agent_err_{i}" for i in log.initial_ids]
    cols += [f"err_{i}_{j}" for i, j in log.initial_edges]
    return cols


def render_trajectory(log: TrajectoryLog) -> str:
    buf = io.StringIO()
    buf.write(header_line(log) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["k", "entity", "x", "y"])
    for r in log.records:
        w.writerow([r.k, "target", _fmt(r.target_pos[0]), _fmt(r.target_pos[1])])
        for i in log.initial_ids:
            if i in r.positions:
                p = r.positions[i]
                w.writerow([r.k, f"uav{i}", _fmt(p[0]), _fmt(p[1])])
    return buf.getvalue()


def render_metrics(log: TrajectoryLog) -> str:
    buf = io.StringIO()
    buf.write(header_line(log) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(_metric_columns(log))
    for r in log.records:
        agent_err = r.agent_errors
        row = [r.k, _fmt(r.tracking_error), _fmt(r.max_rel_loc_error), _fmt(r.phase_spread)]
        row += [_fmt(r.phases.get(i, math.nan)) for i in log.initial_ids]
        row += [_fmt(agent_err.get(i, math.nan)) for i in log.initial_ids]
        row += [_fmt(r.est_errors.get(e, math.nan)) for e in log.initial_edges]
        w.writerow(row)
    return buf.getvalue()


def render_controls(log: TrajectoryLog) -> str:
    buf = io.StringIO()
    buf.write(header_line(log) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["k", "agent", "ux", "uy", "consensus_x", "consensus_y", "feedforward_x", "feedforward_y",
                "target_x", "target_y", "saturated", "clamped"])
    for r in log.records:
        if r.controls is None:
            continue
        for i, c in r.controls.items():
            w.writerow([r.k, i, _fmt(c.u[0]), _fmt(c.u[1]), _fmt(c.consensus_part[0]), _fmt(c.consensus_part[1]),
                        _fmt(c.feedforward_part[0]), _fmt(c.feedforward_part[1]),
                        _fmt(c.target_part[0]), _fmt(c.target_part[1]), int(c.saturated), int(i in r.clamped)])
    return buf.getvalue()


def write_log(log: TrajectoryLog, out_dir) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = {
        TRAJECTORY_FILE: render_trajectory(log),
        METRICS_FILE: render_metrics(log),
        CONTROLS_FILE: render_controls(log),
        CONFIG_FILE: dump_scenario(log.cfg),
    }
    paths = []
    for name, text in files.items():
        p = out / name
        p.write_text(text)
        paths.append(p)
    return paths


@dataclass
class LogTables:
    """Column view of a written log, enough for plotting and excitation checks."""

    meta: dict[str, str]
    k: NDArray[np.int64]
    target: NDArray[np.float64]
    uavs: dict[int, NDArray[np.float64]]
    metrics: dict[str, NDArray[np.float64]]

    def meta_float(self, key: str, default: float | None = None) -> float:
        if key in self.meta and self.meta[key] != "":
            return float(self.meta[key])
        if default is None:
            raise LogFormatError(f"log header lacks {key!r}")
        return default

    def meta_ints(self, key: str) -> list[int]:
        return [int(x) for x in self.meta.get(key, "").split(";") if x]

    def faults(self) -> list[tuple[int, int]]:
        return [tuple(int(v) for v in f.split(":")) for f in self.meta.get("faults", "").split(";") if f]

    @classmethod
    def from_log(cls, log: TrajectoryLog) -> "LogTables":
        return cls.parse(render_trajectory(log), render_metrics(log))

    @classmethod
    def read(cls, path) -> "LogTables":
        """Read a run directory (or any file inside it)."""
        p = Path(path)
        d = p if p.is_dir() else p.parent
        traj = d / TRAJECTORY_FILE
        if not traj.exists():
            raise FileNotFoundError(f"no {TRAJECTORY_FILE} in {d}")
        met = d / METRICS_FILE
        return cls.parse(traj.read_text(), met.read_text() if met.exists() else None)

    @classmethod
    def parse(cls, traj_text: str, metrics_text: str | None = None) -> "LogTables":
        meta = _parse_header(traj_text)
        rows = list(csv.reader(traj_text.splitlines()[1:]))
        if not rows or rows[0] != ["k", "entity", "x", "y"]:
            raise LogFormatError("trajectory CSV has an unexpected column layout")
        rows = rows[1:]
        if not rows:
            raise LogFormatError("no records")
        ks = sorted({int(r[0]) for r in rows})
        index = {k: n for n, k in enumerate(ks)}
        target = np.full((len(ks), 2), np.nan)
        uavs: dict[int, NDArray[np.float64]] = {}
        for k, ent, x, y in rows:
            n = index[int(k)]
            xy = (float(x), float(y))
            if ent == "target":
                target[n] = xy
            elif ent.startswith("uav"):
                uavs.setdefault(int(ent[3:]), np.full((len(ks), 2), np.nan))[n] = xy
            else:
                raise LogFormatError(f"unknown entity {ent!r}")
        metrics: dict[str, NDArray[np.float64]] = {}
        if metrics_text is not None:
            if _parse_header(metrics_text).get("schema") != meta["schema"]:
                raise LogFormatError("metrics and trajectory schema versions differ")
            mrows = list(csv.reader(metrics_text.splitlines()[1:]))
            cols = mrows[0]
            data = mrows[1:]
            for c, name in enumerate(cols):
                metrics[name] = np.array([float(r[c]) if r[c] != "" else np.nan for r in data])
        return cls(meta, np.array(ks), target, dict(sorted(uavs.items())), metrics)


def _parse_header(text: str) -> dict[str, str]:
    first = text.split("\n", 1)[0]
    parts = first[1:].split() if first.startswith("#") else []
    if not parts or parts[0] != LOG_SCHEMA:
        raise LogFormatError(f"missing or unsupported log schema header (expected {LOG_SCHEMA})")
    meta = {"schema": parts[0]}
    for item in parts[1:]:
        key, _, val = item.partition("=")
        meta[key] = val
    return meta
