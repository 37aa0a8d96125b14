"""Shared planar vector helpers, the extended interaction graph and error types.

Vectors are plain ``numpy`` arrays of shape ``(2,)``. The target is vertex
``0``; UAVs carry positive integer ids that survive fault removals, so a
three-agent graph built after losing UAV 4 still has ids ``1, 2, 3``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np
from numpy.typing import NDArray

Vec2 = NDArray[np.float64]
Edge = tuple[int, int]

TARGET = 0


class ScenarioError(ValueError):
    """Configuration or assumption violation detected before/while building a run."""


class TopologyError(ScenarioError):
    pass


class SimulationError(RuntimeError):
    """Numeric failure inside the engine (non-finite state, broken invariant)."""


def vec2(x: float, y: float) -> Vec2:
    return np.array([float(x), float(y)], dtype=np.float64)


def as_vec2(q) -> Vec2:
    a = np.asarray(q, dtype=np.float64).reshape(-1)
    if a.shape != (2,):
        raise ValueError(f"expected a planar vector, got shape {np.shape(q)}")
    return a.copy()


def is_finite(q) -> bool:
    return bool(np.all(np.isfinite(q)))


@dataclass(frozen=True)
class ExtendedGraph:
    """Complete UAV graph plus the target vertex 0.

    ``weights`` maps directed extended edges ``(i, j)`` (``i`` a UAV, ``j`` a
    UAV or ``0``) to the consensus weight used by UAV ``i``. Each UAV row sums
    to one. Rows are *not* symmetric when only some UAVs see the target.
    """

    uav_ids: tuple[int, ...]
    target_sensors: frozenset[int]
    weights: Mapping[Edge, float] = field(repr=False)

    @property
    def n(self) -> int:
        return len(self.uav_ids)

    @property
    def uav_edges(self) -> list[Edge]:
        """Unordered UAV pairs ``(i, j)`` with ``i < j``."""
        ids = self.uav_ids
        return [(a, b) for x, a in enumerate(ids) for b in ids[x + 1:]]

    def neighbors(self, i: int) -> tuple[int, ...]:
        """Extended neighbor set of UAV ``i`` (target last, if sensed)."""
        if i not in self.uav_ids:
            raise KeyError(f"UAV {i} not in graph")
        nbrs = tuple(j for j in self.uav_ids if j != i)
        return nbrs + (TARGET,) if i in self.target_sensors else nbrs

    def directed_edges(self) -> list[Edge]:
        return [(i, j) for i in self.uav_ids for j in self.neighbors(i)]

    def weight(self, i: int, j: int) -> float:
        return self.weights.get((i, j), 0.0)

    def row_sum(self, i: int) -> float:
        return math.fsum(self.weight(i, j) for j in self.neighbors(i))

    def uav_adjacency(self) -> NDArray[np.float64]:
        """Oscillator coupling matrix over UAVs only: ``1/(n-1)`` off-diagonal."""
        n = self.n
        if n < 2:
            return np.zeros((n, n))
        a = np.full((n, n), 1.0 / (n - 1))
        np.fill_diagonal(a, 0.0)
        return a


def build_topology(n: int, target_sensors: Iterable[int], ids: Iterable[int] | None = None) -> ExtendedGraph:
    """Build the complete UAV graph extended with the target vertex.

    Weights are uniform over each UAV's extended neighbor set, so UAV rows
    sum to one by construction.

    >>> g = build_topology(4, {1})
    >>> g.weight(1, 0), g.weight(2, 1)
    (0.25, 0.3333333333333333)
    """
    uav_ids = tuple(range(1, n + 1)) if ids is None else tuple(ids)
    if n < 1 or len(uav_ids) != n:
        raise TopologyError(f"invalid UAV count n={n}")
    if len(set(uav_ids)) != n or any(i <= 0 for i in uav_ids):
        raise TopologyError(f"UAV ids must be distinct positive integers, got {uav_ids}")
    sensors = frozenset(int(s) for s in target_sensors)
    if not sensors:
        raise TopologyError("target not globally reachable: no UAV senses the target")
    unknown = sensors.difference(uav_ids)
    if unknown:
        raise TopologyError(f"target sensors {sorted(unknown)} are not UAVs of the graph")

    weights: dict[Edge, float] = {}
    for i in uav_ids:
        nbrs = [j for j in uav_ids if j != i] + ([TARGET] if i in sensors else [])
        if not nbrs:
            continue
        w = 1.0 / len(nbrs)
        for j in nbrs:
            weights[(i, j)] = w
    return ExtendedGraph(uav_ids=uav_ids, target_sensors=sensors, weights=weights)
