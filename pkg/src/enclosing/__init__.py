"""Distributed moving-target enclosing: oscillator formation, RLS relative localization, saturated tracking."""
from importlib import resources

from .config import ScenarioConfig, parse_scenario, validate_scenario
from .core import ScenarioError, SimulationError, TopologyError, build_topology
from .engine import run

__all__ = ["ScenarioConfig", "parse_scenario", "validate_scenario", "run", "build_topology",
           "ScenarioError", "SimulationError", "TopologyError", "bundled_scenario"]


def bundled_scenario(name: str):
    """Path to a scenario file shipped with the package (``paper_sim_a``, ``paper_sim_b``)."""
    stem = name[:-5] if name.endswith(".json") else name
    return resources.files(__package__) / "scenarios" / f"{stem}.json"
