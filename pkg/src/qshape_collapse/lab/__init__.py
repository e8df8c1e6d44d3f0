"""Experiment harness: scenario files, runs and result bundles."""

from .runner import ResultBundle, content_hash, execute, round_sig, run_scenario
from .scenario import Scenario, ScenarioError, list_scenarios, load_scenario, parse_scenario, validate_scenario

__all__ = [
    "ResultBundle",
    "Scenario",
    "ScenarioError",
    "content_hash",
    "execute",
    "list_scenarios",
    "load_scenario",
    "parse_scenario",
    "round_sig",
    "run_scenario",
    "validate_scenario",
]
