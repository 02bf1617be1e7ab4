"""Seeded experiment harness: scenario files, runners, results, figures."""

from .config import (
    EXPERIMENTS,
    ScenarioConfig,
    ScenarioError,
    bundled_scenario_path,
    load_scenario,
    parse_scenario_text,
    scenario_from_mapping,
)
from .experiments import (
    RUNNERS,
    TraceRun,
    run_manipulation_sweep,
    run_ota_relay,
    run_reciprocity_experiment,
    run_rss_access,
    run_tdd_trace,
)
from .results import COLUMNS, ScenarioResult, make_row, summarize_estimates

__all__ = [
    "EXPERIMENTS",
    "ScenarioConfig",
    "ScenarioError",
    "bundled_scenario_path",
    "load_scenario",
    "parse_scenario_text",
    "scenario_from_mapping",
    "RUNNERS",
    "TraceRun",
    "run_manipulation_sweep",
    "run_ota_relay",
    "run_reciprocity_experiment",
    "run_rss_access",
    "run_tdd_trace",
    "COLUMNS",
    "ScenarioResult",
    "make_row",
    "summarize_estimates",
]
