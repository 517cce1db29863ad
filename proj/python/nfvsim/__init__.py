"""Python bindings for the nfvsim data-center simulator."""

from ._core import (
    ConfigError,
    IoError,
    RoutingError,
    Scenario,
    ScenarioError,
    allocate_rates,
    compare,
    fat_tree_counts,
    fat_tree_paths,
    load_scenario,
    load_scenario_text,
    relative_change_percent,
    run,
    validate_scenario,
)

__all__ = [
    "ConfigError",
    "IoError",
    "RoutingError",
    "Scenario",
    "ScenarioError",
    "allocate_rates",
    "compare",
    "fat_tree_counts",
    "fat_tree_paths",
    "load_scenario",
    "load_scenario_text",
    "relative_change_percent",
    "run",
    "validate_scenario",
]
