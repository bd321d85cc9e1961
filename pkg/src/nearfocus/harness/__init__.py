"""Scenario loading, experiment drivers and artifact emission."""

from .experiments import (Design, PowerMap, RateCurve, SumRateTable, design_precoder, evaluate_rates,
                          place_users, power_map_grid, probe_line, run_power_map, run_rate_curve,
                          run_sum_rate_sweep)
from .output import emit_csv, emit_manifest, emit_report, read_csv
from .scenario import ArchitectureConfig, Scenario, dbm_to_watts, load_scenario, parse_scenario

__all__ = [
    "Design", "PowerMap", "RateCurve", "SumRateTable", "design_precoder", "evaluate_rates",
    "place_users", "power_map_grid", "probe_line", "run_power_map", "run_rate_curve",
    "run_sum_rate_sweep", "emit_csv", "emit_manifest", "emit_report", "read_csv",
    "ArchitectureConfig", "Scenario", "dbm_to_watts", "load_scenario", "parse_scenario",
]
