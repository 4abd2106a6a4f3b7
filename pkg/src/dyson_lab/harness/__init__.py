"""Scenario configuration, acceptance checks, persistence and the suite runner."""
from .checks import REGISTRY, RunContext, make_rng
from .records import CSV_HEADER, RunRecord, Verdict, read_field, write_csv, write_field
from .runner import (
    EXIT_CHECK_FAILED,
    EXIT_CONFIG,
    EXIT_NUMERICAL,
    EXIT_OK,
    format_table,
    run_scenario,
    simulate,
    verify,
    write_report,
)
from .scenarios import ConfigError, Scenario, build, builtin_raw, builtin_scenarios, builtin_suites, load_scenario, load_suite
