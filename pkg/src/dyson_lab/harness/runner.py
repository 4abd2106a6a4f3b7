"""Scenario execution, suite verification and report files."""
from __future__ import annotations

import json
import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

from .. import diagnostics as dg
from ..evolution import NumericalFailure, State, run
from ..spectral import DensityField
from . import plotting
from .checks import RunContext, evaluate
from .records import RunRecord, Verdict, write_csv, write_field
from .scenarios import ConfigError, Scenario, build, builtin_raw, builtin_suites

__all__ = [
    "EXIT_OK",
    "EXIT_CHECK_FAILED",
    "EXIT_CONFIG",
    "EXIT_NUMERICAL",
    "simulate",
    "run_scenario",
    "write_report",
    "verify",
    "suite_names",
    "max_workers",
]

log = logging.getLogger(__name__)

EXIT_OK, EXIT_CHECK_FAILED, EXIT_CONFIG, EXIT_NUMERICAL = 0, 1, 2, 3
STRIDE_BUDGET = 256


def _holder_scheme(n: int) -> str:
    if n <= dg.EXHAUSTIVE_HOLDER_MAX_N:
        return f"exhaustive periodic shifts (N={n})"
    return f"strided shifts 1..{STRIDE_BUDGET} plus 8 per octave (N={n}); lower bound"


def simulate(scenario: Scenario, keep_fields: bool = True) -> Tuple[List[dg.DiagnosticsRecord], List[DensityField], float]:
    """Run the solver and compute one diagnostics record per scheduled time."""
    records: List[dg.DiagnosticsRecord] = []
    fields: List[DensityField] = []

    def observe(s: State):
        records.append(dg.compute_record(s.u, holder=scenario.holder, stride_budget=STRIDE_BUDGET))
        if keep_fields:
            fields.append(s.u.copy())

    start = time.perf_counter()
    run(scenario.initial_field(), scenario.solver, observer=observe)
    return records, fields, time.perf_counter() - start


def _record(scenario: Scenario, records, stored, verdicts, runtime, failure=None, failure_time=None) -> RunRecord:
    return RunRecord(
        scenario=scenario.name,
        config_hash=scenario.config_hash,
        seed=scenario.seed,
        rng="numpy Philox (counter-based, 64-bit)",
        domain=scenario.domain.to_dict(),
        epsilon=scenario.solver.epsilon,
        records=records,
        stored_fields=stored,
        verdicts=verdicts,
        runtime_s=runtime,
        holder_sampling=_holder_scheme(scenario.domain.n_points) if scenario.holder else "disabled",
        failure=failure,
        failure_time=failure_time,
        config=scenario.raw,
    )


def run_scenario(scenario: Scenario, out_dir=None, plots: bool = True) -> RunRecord:
    """Simulate, evaluate the scenario's checks and (optionally) write the run directory.

    A :class:`NumericalFailure` is re-raised after the partial run record
    (with the failing time) has been written.
    """
    try:
        records, fields, runtime = simulate(scenario)
    except NumericalFailure as exc:
        rec = _record(scenario, [], [], [], 0.0, failure=str(exc), failure_time=exc.time)
        if out_dir is not None:
            Path(out_dir).mkdir(parents=True, exist_ok=True)
            rec.save(Path(out_dir) / "run.json")
        raise
    ctx = RunContext(scenario, records, fields, runtime)
    verdicts = [evaluate(ctx, spec) for spec in scenario.checks]
    stored = []
    if out_dir is not None:
        out = Path(out_dir)
        (out / "fields").mkdir(parents=True, exist_ok=True)
        keep = set(scenario.store_fields)
        for i, f in enumerate(fields):
            if any(abs(f.time - t) <= 1e-12 * max(1.0, abs(t)) for t in keep):
                stem = f"fields/field_{i:04d}"
                write_field(f, out / stem)
                stored.append(stem)
    rec = _record(scenario, records, stored, verdicts, runtime)
    if out_dir is not None:
        write_report(rec, out_dir, ("json", "csv", "plot-data"), plots=plots)
    return rec


def write_report(rec: RunRecord, out_dir, formats: Sequence[str], plots: bool = True) -> List[Path]:
    """Write ``run.json``, ``diagnostics.csv`` and/or plot-data files (plus PNGs)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for fmt in formats:
        if fmt == "json":
            p = out / "run.json"
            rec.save(p)
            written.append(p)
        elif fmt == "csv":
            p = out / "diagnostics.csv"
            write_csv(rec.records, p)
            written.append(p)
        elif fmt == "plot-data":
            written += plotting.write_plot_data(rec, out / "plots")
            if plots:
                written += plotting.render(rec, out / "plots")
        else:
            raise ValueError(f"unknown report format {fmt!r}")
    return written


# ---------------------------------------------------------------------------
# suites


def suite_names() -> List[str]:
    return sorted(builtin_suites())


def max_workers(n_jobs: int) -> int:
    env = os.environ.get("DYSON_LAB_THREADS")
    if env:
        try:
            cap = max(1, int(env))
        except ValueError as exc:
            raise ConfigError(f"DYSON_LAB_THREADS must be an integer, got {env!r}") from exc
    else:
        cap = os.cpu_count() or 1
    return max(1, min(cap, n_jobs))


def _run_one(raw: dict, out_dir: Optional[str], plots: bool) -> RunRecord:
    scenario = build(raw)
    target = None if out_dir is None else Path(out_dir) / scenario.name
    try:
        return run_scenario(scenario, target, plots=plots)
    except NumericalFailure as exc:
        v = Verdict("numerical_failure", None, False, exc.time, None, str(exc), scenario.name)
        return _record(scenario, [], [], [v], 0.0, failure=str(exc), failure_time=exc.time)


def _resolve_suite(selector: Optional[str]) -> List[dict]:
    suites = builtin_suites()
    if not selector:
        selector = "full"
    if selector in suites:
        return [builtin_raw(n) for n in suites[selector]]
    # a single built-in scenario name is accepted as a one-element suite
    try:
        return [builtin_raw(selector)]
    except ConfigError:
        raise ConfigError(f"unknown suite {selector!r}; known suites: {sorted(suites)}") from None


def verify(selector: Optional[str] = None, out_dir=None, plots: bool = False,
           raws: Optional[List[dict]] = None) -> Tuple[List[RunRecord], int]:
    """Run a suite; returns the run records and the exit status."""
    raws = raws if raws is not None else _resolve_suite(selector)
    for raw in raws:
        build(raw)  # configuration errors surface before any compute
    workers = max_workers(len(raws))
    out = None if out_dir is None else str(out_dir)
    if workers == 1:
        results = [_run_one(r, out, plots) for r in raws]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_one, raws, [out] * len(raws), [plots] * len(raws)))
    if out_dir is not None:
        Path(out_dir).mkdir(parents=True, exist_ok=True)
        verdicts = [asdict(v) for r in results for v in r.verdicts]
        Path(out_dir, "verdicts.json").write_text(json.dumps(verdicts, indent=1))
    if any(r.failure for r in results):
        status = EXIT_NUMERICAL
    elif all(r.passed for r in results):
        status = EXIT_OK
    else:
        status = EXIT_CHECK_FAILED
    return results, status


def format_table(results: Sequence[RunRecord]) -> str:
    lines = ["status crit  scenario             check                  values"]
    for r in results:
        for v in r.verdicts:
            lines.append(v.line())
    n = sum(len(r.verdicts) for r in results)
    bad = sum(not v.passed for r in results for v in r.verdicts)
    lines.append(f"{n - bad}/{n} checks passed")
    return "\n".join(lines)
