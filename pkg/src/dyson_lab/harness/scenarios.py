"""Scenario definitions: domain, initial data, solver settings, schedule, checks.

A scenario is a plain nested mapping (one TOML file per scenario). The
mapping is the single source of truth: :func:`config_hash` hashes its
canonical JSON form and :func:`build` turns it into solver objects.
"""
from __future__ import annotations

import copy
import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np
import tomli

from ..evolution import DriftSpec, SolverConfig
from ..oracle import Atom, InitialMeasure, Semicircle, UniformPiece, periodic_poisson_kernel, semicircle_density
from ..spectral import DensityField, Domain, DomainKind

__all__ = [
    "ConfigError",
    "Scenario",
    "load_scenario",
    "load_suite",
    "builtin_scenarios",
    "builtin_suites",
    "config_hash",
]

DEFAULT_SEED = 20240917


class ConfigError(ValueError):
    """Malformed or inconsistent scenario configuration."""


@dataclass
class Scenario:
    name: str
    domain: Domain
    initial: dict
    mollifier_width: float
    solver: SolverConfig
    schedule: List[float]
    store_fields: List[float]
    checks: List[dict]
    holder: bool = True
    seed: int = DEFAULT_SEED
    raw: Dict[str, Any] = field(default_factory=dict, repr=False)

    @property
    def config_hash(self) -> str:
        return config_hash(self.raw)

    def initial_field(self) -> DensityField:
        return initial_field(self.domain, self.initial, self.mollifier_width)

    def initial_measure(self) -> Optional[InitialMeasure]:
        """Symbolic measure (mollified), when the initial data has one."""
        return initial_measure(self.initial, self.mollifier_width)

    def with_overrides(self, **changes) -> "Scenario":
        """Rebuild from a modified copy of the raw mapping (dotted keys)."""
        raw = copy.deepcopy(self.raw)
        for dotted, value in changes.items():
            node = raw
            *path, leaf = dotted.split(".")
            for key in path:
                node = node.setdefault(key, {})
            node[leaf] = value
        return build(raw, validate_checks=False)


def config_hash(raw: dict) -> str:
    blob = json.dumps(raw, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


# ---------------------------------------------------------------------------
# initial data


def _component(spec: dict):
    kind = spec.get("type")
    w = float(spec.get("weight", 1.0))
    if kind == "atom":
        return Atom(float(spec["location"]), w, float(spec.get("width", 0.0)))
    if kind == "uniform":
        return UniformPiece(float(spec["a"]), float(spec["b"]), w)
    if kind == "semicircle":
        return Semicircle(float(spec.get("center", 0.0)), float(spec["time_parameter"]), w)
    raise ConfigError(f"unknown measure component type {kind!r}")


def initial_measure(initial: dict, mollifier_width: float) -> Optional[InitialMeasure]:
    kind = initial.get("type")
    if kind == "measure":
        try:
            m = InitialMeasure(tuple(_component(c) for c in initial.get("components", [])))
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        return m.mollified(mollifier_width)
    if kind == "semicircle":
        return InitialMeasure.of(Semicircle(0.0, float(initial["time"]), 1.0))
    return None


def _sample_component(c, domain: Domain) -> np.ndarray:
    x = domain.grid
    if isinstance(c, Atom):
        if c.width <= 0:
            raise ConfigError("atoms must be mollified before sampling (set mollifier_width > 0)")
        # the periodised kernel matches the periodic transport of the grid
        return c.weight * periodic_poisson_kernel(c.width, x - c.location, domain.half_width)
    return c.density(x)


def initial_field(domain: Domain, initial: dict, mollifier_width: float) -> DensityField:
    """Sample the initial density and rescale it to unit grid mass."""
    kind = initial.get("type")
    x = domain.grid
    t0 = float(initial.get("start_time", 0.0))
    if kind == "semicircle":
        t0 = float(initial.get("start_time", initial["time"]))
        values = semicircle_density(float(initial["time"]), x)
    elif kind == "measure":
        m = initial_measure(initial, mollifier_width)
        values = sum(_sample_component(c, domain) for c in m.components)
    elif kind == "uniform":
        values = np.full(domain.n_points, 1.0 / domain.circumference)
    elif kind == "cosine":
        if not domain.is_torus:
            raise ConfigError("the cosine preset lives on the torus")
        amp = float(initial.get("amplitude", 0.5))
        mode = int(initial.get("mode", 1))
        if abs(amp) >= 1:
            raise ConfigError("cosine amplitude must be below 1 for a positive density")
        values = (1.0 + amp * np.cos(mode * x)) / (2.0 * math.pi)
    else:
        raise ConfigError(f"unknown initial data type {kind!r}")
    values = np.asarray(values, dtype=float)
    mass = values.sum() * domain.dx
    if not mass > 0:
        raise ConfigError("initial data has no mass on the grid")
    return DensityField(domain, values / mass, t0)


# ---------------------------------------------------------------------------
# drift


def _drift(spec: Optional[dict], domain: Domain) -> DriftSpec:
    if not spec or spec.get("expression", "none") == "none":
        return DriftSpec.none()
    expr = spec["expression"]
    x = domain.grid
    amp = float(spec.get("amplitude", 1.0))
    mode = int(spec.get("mode", 1))
    if expr == "sin":
        b, db = amp * np.sin(mode * x), amp * mode * np.cos(mode * x)
    elif expr == "cos":
        b, db = amp * np.cos(mode * x), -amp * mode * np.sin(mode * x)
    else:
        raise ConfigError(f"unknown drift expression {expr!r}")
    if not domain.is_torus:
        raise ConfigError("sampled trigonometric drifts are only defined on the torus")
    return DriftSpec.sampled(b, domain, db, float(spec.get("lipschitz_bound", 0.0)))


# ---------------------------------------------------------------------------
# schedule


def _schedule(spec: dict, t_start: float, t_end: float) -> List[float]:
    kind = spec.get("kind", "linear")
    if kind == "linear":
        count = int(spec.get("count", 11))
        times = np.linspace(float(spec.get("start", t_start)), float(spec.get("stop", t_end)), count)
    elif kind == "geometric":
        first = float(spec["first"])
        count = int(spec.get("count", 100))
        times = t_start + np.geomspace(first, float(spec.get("stop", t_end)) - t_start, count)
        if spec.get("include_start", True):
            times = np.concatenate([[t_start], times])
    elif kind == "list":
        times = np.asarray(spec["times"], dtype=float)
    else:
        raise ConfigError(f"unknown schedule kind {kind!r}")
    extra = np.asarray(spec.get("extra", []), dtype=float)
    times = np.unique(np.concatenate([times, extra]))
    if times.size == 0 or times[0] < t_start - 1e-12 or times[-1] > t_end + 1e-12:
        raise ConfigError(f"schedule must lie in [{t_start}, {t_end}]")
    return [float(t) for t in times]


# ---------------------------------------------------------------------------
# building


def build(raw: dict, validate_checks: bool = True) -> Scenario:
    try:
        name = str(raw["name"])
        dspec = raw["domain"]
        kind = DomainKind(dspec["kind"])
        domain = Domain(kind, int(dspec["n_points"]), float(dspec.get("half_width", math.pi)))
        initial = dict(raw["initial"])
        mollifier = float(raw.get("mollifier_width", 0.0))
        sspec = dict(raw.get("solver", {}))
        u0 = initial_field(domain, initial, mollifier)
        t_end = float(sspec.get("t_end", u0.time))
        sched = _schedule(dict(raw.get("schedule", {})), u0.time, t_end)
        solver = SolverConfig(
            epsilon=float(sspec.get("epsilon", 1e-4)),
            t_end=t_end,
            output_times=sched,
            cfl_number=float(sspec.get("cfl_number", 0.4)),
            dealias=bool(sspec.get("dealias", True)),
            tol_neg=float(sspec.get("tol_neg", 1e-6)),
            tol_mass=float(sspec.get("tol_mass", 1e-10)),
            drift=_drift(sspec.get("drift"), domain),
            dt_max=float(sspec.get("dt_max", 0.1)),
        )
    except ConfigError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid scenario: {exc!r}") from exc

    measure = initial_measure(initial, 0.0)
    if measure is not None and measure.has_atoms and mollifier <= 0:
        raise ConfigError("mollifier_width must be positive when the initial measure has atoms")

    store = raw.get("store_fields", "all")
    if store == "all":
        store_times = list(sched)
    elif store == "none":
        store_times = []
    else:
        store_times = [float(t) for t in store]

    checks = [dict(c) for c in raw.get("checks", [])]
    if validate_checks:
        from .checks import REGISTRY

        for c in checks:
            if c.get("name") not in REGISTRY:
                raise ConfigError(f"unknown check {c.get('name')!r}; known: {sorted(REGISTRY)}")
    return Scenario(
        name=name,
        domain=domain,
        initial=initial,
        mollifier_width=mollifier,
        solver=solver,
        schedule=sched,
        store_fields=store_times,
        checks=checks,
        holder=bool(raw.get("diagnostics", {}).get("holder", True)),
        seed=int(raw.get("seed", DEFAULT_SEED)),
        raw=copy.deepcopy(raw),
    )


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        with path.open("rb") as fh:
            raw = tomli.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return build(raw)


def load_suite(path) -> List[Scenario]:
    """A suite file lists scenario files (relative to itself) under ``scenarios``."""
    path = Path(path)
    try:
        with path.open("rb") as fh:
            raw = tomli.load(fh)
    except (OSError, tomli.TOMLDecodeError) as exc:
        raise ConfigError(f"cannot read suite {path}: {exc}") from exc
    return [load_scenario(path.parent / p) for p in raw.get("scenarios", [])]


# ---------------------------------------------------------------------------
# built-in scenarios


def _builtin_raw() -> Dict[str, dict]:
    two_atoms = {
        "type": "measure",
        "components": [
            {"type": "atom", "location": -1.0, "weight": 0.5},
            {"type": "atom", "location": 1.0, "weight": 0.5},
        ],
    }
    return {
        "operators": {
            "name": "operators",
            "domain": {"kind": "torus", "n_points": 256},
            "initial": {"type": "uniform"},
            "solver": {"t_end": 0.0},
            "schedule": {"kind": "list", "times": [0.0]},
            "checks": [{"name": "operator_identities", "tolerance": 1e-12, "cotlar_tolerance": 1e-10, "trials": 100}],
        },
        "pv-crosscheck": {
            "name": "pv-crosscheck",
            "domain": {"kind": "line", "n_points": 2048, "half_width": 16.0},
            "initial": {"type": "measure", "components": [{"type": "atom", "location": 0.0, "weight": 1.0}]},
            "mollifier_width": 0.5,
            "solver": {"t_end": 0.0},
            "schedule": {"kind": "list", "times": [0.0]},
            "checks": [{"name": "pv_crosscheck", "tolerance": 1e-6, "width": 0.5}],
        },
        "uniform-torus": {
            "name": "uniform-torus",
            "domain": {"kind": "torus", "n_points": 256},
            "initial": {"type": "uniform"},
            "solver": {"epsilon": 1e-5, "t_end": 5.0},
            "schedule": {"kind": "linear", "count": 11},
            "checks": [
                {"name": "uniform_stationary", "tolerance": 1e-13},
                {"name": "hhalf_monotone", "slack": 1e-8},
                {"name": "level_set_bound", "eps_primes": [0.01, 0.05, 0.1]},
            ],
        },
        "semicircle-selfsim": {
            "name": "semicircle-selfsim",
            "domain": {"kind": "line", "n_points": 2048, "half_width": 8.0},
            "initial": {"type": "semicircle", "time": 0.25},
            "solver": {"epsilon": 1e-4, "t_end": 1.0, "tol_neg": 1e-2},
            "schedule": {"kind": "linear", "count": 16},
            "checks": [
                {"name": "semicircle_selfsim", "l1_tolerance": 2e-2, "linf_tolerance": 2e-2, "max_runtime": 60.0},
                {"name": "hhalf_monotone", "slack": 1e-8},
            ],
        },
        "semicircle-viscous": {
            "name": "semicircle-viscous",
            "domain": {"kind": "line", "n_points": 2048, "half_width": 8.0},
            "initial": {"type": "semicircle", "time": 0.25},
            "solver": {"epsilon": 1e-3, "t_end": 1.0, "tol_neg": 1e-2},
            "schedule": {"kind": "linear", "count": 151},
            "diagnostics": {"holder": False},
            "checks": [
                {"name": "entropy_balance", "tolerance": 1e-2},
                {"name": "hhalf_balance", "tolerance": 1e-2, "sign_tolerance": 1e-10},
                {"name": "hhalf_monotone", "slack": 1e-8},
                {"name": "second_moment_slope", "tolerance": 1e-2},
                {"name": "power_balance", "tolerance": 2e-2},
            ],
        },
        "mollified-atom": {
            "name": "mollified-atom",
            "domain": {"kind": "line", "n_points": 4096, "half_width": 8.0},
            "initial": {"type": "measure", "components": [{"type": "atom", "location": 0.0, "weight": 1.0}]},
            "mollifier_width": 0.02,
            "solver": {"epsilon": 1e-3, "t_end": 1.0},
            "schedule": {"kind": "geometric", "first": 1e-5, "count": 400, "extra": [0.5, 0.75]},
            "store_fields": [0.0, 0.5, 1.0],
            "diagnostics": {"holder": False},
            "checks": [
                {"name": "linf_regularization", "lower": 0.95, "upper": 1.05, "t_from": 0.5, "t_to": 1.0},
                {"name": "entropy_balance", "tolerance": 1e-2},
                {"name": "hhalf_balance", "tolerance": 1e-2, "sign_tolerance": 1e-10},
                {"name": "hhalf_monotone", "slack": 1e-8},
            ],
        },
        "two-atoms": {
            "name": "two-atoms",
            "domain": {"kind": "line", "n_points": 4096, "half_width": 8.0},
            "initial": two_atoms,
            "mollifier_width": 0.02,
            "solver": {"epsilon": 1e-4, "t_end": 1.0},
            "schedule": {"kind": "linear", "start": 0.1, "stop": 1.0, "count": 91, "extra": [0.0]},
            "checks": [
                {"name": "oracle_equivalence", "tolerance": 3e-2, "time": 0.5, "max_runtime": 300.0},
                {"name": "holder_control", "tolerance": 0.1, "t_from": 0.1, "t_to": 1.0, "compare_n_points": 2048},
                {"name": "hhalf_monotone", "slack": 1e-8},
            ],
        },
        "periodic-relaxation": {
            "name": "periodic-relaxation",
            "domain": {"kind": "torus", "n_points": 512},
            "initial": {"type": "cosine", "amplitude": 0.9, "mode": 1},
            "solver": {"epsilon": 1e-5, "t_end": 60.0},
            "schedule": {"kind": "linear", "count": 121},
            "store_fields": "none",
            "checks": [
                {"name": "periodic_long_time", "tolerance": 1e-3, "eps_primes": [0.01, 0.05, 0.1]},
                {"name": "hhalf_monotone", "slack": 1e-8},
            ],
        },
        "drift-torus": {
            "name": "drift-torus",
            "domain": {"kind": "torus", "n_points": 256},
            "initial": {"type": "cosine", "amplitude": 0.5, "mode": 1},
            "solver": {"epsilon": 1e-4, "t_end": 2.0, "drift": {"expression": "sin", "lipschitz_bound": 1.0}},
            "schedule": {"kind": "linear", "count": 201},
            "diagnostics": {"holder": False},
            "checks": [
                {
                    "name": "drift_suite",
                    "tolerance": 1e-2,
                    "trials": 100,
                    "stability": 0.1,
                    "n_points": [256, 512],
                    "band": 8,
                }
            ],
        },
    }


def builtin_scenarios() -> Dict[str, Scenario]:
    return {name: build(raw) for name, raw in _builtin_raw().items()}


def builtin_raw(name: str) -> dict:
    raws = _builtin_raw()
    if name not in raws:
        raise ConfigError(f"unknown built-in scenario {name!r}; known: {sorted(raws)}")
    return raws[name]


def builtin_suites() -> Dict[str, List[str]]:
    full = [
        "operators",
        "pv-crosscheck",
        "uniform-torus",
        "semicircle-selfsim",
        "semicircle-viscous",
        "mollified-atom",
        "two-atoms",
        "periodic-relaxation",
        "drift-torus",
    ]
    return {
        "full": full,
        "operators": ["operators"],
        "oracle": ["pv-crosscheck", "semicircle-selfsim", "two-atoms"],
        "line": ["semicircle-selfsim", "semicircle-viscous", "mollified-atom", "two-atoms"],
        "torus": ["uniform-torus", "periodic-relaxation", "drift-torus"],
    }
