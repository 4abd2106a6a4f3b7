"""Named acceptance checks.

Every numbered acceptance criterion maps to exactly one entry of
:data:`REGISTRY`; a few extra checks (``power_balance``,
``uniform_stationary``) carry ``criterion=None``. A check receives the
completed :class:`RunContext` and its parameter table from the scenario and
returns a :class:`~dyson_lab.harness.records.Verdict`.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional

import numpy as np

from .. import diagnostics as dg
from .. import oracle, spectral
from ..evolution import DriftSpec
from ..spectral import DensityField, Domain
from .records import Verdict

__all__ = ["RunContext", "Check", "REGISTRY", "evaluate", "make_rng"]


@dataclass
class RunContext:
    scenario: "object"
    records: List[dg.DiagnosticsRecord]
    fields: List[DensityField]
    runtime_s: float

    @property
    def domain(self) -> Domain:
        return self.scenario.domain

    @property
    def epsilon(self) -> float:
        return self.scenario.solver.epsilon

    @property
    def drift(self) -> DriftSpec:
        return self.scenario.solver.drift

    def field_at(self, t: float) -> DensityField:
        for f in self.fields:
            if abs(f.time - t) <= 1e-12 * max(1.0, abs(t)):
                return f
        raise KeyError(f"no field recorded at t={t}")


@dataclass(frozen=True)
class Check:
    name: str
    criterion: Optional[int]
    func: Callable[[RunContext, dict], Verdict]


REGISTRY: Dict[str, Check] = {}


def _register(name: str, criterion: Optional[int]):
    def deco(func):
        REGISTRY[name] = Check(name, criterion, func)
        return func

    return deco


def make_rng(seed: int) -> np.random.Generator:
    """Counter-based 64-bit generator used for every random trial."""
    return np.random.Generator(np.random.Philox(seed))


def evaluate(ctx: RunContext, spec: dict) -> Verdict:
    check = REGISTRY[spec["name"]]
    params = {k: v for k, v in spec.items() if k != "name"}
    v = check.func(ctx, params)
    v.name = check.name
    v.criterion = check.criterion
    v.scenario = ctx.scenario.name
    return v


def _verdict(passed, measured, tolerance, detail="") -> Verdict:
    return Verdict("", None, bool(passed), None if measured is None else float(measured),
                   None if tolerance is None else float(tolerance), detail)


def _rel(a, b) -> float:
    scale = float(np.max(np.abs(b)))
    return float(np.max(np.abs(a - b))) / (scale if scale > 0 else 1.0)


# ---------------------------------------------------------------------------
# 1. operator identities


def _random_band(rng, n: int, band: int, zero_mean: bool = True) -> np.ndarray:
    c = np.zeros(n // 2 + 1, dtype=complex)
    c[1 : band + 1] = rng.standard_normal(band) + 1j * rng.standard_normal(band)
    if not zero_mean:
        c[0] = rng.standard_normal()
    return np.fft.irfft(c, n=n) * n


def operator_residuals(domain: Domain, rng, trials: int) -> dict:
    """Worst relative residual of each operator identity over random fields."""
    n = domain.n_points
    band = n // 3
    fine = Domain.torus(2 * n) if domain.is_torus else Domain.line(2 * n, domain.half_width)
    worst = dict.fromkeys(["hh", "antisym", "isometry", "lam_dh", "lam_hd", "cotlar"], 0.0)
    for _ in range(trials):
        f = _random_band(rng, n, band)
        g = _random_band(rng, n, band)
        hf = spectral.hilbert_transform(f, domain)
        worst["hh"] = max(worst["hh"], _rel(spectral.hilbert_transform(hf, domain), -f))
        a = spectral.quadrature(f * spectral.hilbert_transform(g, domain), domain)
        b = spectral.quadrature(g * hf, domain)
        worst["antisym"] = max(worst["antisym"], abs(a + b) / max(abs(a), abs(b), 1e-300))
        nf = spectral.quadrature(f * f, domain)
        worst["isometry"] = max(worst["isometry"], abs(spectral.quadrature(hf * hf, domain) - nf) / nf)
        lam = spectral.fractional_laplacian(f, 1.0, domain)
        worst["lam_dh"] = max(worst["lam_dh"], _rel(spectral.derivative(hf, domain), lam))
        worst["lam_hd"] = max(worst["lam_hd"], _rel(spectral.hilbert_transform(spectral.derivative(f, domain), domain), lam))
        # products of |k| <= N/3 fields are resolved exactly on the doubled grid
        ff = np.fft.irfft(spectral._pad(np.fft.rfft(f), n, 2 * n), n=2 * n)
        hff = spectral.hilbert_transform(ff, fine)
        lhs = hff * hff - ff * ff
        rhs = 2.0 * spectral.hilbert_transform(ff * hff, fine)
        worst["cotlar"] = max(worst["cotlar"], _rel(rhs, lhs))
    return worst


@_register("operator_identities", 1)
def _operator_identities(ctx: RunContext, p: dict) -> Verdict:
    tol = float(p.get("tolerance", 1e-12))
    ctol = float(p.get("cotlar_tolerance", 1e-10))
    budget = float(p.get("max_runtime", 5.0))
    start = time.perf_counter()
    worst = operator_residuals(ctx.domain, make_rng(ctx.scenario.seed), int(p.get("trials", 100)))
    elapsed = time.perf_counter() - start
    linear = max(v for k, v in worst.items() if k != "cotlar")
    ok = linear <= tol and worst["cotlar"] <= ctol and elapsed < budget
    detail = " ".join(f"{k}={v:.2e}" for k, v in worst.items()) + f" cotlar_tol={ctol:g} runtime={elapsed:.2f}s"
    return _verdict(ok, linear, tol, detail)


# ---------------------------------------------------------------------------
# 2. principal-value cross-check


@_register("pv_crosscheck", 2)
def _pv_crosscheck(ctx: RunContext, p: dict) -> Verdict:
    tol = float(p.get("tolerance", 1e-6))
    u = ctx.fields[0]
    d = u.domain
    spec_h = spectral.hilbert_transform(u.values, d)
    pv = oracle.hilbert_pv_quadrature(u.values, d, kernel="periodic")
    err = float(np.max(np.abs(spec_h - pv)))
    detail = f"periodic-kernel PV sum vs spectral; N={d.n_points} L={d.half_width:g}"
    if "width" in p and not d.is_torus:
        a = float(p["width"])
        closed = oracle.periodic_poisson_conjugate(a, d.grid, d.half_width)
        line = oracle.poisson_conjugate(a, d.grid)
        detail += (
            f"; vs periodised closed form {np.max(np.abs(spec_h - closed)):.2e}"
            f"; vs real-line conjugate kernel {np.max(np.abs(spec_h - line)):.2e} (periodisation, informational)"
        )
    return _verdict(err <= tol, err, tol, detail)


# ---------------------------------------------------------------------------
# 3. self-similar semicircle


@_register("semicircle_selfsim", 3)
def _semicircle_selfsim(ctx: RunContext, p: dict) -> Verdict:
    l1_tol = float(p.get("l1_tolerance", 2e-2))
    linf_tol = float(p.get("linf_tolerance", 2e-2))
    budget = float(p.get("max_runtime", 60.0))
    u = ctx.fields[-1]
    d = u.domain
    exact = oracle.semicircle_density(u.time, d.grid)
    l1 = float(np.sum(np.abs(u.values - exact)) / np.sum(np.abs(exact)))
    peak = 1.0 / math.sqrt(math.pi * u.time)
    linf_dev = abs(float(u.values.max()) - peak) / peak
    ok = l1 <= l1_tol and linf_dev <= linf_tol and ctx.runtime_s < budget
    detail = (
        f"t={u.time:g} max={u.values.max():.6f} vs {peak:.6f} (rel {linf_dev:.2e}, tol {linf_tol:g}); "
        f"runtime={ctx.runtime_s:.1f}s (limit {budget:g}s)"
    )
    return _verdict(ok, l1, l1_tol, detail)


# ---------------------------------------------------------------------------
# 4. L-infinity regularization


@_register("linf_regularization", 4)
def _linf_regularization(ctx: RunContext, p: dict) -> Verdict:
    lo, hi = float(p.get("lower", 0.95)), float(p.get("upper", 1.05))
    t0, t1 = float(p.get("t_from", 0.5)), float(p.get("t_to", 1.0))
    vals = [(r.time, math.sqrt(math.pi * r.time) * r.linf) for r in ctx.records if t0 - 1e-12 <= r.time <= t1 + 1e-12]
    if not vals:
        return _verdict(False, None, None, "no records in the window")
    s = np.array([v for _, v in vals])
    worst = float(np.max(np.abs(s - 1.0)))
    ok = bool(np.all((s >= lo) & (s <= hi)))
    return _verdict(ok, worst, max(1 - lo, hi - 1),
                    f"sqrt(pi t)*max u in [{s.min():.4f}, {s.max():.4f}] over {len(s)} records")


# ---------------------------------------------------------------------------
# 5, 6. balances


def _worst_interval(reports) -> str:
    worst = max(reports, key=lambda r: r.relative_residual)
    return f"worst interval [{worst.interval[0]:.3g}, {worst.interval[1]:.3g}] rel {worst.relative_residual:.2e}"


@_register("entropy_balance", 5)
def _entropy_balance(ctx: RunContext, p: dict) -> Verdict:
    tol = float(p.get("tolerance", 1e-2))
    src = [dg.entropy_drift_source(f, ctx.drift) for f in ctx.fields] if ctx.drift.active else None
    reps = dg.entropy_balance(ctx.records, ctx.epsilon, src)
    tot = dg.cumulative(reps)
    floor = any(r.floor_activated for r in ctx.records)
    detail = f"span residual {tot.residual:.3e} of {abs(tot.dissipation_integral):.4g}; {_worst_interval(reps)}; floor_activated={floor}"
    return _verdict(tot.relative_residual <= tol, tot.relative_residual, tol, detail)


def _sign_violation(records) -> float:
    worst = 0.0
    for r in records:
        for v in ((2.0 / 9.0) * r.h1_power_sq, 0.5 * r.triple_term, r.h32_sq):
            worst = min(worst, v)
    return worst


@_register("hhalf_balance", 6)
def _hhalf_balance(ctx: RunContext, p: dict) -> Verdict:
    tol = float(p.get("tolerance", 1e-2))
    sign_tol = float(p.get("sign_tolerance", 1e-10))
    reps = dg.hhalf_balance(ctx.records, ctx.epsilon)
    tot = dg.cumulative(reps)
    worst_sign = _sign_violation(ctx.records)
    ok = tot.relative_residual <= tol and worst_sign >= -sign_tol
    detail = f"{_worst_interval(reps)}; most negative dissipation term {worst_sign:.2e} (floor -{sign_tol:g})"
    return _verdict(ok, tot.relative_residual, tol, detail)


@_register("power_balance", None)
def _power_balance(ctx: RunContext, p: dict) -> Verdict:
    tol = float(p.get("tolerance", 2e-2))
    reps, signs = dg.power_balance(ctx.records, ctx.fields, ctx.epsilon)
    tot = dg.cumulative(reps)
    detail = f"{_worst_interval(reps)}; cross-term signs +{signs.count(1)}/-{signs.count(-1)}"
    return _verdict(tot.relative_residual <= tol, tot.relative_residual, tol, detail)


# ---------------------------------------------------------------------------
# 7. monotonicity


@_register("hhalf_monotone", 7)
def _hhalf_monotone(ctx: RunContext, p: dict) -> Verdict:
    slack = float(p.get("slack", 1e-8))
    if ctx.drift.active:
        return _verdict(False, None, slack, "monotonicity only applies without drift")
    ok, worst = dg.hhalf_monotone(ctx.records, slack)
    h0 = ctx.records[0].hhalf_sq
    rel = worst / h0 if h0 else worst
    return _verdict(ok, rel, slack, f"largest increase {worst:.3e} relative to initial {h0:.4g}")


# ---------------------------------------------------------------------------
# 8. second moment


@_register("second_moment_slope", 8)
def _second_moment(ctx: RunContext, p: dict) -> Verdict:
    tol = float(p.get("tolerance", 1e-2))
    law = dg.second_moment_law(ctx.records, ctx.epsilon)
    detail = (
        f"slope {law['slope']:.6f} vs 1/pi+2eps={law['predicted']:.6f}; "
        f"vs 1+2eps={law['predicted_unnormalised']:.6f} deviation {law['relative_deviation_unnormalised']:.3f}"
    )
    return _verdict(law["relative_deviation"] <= tol, law["relative_deviation"], tol, detail)


# ---------------------------------------------------------------------------
# 9. oracle equivalence


@_register("oracle_equivalence", 9)
def _oracle_equivalence(ctx: RunContext, p: dict) -> Verdict:
    tol = float(p.get("tolerance", 3e-2))
    t = float(p.get("time", 0.5))
    budget = float(p.get("max_runtime", 300.0))
    measure = ctx.scenario.initial_measure()
    if measure is None:
        return _verdict(False, None, tol, "scenario has no symbolic initial measure")
    u = ctx.field_at(t)
    d = u.domain
    start = time.perf_counter()
    res = oracle.evolve_characteristics(measure, t, d.grid)
    elapsed = time.perf_counter() - start
    l1 = float(np.sum(np.abs(u.values - res.density)) * d.dx)
    total = ctx.runtime_s + elapsed
    ok = l1 <= tol and res.ok and total < budget
    detail = (
        f"oracle mass {np.sum(res.density) * d.dx:.5f}, failed points {int(res.failed.sum())}, "
        f"runtime {total:.1f}s (limit {budget:g}s)"
    )
    return _verdict(ok, l1, tol, detail)


# ---------------------------------------------------------------------------
# 10. Hoelder control


@_register("holder_control", 10)
def _holder_control(ctx: RunContext, p: dict) -> Verdict:
    from .runner import simulate

    tol = float(p.get("tolerance", 0.1))
    t0, t1 = float(p.get("t_from", 0.1)), float(p.get("t_to", 1.0))
    fine = dg.holder_cubed_integral(ctx.records, t0, t1)
    coarse_n = int(p.get("compare_n_points", ctx.domain.n_points // 2))
    coarse_sc = ctx.scenario.with_overrides(**{"domain.n_points": coarse_n, "checks": []})
    coarse_records, _, _ = simulate(coarse_sc, keep_fields=False)
    coarse = dg.holder_cubed_integral(coarse_records, t0, t1)
    rel = abs(fine - coarse) / abs(fine)
    margins = []
    tol_neg = ctx.scenario.solver.tol_neg
    for f in ctx.fields:
        holds, margin, _, _ = dg.holder_lemma_check(f, tol_neg=tol_neg)
        margins.append((holds, margin))
    lemma_ok = all(h for h, _ in margins)
    ok = math.isfinite(fine) and rel <= tol and lemma_ok
    detail = (
        f"integral {fine:.6g} (N={ctx.domain.n_points}) vs {coarse:.6g} (N={coarse_n}); "
        f"lemma holds on {sum(h for h, _ in margins)}/{len(margins)} fields, min margin {min(m for _, m in margins):.3g}"
    )
    return _verdict(ok, rel, tol, detail)


# ---------------------------------------------------------------------------
# 11. periodic long-time behaviour


@_register("periodic_long_time", 11)
def _periodic_long_time(ctx: RunContext, p: dict) -> Verdict:
    tol = float(p.get("tolerance", 1e-3))
    multiples = [float(e) for e in p.get("eps_primes", [0.01, 0.05, 0.1])]
    summary = dg.long_time_summary(ctx.records)
    level_fail = 0
    for f in ctx.fields:
        for m in multiples:
            holds, _, _ = dg.level_set_measure_check(f, m / (2.0 * math.pi))
            level_fail += not holds
    a = summary["final_max_excess"]
    c = summary["final_sup_deviation"]
    ok = a <= tol and summary["t1"] is not None and c <= tol and level_fail == 0
    detail = (
        f"(a) |M-1/2pi|={a:.2e} (b) t1={summary['t1']} (c) sup dev={c:.2e} "
        f"(d) level-set failures {level_fail}/{len(ctx.fields) * len(multiples)}; final t={summary['final_time']:g}"
    )
    return _verdict(ok, max(a, c), tol, detail)


@_register("level_set_bound", None)
def _level_set_bound(ctx: RunContext, p: dict) -> Verdict:
    multiples = [float(e) for e in p.get("eps_primes", [0.01, 0.05, 0.1])]
    fails = sum(
        not dg.level_set_measure_check(f, m / (2.0 * math.pi))[0] for f in ctx.fields for m in multiples
    )
    return _verdict(fails == 0, fails, 0, f"{len(ctx.fields) * len(multiples)} field/threshold pairs")


@_register("uniform_stationary", None)
def _uniform_stationary(ctx: RunContext, p: dict) -> Verdict:
    tol = float(p.get("tolerance", 1e-13))
    level = 1.0 / ctx.domain.circumference
    dev = max(float(np.max(np.abs(f.values - level))) for f in ctx.fields)
    return _verdict(dev <= tol, dev, tol, f"{len(ctx.fields)} fields")


# ---------------------------------------------------------------------------
# 12. drift suite


def kato_ponce_trials(n_points: int, drift_expr: str, trials: int, band: int, seed: int) -> np.ndarray:
    """Kato-Ponce ratios for the same random fields sampled on ``n_points``.

    The random Fourier modes are drawn independently of the grid size, so
    the fields (and their ratios) are comparable across resolutions.
    """
    d = Domain.torus(n_points)
    x = d.grid
    if drift_expr != "sin":
        raise ValueError("only the sine drift is wired into the trials")
    drift = DriftSpec.sampled(np.sin(x), d, np.cos(x), 1.0)
    rng = make_rng(seed)
    out = np.empty(trials)
    k = np.arange(1, band + 1)
    for i in range(trials):
        coef = (rng.standard_normal(band) + 1j * rng.standard_normal(band)) / k**2
        c = np.zeros(n_points // 2 + 1, dtype=complex)
        c[1 : band + 1] = coef
        u = 1.0 / (2 * math.pi) + np.fft.irfft(c, n=n_points) * n_points / (4 * math.pi * np.sum(np.abs(coef)))
        out[i] = dg.kato_ponce_ratio(u, drift, d)
    return out


@_register("drift_suite", 12)
def _drift_suite(ctx: RunContext, p: dict) -> Verdict:
    tol = float(p.get("tolerance", 1e-2))
    stability = float(p.get("stability", 0.1))
    drift = ctx.drift
    if not drift.active:
        return _verdict(False, None, tol, "scenario has no drift")
    env = dg.gronwall_envelope_check(ctx.records, drift.lipschitz_bound)
    env_fail = sum(not e[2] for e in env)
    src = [dg.hhalf_drift_source(f, drift) for f in ctx.fields]
    tot = dg.cumulative(dg.hhalf_balance(ctx.records, ctx.epsilon, src))
    ns = [int(n) for n in p.get("n_points", [256, 512])]
    trials, band = int(p.get("trials", 100)), int(p.get("band", 8))
    maxima = [float(np.max(kato_ponce_trials(n, "sin", trials, band, ctx.scenario.seed))) for n in ns]
    kp_rel = abs(maxima[0] - maxima[-1]) / abs(maxima[0])
    kp_ok = all(math.isfinite(m) for m in maxima) and kp_rel <= stability
    ok = env_fail == 0 and tot.relative_residual <= tol and kp_ok
    detail = (
        f"envelope failures {env_fail}/{len(env)}; Kato-Ponce max ratio "
        + ", ".join(f"{m:.6g} (N={n})" for m, n in zip(maxima, ns))
        + f" spread {kp_rel:.2e} (limit {stability:g})"
    )
    return _verdict(ok, tot.relative_residual, tol, detail)
