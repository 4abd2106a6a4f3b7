"""Functionals of a density and the balance laws they satisfy along the flow.

Every quantity is computed from grid samples with spectral operators.
Integrals of products of three or more fields are evaluated on a padded
grid so that they are exact for the trigonometric interpolant.
"""
from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, fields
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np

from . import spectral
from .evolution import DriftSpec
from .spectral import DensityField, Domain

__all__ = [
    "ENTROPY_FLOOR",
    "DiagnosticsRecord",
    "BalanceReport",
    "compute_record",
    "holder_seminorm",
    "holder_lemma_check",
    "entropy_balance",
    "hhalf_balance",
    "power_balance",
    "cumulative",
    "second_moment_law",
    "level_set_measure_check",
    "gronwall_envelope_check",
    "kato_ponce_ratio",
    "hhalf_drift_source",
    "entropy_drift_source",
    "power_cross_term",
    "power_viscous_term",
    "hhalf_monotone",
    "holder_cubed_integral",
    "long_time_summary",
]

log = logging.getLogger(__name__)

ENTROPY_FLOOR = 1e-14
EXHAUSTIVE_HOLDER_MAX_N = 4096
_BALANCE_FLOOR = 1e-14


@dataclass
class DiagnosticsRecord:
    time: float
    mass: float
    second_moment: Optional[float]
    entropy: float
    rel_entropy: Optional[float]
    fisher: float
    hhalf_sq: float
    h1_power_sq: float
    triple_term: float
    h32_sq: float
    linf: float
    min_u: float
    holder_13: Optional[float]
    holder_12_power: Optional[float]
    floor_activated: bool

    @classmethod
    def columns(cls) -> List[str]:
        return [f.name for f in fields(cls)]

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "DiagnosticsRecord":
        return cls(**{name: d.get(name) for name in cls.columns()})


@dataclass
class BalanceReport:
    interval: Tuple[float, float]
    lhs_decrement: float
    dissipation_integral: float
    residual: float
    relative_residual: float


# ---------------------------------------------------------------------------
# building blocks


def _integral_of_product(domain: Domain, *factors: np.ndarray) -> float:
    """Exact integral of the product of trigonometric interpolants."""
    n = domain.n_points
    p = len(factors)
    if p <= 2:
        prod = factors[0] if p == 1 else factors[0] * factors[1]
        return float(np.sum(prod) * domain.dx)
    m = int(math.ceil((p + 1) * n / 4.0)) * 2  # M > p N / 2
    prod = np.ones(m)
    for f in factors:
        prod = prod * np.fft.irfft(spectral._pad(np.fft.rfft(f), n, m), n=m)
    return float(np.mean(prod) * domain.circumference)


def _check_finite(u: np.ndarray) -> None:
    if not np.all(np.isfinite(u)):
        raise ValueError("non-finite values in field")


def holder_seminorm(u, alpha: float, domain: Domain | None = None, stride_budget: int = 256) -> float:
    """Grid lower bound of the C^alpha seminorm with periodic distance.

    All pairs are compared when ``N <= 4096``. Beyond that, every separation
    up to ``stride_budget`` cells is scanned plus a geometric ladder of
    larger separations (eight per octave) reaching ``N/2``; each scanned
    separation still compares every grid pair at that distance.
    """
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    values, domain = spectral._unpack(u, domain)
    n = domain.n_points
    half = n // 2
    if n <= EXHAUSTIVE_HOLDER_MAX_N:
        seps = np.arange(1, half + 1)
    else:
        ladder = np.unique(np.round(2.0 ** (np.arange(0, 8 * math.log2(half) + 1) / 8.0)).astype(int))
        seps = np.union1d(np.arange(1, min(stride_budget, half) + 1), ladder[ladder <= half])
        log.debug("holder: %d of %d separations scanned", seps.size, half)
    best = 0.0
    for s in seps:
        diff = float(np.max(np.abs(values - np.roll(values, -int(s)))))
        if diff:
            best = max(best, diff / (s * domain.dx) ** alpha)
    return best


def compute_record(u: DensityField, *, holder: bool = True, stride_budget: int = 256) -> DiagnosticsRecord:
    """Evaluate every monitored functional of ``u``."""
    d = u.domain
    v = u.values
    _check_finite(v)
    mass = spectral.quadrature(v, d)
    floored = np.maximum(v, ENTROPY_FLOOR)
    floor_activated = bool(np.any(v < ENTROPY_FLOOR))
    entropy = float(np.sum(v * np.log(floored)) * d.dx)

    if d.is_torus:
        m2 = rel = None
    else:
        x = d.grid
        m2 = float(np.sum(v * x * x) * d.dx)
        # int u log(u / gamma) with gamma the standard normal density
        rel = entropy + 0.5 * m2 + 0.5 * math.log(2 * math.pi) * mass

    ux = spectral.derivative(v, d)
    pos = v > ENTROPY_FLOOR
    fisher = float(np.sum(ux[pos] ** 2 / v[pos]) * d.dx)
    hhalf = spectral.sobolev_seminorm_sq(v, 0.5, d)
    lam = spectral.fractional_laplacian(v, 1.0, d)
    h1p = 2.25 * _integral_of_product(d, v, ux, ux)
    triple = _integral_of_product(d, lam, lam, v)
    h32 = spectral.sobolev_seminorm_sq(v, 1.5, d)

    if holder:
        h13 = holder_seminorm(v, 1.0 / 3.0, d, stride_budget)
        h12p = holder_seminorm(np.clip(v, 0.0, None) ** 1.5, 0.5, d, stride_budget)
    else:
        h13 = h12p = None

    return DiagnosticsRecord(
        time=float(u.time),
        mass=mass,
        second_moment=m2,
        entropy=entropy,
        rel_entropy=rel,
        fisher=fisher,
        hhalf_sq=hhalf,
        h1_power_sq=h1p,
        triple_term=triple,
        h32_sq=h32,
        linf=float(v.max()),
        min_u=float(v.min()),
        holder_13=h13,
        holder_12_power=h12p,
        floor_activated=floor_activated,
    )


def holder_lemma_check(u, domain: Domain | None = None, tol_neg: float = 1e-6, stride_budget: int = 256):
    """Check ``[u]_{1/3} <= [u^{3/2}]_{1/2}^{2/3}`` on the grid.

    Returns ``(holds, margin, lhs, rhs)`` with ``margin = rhs - lhs``. The
    constant is 1 because ``|a - b| <= |a^{3/2} - b^{3/2}|^{2/3}`` for
    ``a, b >= 0`` and both sides scan the same pairs.
    """
    values, domain = spectral._unpack(u, domain)
    if values.min() < -tol_neg:
        raise ValueError(f"field minimum {values.min():.3e} below -tol_neg")
    v = np.clip(values, 0.0, None)
    lhs = holder_seminorm(v, 1.0 / 3.0, domain, stride_budget)
    rhs = holder_seminorm(v**1.5, 0.5, domain, stride_budget) ** (2.0 / 3.0)
    margin = rhs - lhs
    return margin >= -1e-12 * max(rhs, 1.0), margin, lhs, rhs


# ---------------------------------------------------------------------------
# balances


def _times(records: Sequence[DiagnosticsRecord]) -> np.ndarray:
    if len(records) < 3:
        raise ValueError("a balance needs at least three records")
    t = np.array([r.time for r in records], dtype=float)
    if np.any(np.diff(t) <= 0):
        raise ValueError("records must have strictly increasing times")
    return t


def _balance(t, lhs_values, rate, lhs_scale=1.0) -> List[BalanceReport]:
    out = []
    for i in range(len(t) - 1):
        dec = lhs_scale * (lhs_values[i + 1] - lhs_values[i])
        diss = 0.5 * (rate[i] + rate[i + 1]) * (t[i + 1] - t[i])
        res = dec + diss
        rel = abs(res) / max(abs(dec), abs(diss), _BALANCE_FLOOR)
        out.append(BalanceReport((float(t[i]), float(t[i + 1])), float(dec), float(diss), float(res), float(rel)))
    return out


def cumulative(reports: Sequence[BalanceReport]) -> BalanceReport:
    """Merge consecutive interval reports into one over the whole span."""
    dec = sum(r.lhs_decrement for r in reports)
    diss = sum(r.dissipation_integral for r in reports)
    res = dec + diss
    rel = abs(res) / max(abs(dec), abs(diss), _BALANCE_FLOOR)
    return BalanceReport((reports[0].interval[0], reports[-1].interval[1]), dec, diss, res, rel)


def entropy_balance(records, epsilon: float, source: Optional[Sequence[float]] = None) -> List[BalanceReport]:
    """Residual of ``dE + int (|u|_{H^1/2}^2 + eps I(u)) dt = int source dt`` per interval.

    ``source`` holds the drift contribution ``-int u b_x`` at each record.
    """
    t = _times(records)
    e = np.array([r.entropy for r in records])
    rate = np.array([r.hhalf_sq + epsilon * r.fisher for r in records])
    if source is not None:
        rate = rate - np.asarray(source, dtype=float)
    return _balance(t, e, rate)


def hhalf_balance(records, epsilon: float, source: Optional[Sequence[float]] = None) -> List[BalanceReport]:
    """Residual of the half-derivative energy law per interval::

        1/2 d|u|_{H^1/2}^2 + 2/9 |u^{3/2}|_{H^1}^2 + 1/2 int (Lu)^2 u + eps |u|_{H^3/2}^2 = source
    """
    t = _times(records)
    h = np.array([r.hhalf_sq for r in records])
    rate = np.array(
        [(2.0 / 9.0) * r.h1_power_sq + 0.5 * r.triple_term + epsilon * r.h32_sq for r in records]
    )
    if source is not None:
        rate = rate - np.asarray(source, dtype=float)
    return _balance(t, h, rate, lhs_scale=0.5)


def power_cross_term(u: DensityField) -> float:
    """``int L[u] u^2 (-u_xx)`` with ``L`` the half Laplacian."""
    d, v = u.domain, u.values
    lam = spectral.fractional_laplacian(v, 1.0, d)
    uxx = spectral.second_derivative(v, d)
    return -_integral_of_product(d, lam, v, v, uxx)


def power_viscous_term(u: DensityField) -> float:
    """``int u u_xx^2``, the extra dissipation of ``|u^{3/2}|_{H^1}^2`` under viscosity."""
    d, v = u.domain, u.values
    uxx = spectral.second_derivative(v, d)
    return _integral_of_product(d, v, uxx, uxx)


def power_balance(records, fields: Sequence[DensityField], epsilon: float = 0.0):
    """Residual of ``1/2 d|u^{3/2}|_{H^1}^2 + 9/4 int cross dt (+ 9/4 eps int u u_xx^2 dt) = 0``.

    Returns ``(reports, signs)`` where ``signs`` lists the sign of the cross
    term at each record; it is not expected to have a definite sign.
    """
    t = _times(records)
    if fields is None or len(fields) != len(records):
        raise ValueError("power_balance needs one stored field per record")
    for r, f in zip(records, fields):
        if abs(r.time - f.time) > 1e-12 * max(1.0, abs(r.time)):
            raise ValueError(f"stored field at t={f.time} does not match record t={r.time}")
    cross = np.array([power_cross_term(f) for f in fields])
    rate = 2.25 * cross
    if epsilon:
        rate = rate + 2.25 * epsilon * np.array([power_viscous_term(f) for f in fields])
    h = np.array([r.h1_power_sq for r in records])
    return _balance(t, h, rate, lhs_scale=0.5), [int(np.sign(c)) for c in cross]


def hhalf_drift_source(u: DensityField, drift: DriftSpec) -> float:
    """``-int (u b)_x L[u] dx``, the drift forcing of the half-derivative law."""
    if not drift.active:
        return 0.0
    d, v = u.domain, u.values
    flux = spectral.dealiased_product(v, drift.b_values, d)
    return -_integral_of_product(d, spectral.derivative(flux, d), spectral.fractional_laplacian(v, 1.0, d))


def entropy_drift_source(u: DensityField, drift: DriftSpec) -> float:
    """``-int u b_x dx``."""
    if not drift.active:
        return 0.0
    return -float(np.sum(u.values * drift.db_values) * u.domain.dx)


def second_moment_law(records, epsilon: float) -> dict:
    """Least-squares slope of the second moment against both candidate laws.

    The candidate ``1/pi + 2 eps`` follows from the 1/pi-normalised Hilbert
    transform; ``1 + 2 eps`` is the unnormalised form. Deviations are
    relative to each prediction.
    """
    if any(r.second_moment is None for r in records):
        raise ValueError("second moment is only defined on the line")
    t = np.array([r.time for r in records], dtype=float)
    m2 = np.array([r.second_moment for r in records], dtype=float)
    if len(t) < 2 or np.ptp(t) <= 0:
        raise ValueError("degenerate fit: need at least two distinct times")
    slope, intercept = np.polyfit(t, m2, 1)
    normalised = 1.0 / math.pi + 2.0 * epsilon
    unnormalised = 1.0 + 2.0 * epsilon
    return {
        "slope": float(slope),
        "intercept": float(intercept),
        "predicted": normalised,
        "relative_deviation": abs(slope - normalised) / normalised,
        "predicted_unnormalised": unnormalised,
        "relative_deviation_unnormalised": abs(slope - unnormalised) / unnormalised,
    }


def level_set_measure_check(u: DensityField, eps_prime: float):
    """Sublevel-set bound from mass conservation on the circle.

    Returns ``(holds, measure, bound)`` where ``measure`` is the length of
    ``{u < 1/(2 pi) - eps'}`` by grid counting and
    ``bound = 2 pi (M - 1/2pi) / (eps' + M - 1/2pi)``; one cell of slack is
    allowed for the counting quadrature.
    """
    if eps_prime <= 0:
        raise ValueError("eps_prime must be positive")
    d = u.domain
    if not d.is_torus:
        raise ValueError("the level-set bound is stated on the circle")
    level = 1.0 / (2.0 * math.pi)
    excess = max(float(u.values.max()) - level, 0.0)
    measure = float(np.count_nonzero(u.values < level - eps_prime) * d.dx)
    bound = 2.0 * math.pi * excess / (eps_prime + excess)
    return measure <= bound + d.dx, measure, bound


def gronwall_envelope_check(records, lipschitz_bound: Optional[float], slack: float = 1e-8):
    """Check the exponential envelope for every recorded pair ``t <= h``.

    Returns a list of ``(t, h, holds, value, envelope)``.
    """
    if lipschitz_bound is None:
        raise ValueError("the envelope needs the drift Lipschitz bound")
    B = float(lipschitz_bound)
    t = np.array([r.time for r in records])
    hh = np.array([r.hhalf_sq for r in records])
    tol = slack * max(abs(hh[0]), _BALANCE_FLOOR)
    out = []
    for i in range(len(t)):
        for j in range(i, len(t)):
            env = (hh[i] + 0.5 * B) * math.exp(4.0 * B * (t[j] - t[i])) - 0.5 * B
            out.append((float(t[i]), float(t[j]), bool(hh[j] <= env + tol), float(hh[j]), float(env)))
    return out


def kato_ponce_ratio(u, drift: DriftSpec, domain: Domain | None = None) -> float:
    """``|[L^{1/2}, b] u_x|_{L^2} / (|b_x|_inf |u|_{H^1/2})`` with ``L^{1/2}`` the quarter Laplacian."""
    values, domain = spectral._unpack(u, domain)
    if not drift.active:
        return 0.0
    hh = spectral.sobolev_seminorm_sq(values, 0.5, domain)
    if hh <= 0:
        raise ValueError("u has zero half-derivative seminorm")
    b = drift.b_values
    ux = spectral.derivative(values, domain)
    comm = spectral.fractional_laplacian(spectral.dealiased_product(b, ux, domain), 0.5, domain) - (
        spectral.dealiased_product(b, spectral.fractional_laplacian(ux, 0.5, domain), domain)
    )
    norm = math.sqrt(spectral.sobolev_seminorm_sq(comm, 0.0, domain))
    lip = drift.lipschitz_bound
    if lip == 0:
        return 0.0
    return norm / (lip * math.sqrt(hh))


# ---------------------------------------------------------------------------
# summaries over a trajectory


def hhalf_monotone(records, slack_rel: float = 1e-8):
    """``(holds, worst_increase)`` for the non-increase of ``|u|_{H^1/2}^2``."""
    h = np.array([r.hhalf_sq for r in records])
    if h.size < 2:
        return True, 0.0
    worst = float(np.max(np.diff(h)))
    return worst <= slack_rel * abs(h[0]), worst


def holder_cubed_integral(records, t_from: float, t_to: float) -> float:
    """Trapezoid integral of ``[u]_{1/3}^3`` over recorded times in ``[t_from, t_to]``."""
    sel = [r for r in records if t_from - 1e-12 <= r.time <= t_to + 1e-12 and r.holder_13 is not None]
    if len(sel) < 2:
        raise ValueError("not enough records with a Hölder seminorm in the window")
    t = np.array([r.time for r in sel])
    y = np.array([r.holder_13 for r in sel]) ** 3
    return float(np.sum(0.5 * (y[1:] + y[:-1]) * np.diff(t)))


def long_time_summary(records) -> dict:
    """Approach to the uniform density on the circle."""
    level = 1.0 / (2.0 * math.pi)
    t = np.array([r.time for r in records])
    mins = np.array([r.min_u for r in records])
    maxs = np.array([r.linf for r in records])
    positive = mins > 0
    # first recorded time after which the minimum stays positive
    t1 = None
    if positive[-1]:
        last_bad = np.flatnonzero(~positive)
        idx = 0 if last_bad.size == 0 else int(last_bad[-1]) + 1
        t1 = float(t[idx])
    dev = np.maximum(maxs - level, level - mins)
    return {
        "t1": t1,
        "final_time": float(t[-1]),
        "final_max_excess": float(abs(maxs[-1] - level)),
        "final_sup_deviation": float(dev[-1]),
        "max_excess": (maxs - level).tolist(),
    }
