"""Time integration of the viscous Dyson equation with optional drift.

    u_t + (u (H[u] + b))_x = eps u_xx

Integrating-factor SSP-RK3: viscosity is integrated exactly mode by mode,
transport is explicit. The state is advanced in rfft space, so the zero
mode (the mass) is never touched.
"""
from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence

import numpy as np

from . import spectral
from .spectral import DensityField, Domain

__all__ = [
    "NumericalFailure",
    "ResolutionError",
    "BlowUpError",
    "DriftKind",
    "DriftSpec",
    "SolverConfig",
    "State",
    "rhs",
    "step",
    "suggest_dt",
    "run",
]

log = logging.getLogger(__name__)

VELOCITY_FLOOR = 1e-12


class NumericalFailure(RuntimeError):
    """The integration produced an unusable field at ``time``."""

    def __init__(self, message: str, time: float):
        super().__init__(f"{message} (t={time:.6g})")
        self.time = time


class ResolutionError(NumericalFailure):
    """Negative undershoot beyond tolerance: the grid is too coarse."""


class BlowUpError(NumericalFailure):
    """Non-finite values appeared."""


class DriftKind(str, enum.Enum):
    NONE = "none"
    SAMPLED = "sampled"


@dataclass
class DriftSpec:
    """Time-independent drift ``b`` sampled on the grid together with ``b_x``."""

    kind: DriftKind = DriftKind.NONE
    b_values: Optional[np.ndarray] = None
    db_values: Optional[np.ndarray] = None
    lipschitz_bound: float = 0.0

    def __post_init__(self):
        self.kind = DriftKind(self.kind)
        if self.kind is DriftKind.NONE:
            return
        self.b_values = np.asarray(self.b_values, dtype=float)
        self.db_values = np.asarray(self.db_values, dtype=float)
        if self.b_values.shape != self.db_values.shape:
            raise ValueError("b and b_x samples differ in length")
        observed = float(np.max(np.abs(self.db_values)))
        if not self.lipschitz_bound:
            self.lipschitz_bound = observed
        elif observed > self.lipschitz_bound + 1e-12:
            raise ValueError(
                f"max|b_x| = {observed:.6g} exceeds the stated Lipschitz bound {self.lipschitz_bound:g}"
            )

    @classmethod
    def none(cls) -> "DriftSpec":
        return cls()

    @classmethod
    def sampled(cls, b, domain: Domain, db=None, lipschitz_bound: float = 0.0) -> "DriftSpec":
        b = np.asarray(b, dtype=float)
        if db is None:
            db = spectral.derivative(b, domain)
        return cls(DriftKind.SAMPLED, b, np.asarray(db, dtype=float), lipschitz_bound)

    @property
    def active(self) -> bool:
        return self.kind is DriftKind.SAMPLED


@dataclass
class SolverConfig:
    epsilon: float = 1e-4
    t_end: float = 1.0
    output_times: Sequence[float] = ()
    cfl_number: float = 0.4
    dealias: bool = True
    tol_neg: float = 1e-6
    tol_mass: float = 1e-10
    drift: DriftSpec = field(default_factory=DriftSpec)
    dt_max: float = 0.1
    enforce_dt: bool = True

    def __post_init__(self):
        if self.epsilon < 0:
            raise ValueError("epsilon must be nonnegative")
        if not 0 < self.cfl_number <= 1:
            raise ValueError("cfl_number must lie in (0, 1]")
        if self.t_end < 0:
            raise ValueError("t_end must be nonnegative")
        times = [float(t) for t in self.output_times] or [self.t_end]
        if any(b < a for a, b in zip(times, times[1:])):
            raise ValueError("output_times must be sorted")
        if times[0] < 0 or times[-1] > self.t_end * (1 + 1e-12):
            raise ValueError("output_times must lie in [0, t_end]")
        self.output_times = times


@dataclass
class State:
    time: float
    u: DensityField


class _Operator:
    """Precomputed symbols for one (domain, drift, epsilon)."""

    def __init__(self, domain: Domain, drift: DriftSpec, epsilon: float, dealias: bool = True):
        self.domain = domain
        self.epsilon = epsilon
        self.dealias = dealias
        k = domain.rwavenumbers
        self.k = k
        self.ik = 1j * k
        self.ik[-1] = 0.0
        self.hilb = -1j * np.sign(k)
        self.hilb[-1] = 0.0
        self.visc = epsilon * k * k
        self.bhat = np.fft.rfft(drift.b_values) if drift.active else None

    def velocity_hat(self, uhat):
        v = self.hilb * uhat
        if self.bhat is not None:
            v = v + self.bhat
        return v

    def transport_hat(self, uhat):
        """Spectral coefficients of ``-(u (H[u] + b))_x``."""
        n = self.domain.n_points
        vhat = self.velocity_hat(uhat)
        if self.dealias:
            m = 3 * n // 2
            uu = np.fft.irfft(spectral._pad(uhat, n, m), n=m)
            vv = np.fft.irfft(spectral._pad(vhat, n, m), n=m)
            phat = spectral._truncate(np.fft.rfft(uu * vv), n, m)
        else:
            phat = np.fft.rfft(np.fft.irfft(uhat, n=n) * np.fft.irfft(vhat, n=n))
        return -self.ik * phat

    def decay(self, tau):
        return np.exp(-self.visc * tau)


def rhs(u, drift: DriftSpec | None = None, epsilon: float = 0.0, domain: Domain | None = None,
        dealias: bool = True) -> np.ndarray:
    """Right-hand side ``-(u (H[u] + b))_x + eps u_xx`` on the grid."""
    values, domain = spectral._unpack(u, domain)
    if not np.all(np.isfinite(values)):
        raise ValueError("non-finite values in u")
    op = _Operator(domain, drift or DriftSpec(), epsilon, dealias)
    uhat = np.fft.rfft(values)
    out = op.transport_hat(uhat) - op.visc * uhat
    out[0] = 0.0
    return np.fft.irfft(out, n=domain.n_points)


def suggest_dt(state: State, config: SolverConfig) -> float:
    """CFL step; viscosity is integrated exactly and does not constrain it.

    Two limits apply: advection by ``H[u] + b``, and the nonlocal
    dissipation ``u L[delta]`` hidden in the transport term, whose
    eigenvalues reach ``max(u) * k_max``. The second one is what binds near
    the uniform state, where the velocity vanishes.
    """
    u = state.u
    v = spectral.hilbert_transform(u.values, u.domain)
    if config.drift.active:
        v = v + config.drift.b_values
    vmax = max(float(np.max(np.abs(v))), VELOCITY_FLOOR)
    umax = max(float(np.max(np.abs(u.values))), VELOCITY_FLOOR)
    dx = u.domain.dx
    return min(config.cfl_number * dx / vmax, config.cfl_number * dx / umax, config.dt_max)


def _ssprk3(op: _Operator, uhat: np.ndarray, dt: float) -> np.ndarray:
    # Butcher form in integrating-factor variables; abscissae (0, 1, 1/2)
    e1 = op.decay(dt)
    eh = op.decay(0.5 * dt)
    k1 = op.transport_hat(uhat)
    u1 = e1 * (uhat + dt * k1)
    k2 = op.transport_hat(u1)
    u2 = eh * (uhat + 0.25 * dt * k1) + 0.25 * dt * k2 / eh
    k3 = op.transport_hat(u2)
    return e1 * (uhat + dt * k1 / 6.0) + (dt / 6.0) * k2 + (2.0 * dt / 3.0) * eh * k3


def _check(values: np.ndarray, time: float, config: SolverConfig) -> None:
    if not np.all(np.isfinite(values)):
        raise BlowUpError("non-finite values in the solution", time)
    lo = float(values.min())
    if lo < -config.tol_neg:
        raise ResolutionError(
            f"minimum {lo:.3e} below -tol_neg={config.tol_neg:g}; refine the grid or raise epsilon",
            time,
        )


def step(state: State, dt: float, config: SolverConfig, _op: _Operator | None = None) -> State:
    """Advance one integrating-factor SSP-RK3 step."""
    if config.enforce_dt:
        limit = suggest_dt(state, config)
        if dt > limit * (1 + 1e-12):
            raise ValueError(f"dt={dt:g} exceeds the CFL limit {limit:g}")
    domain = state.u.domain
    op = _op or _Operator(domain, config.drift, config.epsilon, config.dealias)
    # non-finite input is reported by _check below, not by numpy warnings
    with np.errstate(invalid="ignore", over="ignore"):
        uhat = np.fft.rfft(state.u.values)
        new_hat = _ssprk3(op, uhat, dt)
    new_hat[0] = uhat[0]
    values = np.fft.irfft(new_hat, n=domain.n_points)
    t = state.time + dt
    _check(values, t, config)
    return State(t, DensityField(domain, values, t))


def run(
    u0: DensityField,
    config: SolverConfig,
    observer: Optional[Callable[[State], None]] = None,
    step_observer: Optional[Callable[[State], None]] = None,
) -> List[State]:
    """Integrate to ``config.t_end`` and return the states at ``output_times``.

    ``observer`` is called once per output state, in time order.
    ``step_observer`` (if given) sees every accepted step.
    """
    u0.validate(config.tol_neg, config.tol_mass)
    domain = u0.domain
    op = _Operator(domain, config.drift, config.epsilon, config.dealias)
    state = State(float(u0.time), DensityField(domain, u0.values.copy(), float(u0.time)))
    out: List[State] = []

    def emit(s: State):
        out.append(s)
        if observer is not None:
            observer(s)

    targets = list(config.output_times)
    if config.t_end == 0:
        emit(state)
        return out
    nsteps = 0
    for target in targets:
        while state.time < target - 1e-14 * max(1.0, target):
            dt = min(suggest_dt(state, config), target - state.time)
            state = step(state, dt, config, _op=op)
            nsteps += 1
            if step_observer is not None:
                step_observer(state)
        state = State(target, DensityField(domain, state.u.values, target))
        emit(state)
    mass = state.u.mass
    if abs(mass - u0.mass) > config.tol_mass:
        raise NumericalFailure(f"mass drifted to {mass!r}", state.time)
    log.debug("run finished after %d steps", nsteps)
    return out
