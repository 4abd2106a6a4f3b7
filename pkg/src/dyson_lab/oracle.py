"""Reference solutions that do not go through the spectral solver.

* the self-similar semicircle family,
* Stieltjes transforms of simple measures, evolved along the characteristics
  of the inviscid complex Burgers equation ``G_t + G G_x = 0``,
* a direct O(N^2) principal-value sum for the Hilbert transform,
* closed-form periodised Poisson kernels and their conjugates.

The Stieltjes transform carries a 1/pi so that its boundary value on the
real axis is ``H[u] - i u`` with the same Hilbert transform as the solver.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .spectral import DensityField, Domain

__all__ = [
    "Atom",
    "UniformPiece",
    "Semicircle",
    "GridDensity",
    "InitialMeasure",
    "StieltjesEvaluator",
    "CharacteristicsResult",
    "semicircle_density",
    "semicircle_radius",
    "stieltjes",
    "evolve_characteristics",
    "hilbert_pv_quadrature",
    "poisson_kernel",
    "poisson_conjugate",
    "periodic_poisson_kernel",
    "periodic_poisson_conjugate",
]


def semicircle_radius(t: float) -> float:
    return 2.0 * math.sqrt(t / math.pi)


def semicircle_density(t: float, x):
    """Self-similar solution started from a unit atom at the origin."""
    if not t > 0:
        raise ValueError(f"semicircle_density needs t > 0, got {t}")
    x = np.asarray(x, dtype=float)
    r2 = 4.0 * t / math.pi
    out = np.sqrt(np.clip(r2 - x * x, 0.0, None)) / (2.0 * t)
    return out if out.ndim else float(out)


# ---------------------------------------------------------------------------
# Poisson kernels


def poisson_kernel(a: float, x):
    return a / (np.pi * (a * a + np.asarray(x) ** 2))


def poisson_conjugate(a: float, x):
    x = np.asarray(x)
    return x / (np.pi * (a * a + x * x))


def _periodic_parts(a: float, x, half_width: float):
    s = math.pi / half_width
    x = np.asarray(x, dtype=float)
    den = 2.0 * half_width * (math.cosh(s * a) - np.cos(s * x))
    return s, x, den


def periodic_poisson_kernel(a: float, x, half_width: float):
    """Poisson kernel summed over the images ``x + 2 L n``."""
    s, x, den = _periodic_parts(a, x, half_width)
    return math.sinh(s * a) / den


def periodic_poisson_conjugate(a: float, x, half_width: float):
    """Periodic Hilbert transform of :func:`periodic_poisson_kernel`."""
    s, x, den = _periodic_parts(a, x, half_width)
    return np.sin(s * x) / den


# ---------------------------------------------------------------------------
# Measures


@dataclass(frozen=True)
class Atom:
    """Point mass; ``width > 0`` turns it into a Cauchy (Poisson-smoothed) bump."""

    location: float
    weight: float
    width: float = 0.0

    def g(self, z):
        zz = z - self.location + 1j * self.width
        return self.weight / (np.pi * zz), -self.weight / (np.pi * zz * zz)

    def density(self, x):
        if self.width <= 0:
            raise ValueError("an unsmoothed atom has no density")
        return self.weight * poisson_kernel(self.width, np.asarray(x) - self.location)

    @property
    def support(self):
        return (self.location - self.width, self.location + self.width)


@dataclass(frozen=True)
class UniformPiece:
    a: float
    b: float
    weight: float

    def __post_init__(self):
        if not self.a < self.b:
            raise ValueError("UniformPiece needs a < b")

    def g(self, z):
        c = self.weight / (np.pi * (self.b - self.a))
        return c * (np.log(z - self.a) - np.log(z - self.b)), c * (
            1.0 / (z - self.a) - 1.0 / (z - self.b)
        )

    def density(self, x):
        x = np.asarray(x, dtype=float)
        inside = (x >= self.a) & (x <= self.b)
        return np.where(inside, self.weight / (self.b - self.a), 0.0)

    @property
    def support(self):
        return (self.a, self.b)


@dataclass(frozen=True)
class Semicircle:
    """``weight * semicircle_density(time_parameter, x - center)``."""

    center: float
    time_parameter: float
    weight: float

    def g(self, z):
        s = self.time_parameter
        r = semicircle_radius(s)
        zeta = z - self.center
        root = np.sqrt(zeta - r) * np.sqrt(zeta + r)
        val = self.weight * (zeta - root) / (2.0 * s)
        der = self.weight * (1.0 - zeta / root) / (2.0 * s)
        return val, der

    def density(self, x):
        return self.weight * semicircle_density(self.time_parameter, np.asarray(x) - self.center)

    @property
    def support(self):
        r = semicircle_radius(self.time_parameter)
        return (self.center - r, self.center + r)


@dataclass(frozen=True)
class GridDensity:
    """Tabulated density; the transform uses exact integration of the
    piecewise-linear interpolant between grid nodes."""

    field: DensityField
    weight: float

    def _nodes(self):
        d = self.field.domain
        x = np.append(d.grid, d.grid[-1] + d.dx)
        u = np.append(self.field.values, self.field.values[0])
        return x, u

    def g(self, z):
        x, u = self._nodes()
        z = np.asarray(z, dtype=complex)
        flat = z.reshape(-1)
        h = x[1] - x[0]
        slope = (u[1:] - u[:-1]) / h
        val = np.empty(flat.shape, dtype=complex)
        der = np.empty(flat.shape, dtype=complex)
        block = max(1, 2**20 // x.size)
        # on [x_j, x_{j+1}]: u = u_j + slope_j (y - x_j), integrated exactly
        for start in range(0, flat.size, block):
            zc = flat[start : start + block, None]
            lg = np.log(zc - x[:-1]) - np.log(zc - x[1:])
            coef = u[:-1] + slope * (zc - x[:-1])
            val[start : start + block] = np.sum(coef * lg - slope * h, axis=1)
            dlg = 1.0 / (zc - x[:-1]) - 1.0 / (zc - x[1:])
            der[start : start + block] = np.sum(slope * lg + coef * dlg, axis=1)
        scale = self.weight / np.pi
        return (scale * val).reshape(z.shape), (scale * der).reshape(z.shape)

    def density(self, x):
        xs, u = self._nodes()
        return self.weight * np.interp(x, xs, u, left=0.0, right=0.0)

    @property
    def support(self):
        d = self.field.domain
        return (d.grid[0], d.grid[-1] + d.dx)


Component = Union[Atom, UniformPiece, Semicircle, GridDensity]


@dataclass(frozen=True)
class InitialMeasure:
    components: tuple = field(default_factory=tuple)

    def __post_init__(self):
        comps = tuple(self.components)
        object.__setattr__(self, "components", comps)
        if not comps:
            raise ValueError("a measure needs at least one component")
        weights = [c.weight for c in comps]
        if any(w <= 0 for w in weights):
            raise ValueError("component weights must be positive")
        if abs(sum(weights) - 1.0) > 1e-12:
            raise ValueError(f"weights sum to {sum(weights)!r}, expected 1")

    @classmethod
    def of(cls, *components: Component) -> "InitialMeasure":
        return cls(tuple(components))

    def mollified(self, width: float) -> "InitialMeasure":
        """Replace unsmoothed atoms by Poisson bumps of the given width."""
        if width <= 0:
            return self
        comps = [
            Atom(c.location, c.weight, c.width + width) if isinstance(c, Atom) else c
            for c in self.components
        ]
        return InitialMeasure(tuple(comps))

    @property
    def has_atoms(self) -> bool:
        return any(isinstance(c, Atom) and c.width <= 0 for c in self.components)

    def support_diameter(self) -> float:
        lo = min(c.support[0] for c in self.components)
        hi = max(c.support[1] for c in self.components)
        return max(hi - lo, 1.0)

    def density(self, x):
        return sum(c.density(x) for c in self.components)


class StieltjesEvaluator:
    """``G(z) = (1/pi) int u(y) / (z - y) dy`` and its z-derivative."""

    def __init__(self, measure: InitialMeasure):
        self.measure = measure

    def __call__(self, z):
        return self.evaluate(z)[0]

    def evaluate(self, z):
        z = np.asarray(z, dtype=complex)
        val = np.zeros(z.shape, dtype=complex)
        der = np.zeros(z.shape, dtype=complex)
        for c in self.measure.components:
            v, d = c.g(z)
            val = val + v
            der = der + d
        return val, der


def stieltjes(measure: InitialMeasure, z):
    z = np.asarray(z, dtype=complex)
    if np.any(z.imag <= 0):
        raise ValueError("the Stieltjes transform is evaluated on Im z > 0 only")
    out = StieltjesEvaluator(measure)(z)
    return out if out.ndim else complex(out)


# ---------------------------------------------------------------------------
# Characteristics


@dataclass
class CharacteristicsResult:
    x: np.ndarray
    t: float
    density: np.ndarray
    g_values: np.ndarray  # G_t(x + i delta) at the finer width
    failed: np.ndarray  # per-point failure marker
    delta: float

    @property
    def ok(self) -> bool:
        return not bool(self.failed.any())


def _newton(G, w, z0, t, tol=1e-12, max_iter=50):
    """Damped Newton for ``z + t G(z) = w`` keeping ``Im z > 0``."""
    z = z0.copy()
    done = np.zeros(z.shape, dtype=bool)
    for _ in range(max_iter):
        val, der = G.evaluate(z)
        res = z + t * val - w
        step = res / (1.0 + t * der)
        lam = np.ones(z.shape)
        trial = z - step
        # halve the step until it stays in the upper half-plane and reduces |res|
        for _ in range(30):
            bad = trial.imag <= 0
            if np.any(~bad):
                tv, _ = G.evaluate(np.where(bad, z, trial))
                worse = np.abs(np.where(bad, z, trial) + t * tv - w) > np.abs(res)
                bad = bad | worse
            bad &= ~done
            if not bad.any():
                break
            lam = np.where(bad, 0.5 * lam, lam)
            trial = np.where(bad, z - lam * step, trial)
        moved = np.abs(trial - z)
        z = np.where(done, z, trial)
        done |= moved <= tol * np.maximum(1.0, np.abs(z))
        if done.all():
            break
    val, _ = G.evaluate(z)
    res = np.abs(z + t * val - w)
    converged = done & (z.imag > 0) & (res <= 1e-9 * np.maximum(1.0, np.abs(w)))
    return z, converged


def _solve_subordination(G, w, t, n_continuation=64):
    z, ok = _newton(G, w, w.copy(), t)
    if ok.all():
        return z, ok
    # fallback: continuation in time from the identity map at t = 0
    idx = np.flatnonzero(~ok)
    zc = w[idx].copy()
    okc = np.ones(idx.size, dtype=bool)
    for s in np.linspace(t / n_continuation, t, n_continuation):
        zc, okc = _newton(G, w[idx], zc, s)
    z[idx] = zc
    ok[idx] = okc
    return z, ok


def evolve_characteristics(
    measure: InitialMeasure,
    t: float,
    x_grid,
    delta: float | None = None,
    extrapolate: bool = True,
) -> CharacteristicsResult:
    """Density of the inviscid solution at time ``t`` on ``x_grid``.

    For each ``w = x + i delta`` the subordination equation
    ``z + t G0(z) = w`` is solved in the upper half-plane; then
    ``-Im G0(z)`` is the density smoothed by a Poisson kernel of width
    ``delta``. With ``extrapolate`` the result at ``delta/2`` is combined
    with the one at ``delta`` to cancel the leading O(delta) smoothing error.
    """
    if not t > 0:
        raise ValueError("evolve_characteristics needs t > 0")
    x = np.asarray(x_grid, dtype=float)
    if delta is None:
        delta = 1e-3 * measure.support_diameter()
    if not delta > 0:
        raise ValueError("delta must be positive")
    G = StieltjesEvaluator(measure)

    def at(width):
        w = x + 1j * width
        z, ok = _solve_subordination(G, w, t)
        g, _ = G.evaluate(z)
        return -g.imag, g, ~ok

    u1, g1, f1 = at(delta)
    if not extrapolate:
        return CharacteristicsResult(x, t, u1, g1, f1, delta)
    u2, g2, f2 = at(0.5 * delta)
    u = 2.0 * u2 - u1
    return CharacteristicsResult(x, t, u, g2, f1 | f2, delta)


# ---------------------------------------------------------------------------
# Principal-value quadrature


def hilbert_pv_quadrature(f, domain: Domain, kernel: str = "periodic") -> np.ndarray:
    """Direct principal-value sum for the Hilbert transform, O(N^2).

    Uses the alternating-point rule: only nodes at odd offsets from the
    target enter, with doubled weight, which keeps the singular sum
    symmetric about the target and spectrally accurate for smooth data.

    ``kernel="periodic"`` uses the cotangent kernel of the domain's
    circumference; ``kernel="line"`` uses ``1/(pi (x - y))`` on the window
    only, ignoring mass outside it.
    """
    u = np.asarray(f.values if isinstance(f, DensityField) else f, dtype=float)
    n = domain.n_points
    if u.shape != (n,):
        raise ValueError("sample count does not match the domain")
    x = domain.grid
    i = np.arange(n)
    offset = (i[:, None] - i[None, :]) % n
    odd = (offset % 2) == 1
    diff = u[None, :] - u[:, None]
    if kernel == "periodic":
        c = domain.circumference
        arg = math.pi * offset * domain.dx / c
        with np.errstate(divide="ignore", invalid="ignore"):
            k = np.where(odd, 1.0 / np.tan(np.where(odd, arg, 1.0)), 0.0)
        return (2.0 * domain.dx / c) * np.sum(k * diff, axis=1)
    if kernel == "line":
        sep = x[:, None] - x[None, :]
        with np.errstate(divide="ignore", invalid="ignore"):
            k = np.where(odd, 1.0 / np.where(odd, sep, 1.0), 0.0)
        return (2.0 * domain.dx / math.pi) * np.sum(k * diff, axis=1)
    raise ValueError(f"unknown kernel {kernel!r}")
