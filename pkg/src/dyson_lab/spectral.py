"""Periodic grids, Fourier multipliers and dealiased products.

Both supported domains are periodic: the circle of length 2*pi and the
truncated real line [-L, L), which is treated as a circle of length 2L.
Fields are plain real numpy arrays sampled on the uniform grid of a
:class:`Domain`; every operator here is a pure function of its inputs.

Transform convention::

    c_k = (1/N) sum_j f(x_j) exp(-i k x_j)

so that the Plancherel constant for continuum norms is the circumference.
"""
from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

__all__ = [
    "DomainKind",
    "Domain",
    "DensityField",
    "SpectralCoeffs",
    "BoundaryContaminationWarning",
    "to_spectral",
    "to_physical",
    "hilbert_transform",
    "fractional_laplacian",
    "derivative",
    "second_derivative",
    "sobolev_seminorm_sq",
    "dealiased_product",
    "padded_product",
    "quadrature",
    "TOL_TAIL",
]

TOL_TAIL = 1e-8


class BoundaryContaminationWarning(UserWarning):
    """A field on the truncated line does not decay at the window edge."""


class DomainKind(str, enum.Enum):
    TORUS = "torus"
    LINE = "line"


@dataclass(frozen=True)
class Domain:
    """Uniform periodic grid.

    Parameters
    ----------
    kind : DomainKind
        ``TORUS`` (circumference 2*pi) or ``LINE`` (window [-L, L)).
    n_points : int
        Number of grid points, a power of two >= 8.
    half_width : float
        L for the truncated line; ignored on the torus.
    """

    kind: DomainKind
    n_points: int
    half_width: float = math.pi

    def __post_init__(self):
        kind = DomainKind(self.kind)
        object.__setattr__(self, "kind", kind)
        n = int(self.n_points)
        if n < 8 or n & (n - 1):
            raise ValueError(f"n_points must be a power of two >= 8, got {self.n_points}")
        object.__setattr__(self, "n_points", n)
        if kind is DomainKind.TORUS:
            object.__setattr__(self, "half_width", math.pi)
        elif not self.half_width > 0:
            raise ValueError("half_width must be positive")

    @classmethod
    def torus(cls, n_points: int) -> "Domain":
        return cls(DomainKind.TORUS, n_points)

    @classmethod
    def line(cls, n_points: int, half_width: float) -> "Domain":
        return cls(DomainKind.LINE, n_points, float(half_width))

    @property
    def is_torus(self) -> bool:
        return self.kind is DomainKind.TORUS

    @property
    def circumference(self) -> float:
        return 2.0 * self.half_width

    @property
    def dx(self) -> float:
        return self.circumference / self.n_points

    @property
    def origin(self) -> float:
        return 0.0 if self.is_torus else -self.half_width

    @cached_property
    def grid(self) -> np.ndarray:
        return self.origin + self.dx * np.arange(self.n_points)

    @cached_property
    def wavenumbers(self) -> np.ndarray:
        """Full lattice in FFT order; the Nyquist entry is +N/2 (scaled)."""
        n = np.fft.fftfreq(self.n_points, d=1.0 / self.n_points)
        n[self.n_points // 2] = self.n_points // 2
        return n * (2.0 * math.pi / self.circumference)

    @cached_property
    def rwavenumbers(self) -> np.ndarray:
        """Nonnegative half of the lattice, matching ``np.fft.rfft`` output."""
        return np.arange(self.n_points // 2 + 1) * (2.0 * math.pi / self.circumference)

    @cached_property
    def _phase(self) -> np.ndarray:
        # exp(-i k x_0) shift so coefficients refer to the physical grid origin
        return np.exp(-1j * self.wavenumbers * self.origin)

    def to_dict(self) -> dict:
        return {"kind": self.kind.value, "n_points": self.n_points, "half_width": self.half_width}

    @classmethod
    def from_dict(cls, d: dict) -> "Domain":
        return cls(DomainKind(d["kind"]), int(d["n_points"]), float(d.get("half_width", math.pi)))


@dataclass
class DensityField:
    """Grid samples of a probability density at a given time."""

    domain: Domain
    values: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.domain.n_points,):
            raise ValueError(
                f"field has shape {self.values.shape}, domain expects ({self.domain.n_points},)"
            )

    @property
    def mass(self) -> float:
        return quadrature(self.values, self.domain)

    def validate(self, tol_neg: float = 1e-6, tol_mass: float = 1e-10) -> None:
        """Raise ``ValueError`` unless the samples form a density within tolerance."""
        if not np.all(np.isfinite(self.values)):
            raise ValueError("density contains non-finite values")
        lo = float(self.values.min())
        if lo < -tol_neg:
            raise ValueError(f"density minimum {lo:.3e} below -tol_neg={tol_neg:g}")
        if abs(self.mass - 1.0) > tol_mass:
            raise ValueError(f"density mass {self.mass!r} differs from 1 by more than {tol_mass:g}")

    def copy(self) -> "DensityField":
        return DensityField(self.domain, self.values.copy(), self.time)


@dataclass
class SpectralCoeffs:
    domain: Domain
    coeffs: np.ndarray = field(repr=False)

    @property
    def wavenumbers(self) -> np.ndarray:
        return self.domain.wavenumbers


def _unpack(f, domain: Domain | None):
    if isinstance(f, DensityField):
        if domain is not None and domain != f.domain:
            raise ValueError("field domain does not match the requested domain")
        return f.values, f.domain
    if domain is None:
        raise TypeError("a Domain is required for raw arrays")
    values = np.asarray(f, dtype=float)
    if values.shape != (domain.n_points,):
        raise ValueError(f"field length {values.shape} does not match n_points={domain.n_points}")
    return values, domain


def quadrature(f, domain: Domain | None = None) -> float:
    """Rectangle rule on the uniform grid (spectrally accurate for periodic f)."""
    values, domain = _unpack(f, domain)
    return float(values.sum() * domain.dx)


def to_spectral(f, domain: Domain | None = None) -> SpectralCoeffs:
    values, domain = _unpack(f, domain)
    return SpectralCoeffs(domain, np.fft.fft(values) / domain.n_points * domain._phase)


def to_physical(c: SpectralCoeffs) -> np.ndarray:
    """Inverse of :func:`to_spectral`; the imaginary residue is discarded."""
    d = c.domain
    return np.fft.ifft(c.coeffs / d._phase * d.n_points).real


def _apply(values: np.ndarray, domain: Domain, symbol: np.ndarray) -> np.ndarray:
    return np.fft.irfft(np.fft.rfft(values) * symbol, n=domain.n_points)


def _check_tail(values: np.ndarray, domain: Domain, tail: str) -> None:
    if domain.is_torus or tail == "ignore":
        return
    scale = float(np.max(np.abs(values)))
    edge = max(abs(values[0]), abs(values[-1]))
    if scale > 0 and edge > TOL_TAIL * scale:
        msg = (
            f"field does not decay at x=+-{domain.half_width:g}: edge value {edge:.3e} "
            f"exceeds {TOL_TAIL:g}*max|f|"
        )
        if tail == "raise":
            raise ValueError(msg)
        warnings.warn(msg, BoundaryContaminationWarning, stacklevel=3)


def _odd_symbol(symbol: np.ndarray) -> np.ndarray:
    s = symbol.astype(complex)
    s[-1] = 0.0  # Nyquist
    return s


def hilbert_transform(f, domain: Domain | None = None, *, tail: str = "ignore") -> np.ndarray:
    """Apply the multiplier ``-i sign(k)``.

    On the torus this is the cotangent-kernel transform. On the truncated
    line it approximates the real-line transform for fields that vanish near
    the window edges; ``tail`` selects what happens otherwise
    (``"ignore"``, ``"warn"`` or ``"raise"``).
    """
    values, domain = _unpack(f, domain)
    _check_tail(values, domain, tail)
    k = domain.rwavenumbers
    return _apply(values, domain, _odd_symbol(-1j * np.sign(k)))


def derivative(f, domain: Domain | None = None) -> np.ndarray:
    values, domain = _unpack(f, domain)
    k = domain.rwavenumbers
    return _apply(values, domain, _odd_symbol(1j * k))


def second_derivative(f, domain: Domain | None = None) -> np.ndarray:
    values, domain = _unpack(f, domain)
    return _apply(values, domain, -domain.rwavenumbers**2)


def fractional_laplacian(f, sigma: float, domain: Domain | None = None) -> np.ndarray:
    """Apply the symbol ``|k|**sigma``; ``sigma=1`` is the half Laplacian.

    The argument is the exponent of the symbol itself, so the usual
    ``(-Delta)**s`` corresponds to ``sigma = 2*s``.
    """
    if sigma < 0:
        raise ValueError(f"symbol exponent must be nonnegative, got {sigma}")
    values, domain = _unpack(f, domain)
    k = domain.rwavenumbers
    if sigma == 0:
        return values.copy()
    return _apply(values, domain, k**sigma)


def sobolev_seminorm_sq(f, s: float, domain: Domain | None = None) -> float:
    """Squared homogeneous Sobolev seminorm ``circumference * sum |k|^(2s) |c_k|^2``."""
    if s < 0:
        raise ValueError("s must be nonnegative")
    values, domain = _unpack(f, domain)
    n = domain.n_points
    c = np.fft.rfft(values) / n
    w = np.full(c.shape, 2.0)
    w[0] = 1.0
    w[-1] = 1.0
    k = domain.rwavenumbers
    weight = np.ones_like(k) if s == 0 else k ** (2.0 * s)
    return float(domain.circumference * np.sum(w * weight * np.abs(c) ** 2))


def _pad(fhat: np.ndarray, n: int, m: int) -> np.ndarray:
    out = np.zeros(m // 2 + 1, dtype=complex)
    out[: n // 2] = fhat[: n // 2]
    # split the Nyquist mode evenly between +-N/2 so it stays a cosine
    out[n // 2] = 0.5 * fhat[n // 2].real
    return out * (m / n)


def _truncate(ghat: np.ndarray, n: int, m: int) -> np.ndarray:
    out = np.empty(n // 2 + 1, dtype=complex)
    out[: n // 2] = ghat[: n // 2]
    out[n // 2] = 2.0 * ghat[n // 2].real
    return out * (n / m)


def padded_product(*fields, domain: Domain, pad: float = 1.5) -> np.ndarray:
    """Pointwise product of several fields evaluated on a ``pad``-times finer grid.

    ``pad=1.5`` makes quadratic products of inputs with ``|k| <= N/3`` exact
    after truncation back to ``N`` points; ``pad=2`` does the same for cubic
    products of inputs with ``|k| <= N/4``.
    """
    n = domain.n_points
    m = int(round(n * pad))
    if m < n or m % 2:
        raise ValueError(f"padding factor {pad} gives an invalid grid of {m} points")
    prod = np.ones(m)
    for f in fields:
        values, _ = _unpack(f, domain)
        prod = prod * np.fft.irfft(_pad(np.fft.rfft(values), n, m), n=m)
    return np.fft.irfft(_truncate(np.fft.rfft(prod), n, m), n=n)


def dealiased_product(f, g, domain: Domain | None = None) -> np.ndarray:
    """3/2-padded product, exact for inputs band-limited to ``|k| <= N/3``."""
    fv, fd = _unpack(f, domain)
    gv, gd = _unpack(g, domain if domain is not None else fd)
    if fd != gd:
        raise ValueError("fields live on different domains")
    return padded_product(fv, gv, domain=fd, pad=1.5)
