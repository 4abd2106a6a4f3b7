"""Spectral solver and a-priori-estimate diagnostics for the Dyson equation."""
from .spectral import (
    Domain,
    DomainKind,
    DensityField,
    SpectralCoeffs,
    dealiased_product,
    derivative,
    fractional_laplacian,
    hilbert_transform,
    sobolev_seminorm_sq,
    to_physical,
    to_spectral,
)

__version__ = "0.1.0"
