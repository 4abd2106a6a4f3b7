import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dyson_lab import oracle, spectral
from dyson_lab.oracle import (
    Atom,
    GridDensity,
    InitialMeasure,
    Semicircle,
    UniformPiece,
    evolve_characteristics,
    semicircle_density,
    stieltjes,
)
from dyson_lab.spectral import DensityField, Domain


# -- closed forms ----------------------------------------------------------------


def test_semicircle_peak():
    assert semicircle_density(1.0, 0.0) == pytest.approx(1 / math.sqrt(math.pi), rel=1e-15)
    assert semicircle_density(1.0, 0.0) == pytest.approx(0.564190, abs=5e-7)


def test_semicircle_support_edge():
    assert semicircle_density(math.pi, 2.0) == 0.0
    assert semicircle_density(math.pi, -2.0) == 0.0
    assert oracle.semicircle_radius(math.pi) == pytest.approx(2.0)


def test_semicircle_unit_mass():
    # Gauss-Chebyshev of the second kind integrates sqrt(r^2 - x^2) exactly
    t = 0.7
    r = oracle.semicircle_radius(t)
    m = 8
    i = np.arange(1, m + 1)
    w = math.pi / (m + 1) * np.sin(i * math.pi / (m + 1)) ** 2
    mass = r * r / (2 * t) * np.sum(w)
    assert mass == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("t", [0.0, -1.0])
def test_semicircle_rejects_nonpositive_time(t):
    with pytest.raises(ValueError):
        semicircle_density(t, 0.0)


def test_semicircle_solves_the_equation_on_its_support():
    # H[u] = x / (2t) inside the support, so u_t + (u x / (2t))_x must vanish
    t, h = 0.8, 1e-5
    x = np.linspace(-0.8, 0.8, 41) * oracle.semicircle_radius(t)
    ut = (semicircle_density(t + h, x) - semicircle_density(t - h, x)) / (2 * h)
    flux = lambda y: semicircle_density(t, y) * y / (2 * t)  # noqa: E731
    fx = (flux(x + h) - flux(x - h)) / (2 * h)
    assert np.max(np.abs(ut + fx)) < 1e-6


# -- measures ----------------------------------------------------------------------


def test_measure_weights_must_sum_to_one():
    with pytest.raises(ValueError):
        InitialMeasure.of(Atom(0.0, 0.5))
    with pytest.raises(ValueError):
        InitialMeasure.of(Atom(0.0, 1.5), Atom(1.0, -0.5))
    with pytest.raises(ValueError):
        UniformPiece(1.0, 1.0, 1.0)


def test_mollified_flags_atoms():
    m = InitialMeasure.of(Atom(0.0, 0.5), UniformPiece(-1, 1, 0.5))
    assert m.has_atoms
    mm = m.mollified(0.1)
    assert not mm.has_atoms
    assert mm.components[0].width == pytest.approx(0.1)


# -- Stieltjes transform ---------------------------------------------------------


def test_atom_at_origin():
    assert stieltjes(InitialMeasure.of(Atom(0.0, 1.0)), 1j) == pytest.approx(-1j / math.pi)


def test_stieltjes_rejects_lower_half_plane():
    with pytest.raises(ValueError):
        stieltjes(InitialMeasure.of(Atom(0.0, 1.0)), 1.0 + 0j)


MEASURES = [
    InitialMeasure.of(Atom(0.0, 1.0)),
    InitialMeasure.of(Atom(-1.0, 0.5, 0.02), Atom(1.0, 0.5, 0.02)),
    InitialMeasure.of(UniformPiece(-1.0, 2.0, 0.3), Semicircle(0.5, 0.4, 0.7)),
    InitialMeasure.of(Semicircle(0.0, 1.0, 1.0)),
]


@pytest.mark.parametrize("measure", MEASURES)
def test_herglotz_property(measure):
    rng = np.random.Generator(np.random.Philox(7))
    z = rng.uniform(-5, 5, 1000) + 1j * 10 ** rng.uniform(-4, 1, 1000)
    g = stieltjes(measure, z)
    assert np.all(g.imag < 0)
    assert np.all(np.abs(g) <= 1 / (math.pi * z.imag) * (1 + 1e-12))


def test_stieltjes_boundary_values_recover_density_and_hilbert():
    # G(x + i0) = H[u] - i u, checked on the semicircle where H[u] = x / (2t)
    t = 1.0
    m = InitialMeasure.of(Semicircle(0.0, t, 1.0))
    x = np.linspace(-0.9, 0.9, 7)
    g = stieltjes(m, x + 1e-12j)
    assert np.max(np.abs(g.real - x / (2 * t))) < 1e-9
    assert np.max(np.abs(-g.imag - semicircle_density(t, x))) < 1e-9


@given(st.floats(min_value=-3, max_value=3), st.floats(min_value=0.05, max_value=3))
def test_component_derivative_matches_finite_difference(re, im):
    z = complex(re, im)
    h = 1e-6
    for c in (Atom(0.3, 1.0, 0.1), UniformPiece(-1, 1, 1.0), Semicircle(0.2, 0.5, 1.0)):
        g, dg = c.g(np.array(z))
        fd = (c.g(np.array(z + h))[0] - c.g(np.array(z - h))[0]) / (2 * h)
        assert abs(dg - fd) <= 1e-6 * max(1.0, abs(dg))


def test_grid_density_matches_semicircle_component():
    t = 1.0
    d = Domain.line(2**17, 2.0)
    field = DensityField(d, semicircle_density(t, d.grid))
    rng = np.random.Generator(np.random.Philox(3))
    z = rng.uniform(-2, 2, 16) + 1j * rng.uniform(0.1, 1.0, 16)
    grid = GridDensity(field, 1.0).g(z)[0]
    exact = Semicircle(0.0, t, 1.0).g(z)[0]
    assert np.max(np.abs(grid - exact)) <= 1e-8


# -- characteristics -----------------------------------------------------------------


def test_atom_evolves_into_semicircle():
    x = np.linspace(-1.5, 1.5, 301)
    res = evolve_characteristics(InitialMeasure.of(Atom(0.0, 1.0)), 1.0, x, delta=1e-3)
    assert res.ok
    assert np.max(np.abs(res.density - semicircle_density(1.0, x))) <= 5e-3
    assert np.all(res.g_values.imag < 0)


def test_semicircle_family_is_a_semigroup_in_time():
    x = np.linspace(-1.5, 1.5, 301)
    res = evolve_characteristics(InitialMeasure.of(Semicircle(0.0, 0.5, 1.0)), 0.5, x, delta=1e-3)
    assert res.ok
    assert np.max(np.abs(res.density - semicircle_density(1.0, x))) <= 5e-3


def test_atomic_semigroup_through_a_grid_density():
    d = Domain.line(2048, 3.0)
    atom = InitialMeasure.of(Atom(0.0, 1.0))
    half = evolve_characteristics(atom, 0.5, d.grid, delta=1e-3)
    mid = DensityField(d, np.clip(half.density, 0, None))
    mid = DensityField(d, mid.values / mid.mass)
    x = np.linspace(-1.5, 1.5, 151)
    twice = evolve_characteristics(InitialMeasure.of(GridDensity(mid, 1.0)), 0.5, x, delta=1e-3)
    assert np.max(np.abs(twice.density - semicircle_density(1.0, x))) <= 2 * 5e-3


def test_short_time_returns_poisson_smoothed_input():
    d = Domain.line(1024, 4.0)
    u = DensityField(d, semicircle_density(0.5, d.grid))
    m = InitialMeasure.of(GridDensity(u, 1.0))
    x = np.linspace(-0.6, 0.6, 13)
    delta = 0.05
    res = evolve_characteristics(m, 1e-9, x, delta=delta, extrapolate=False)
    smoothed = -stieltjes(m, x + 1j * delta).imag
    assert np.max(np.abs(res.density - smoothed)) < 1e-6


def test_oracle_output_mass():
    d = Domain.line(4096, 8.0)
    m = InitialMeasure.of(Atom(-1.0, 0.5, 0.02), Atom(1.0, 0.5, 0.02))
    res = evolve_characteristics(m, 0.5, d.grid)
    mass = float(np.sum(res.density) * d.dx)
    assert 1 - 5e-3 <= mass <= 1.0


def test_characteristics_rejects_bad_arguments():
    m = InitialMeasure.of(Atom(0.0, 1.0))
    with pytest.raises(ValueError):
        evolve_characteristics(m, 0.0, [0.0])
    with pytest.raises(ValueError):
        evolve_characteristics(m, 1.0, [0.0], delta=-1.0)


# -- principal-value quadrature ------------------------------------------------------------


def test_pv_of_constant_is_zero():
    d = Domain.line(256, 4.0)
    assert np.all(oracle.hilbert_pv_quadrature(np.full(256, 2.5), d) == 0.0)
    assert np.all(oracle.hilbert_pv_quadrature(np.full(256, 2.5), d, kernel="line") == 0.0)


def test_pv_matches_spectral_transform():
    d = Domain.line(2048, 16.0)
    f = oracle.periodic_poisson_kernel(0.5, d.grid, 16.0)
    err = np.max(np.abs(oracle.hilbert_pv_quadrature(f, d) - spectral.hilbert_transform(f, d)))
    assert err <= 1e-6


def test_line_kernel_pv_error_is_the_window_tail():
    # same spacing, wider window: the missing part of the singular integral
    # contributes about 2 x f(x) / L, so the error falls like 1/L
    a = 0.5
    errs = []
    for L, n in ((8.0, 512), (32.0, 2048)):
        d = Domain.line(n, L)
        pv = oracle.hilbert_pv_quadrature(oracle.poisson_kernel(a, d.grid), d, kernel="line")
        inner = np.abs(d.grid) < 2
        errs.append(np.max(np.abs(pv - oracle.poisson_conjugate(a, d.grid))[inner]))
    assert errs[1] < errs[0] / 3.5


def test_pv_rejects_unknown_kernel():
    d = Domain.torus(16)
    with pytest.raises(ValueError):
        oracle.hilbert_pv_quadrature(np.ones(16), d, kernel="other")
