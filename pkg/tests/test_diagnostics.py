import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dyson_lab import diagnostics as dg
from dyson_lab import oracle, spectral
from dyson_lab.evolution import DriftSpec, SolverConfig, run
from dyson_lab.spectral import DensityField, Domain

from conftest import TWO_PI, positive_density


def trajectory(u0, cfg, holder=False):
    recs, fields = [], []

    def obs(s):
        recs.append(dg.compute_record(s.u, holder=holder))
        fields.append(s.u.copy())

    run(u0, cfg, observer=obs)
    return recs, fields


# -- records -----------------------------------------------------------------------


def test_uniform_record():
    d = Domain.torus(256)
    r = dg.compute_record(DensityField(d, np.full(256, 1 / TWO_PI)))
    assert r.entropy == pytest.approx(-math.log(TWO_PI), rel=1e-14)
    assert r.entropy == pytest.approx(-1.8379, abs=5e-5)
    assert r.hhalf_sq == pytest.approx(0.0, abs=1e-28)
    assert r.linf == r.min_u == pytest.approx(1 / TWO_PI)
    assert r.holder_13 == 0.0
    assert r.second_moment is None and r.rel_entropy is None
    assert not r.floor_activated


def test_gaussian_record():
    d = Domain.line(2048, 16.0)
    g = np.exp(-d.grid**2 / 2) / math.sqrt(TWO_PI)
    r = dg.compute_record(DensityField(d, g), holder=False)
    assert r.entropy == pytest.approx(-0.5 * math.log(TWO_PI * math.e), rel=1e-10)
    assert r.entropy == pytest.approx(-1.41894, abs=5e-6)
    assert r.fisher == pytest.approx(1.0, rel=1e-10)
    assert r.second_moment == pytest.approx(1.0, rel=1e-10)
    assert r.rel_entropy == pytest.approx(0.0, abs=1e-10)


@given(st.integers(min_value=0, max_value=2**32 - 1))
def test_hhalf_is_quadrature_of_u_times_half_laplacian(seed):
    rng = np.random.default_rng(seed)
    d = Domain.torus(128)
    u = positive_density(rng, d)
    r = dg.compute_record(DensityField(d, u), holder=False)
    direct = spectral.quadrature(u * spectral.fractional_laplacian(u, 1.0, d), d)
    assert r.hhalf_sq == pytest.approx(direct, rel=1e-10)


def test_cos_perturbed_uniform_hhalf():
    d = Domain.torus(128)
    u = (1 + 0.5 * np.cos(d.grid)) / TWO_PI
    r = dg.compute_record(DensityField(d, u), holder=False)
    # only the cosine part contributes: (1/(4 pi))^2 * pi
    assert r.hhalf_sq == pytest.approx(math.pi / (16 * math.pi**2), rel=1e-13)


def test_cubic_terms_are_exact_integrals():
    # u = a + b cos x: int u u_x^2 = pi a b^2 and int (Lu)^2 u = pi a b^2
    d = Domain.torus(64)
    a, b = 1.0, 0.3
    u = a + b * np.cos(d.grid)
    r = dg.compute_record(DensityField(d, u), holder=False)
    assert r.h1_power_sq == pytest.approx(2.25 * math.pi * a * b * b, rel=1e-13)
    assert r.triple_term == pytest.approx(math.pi * a * b * b, rel=1e-13)
    assert r.h32_sq == pytest.approx(math.pi * b * b, rel=1e-13)


def test_record_round_trip():
    d = Domain.line(64, 4.0)
    r = dg.compute_record(DensityField(d, np.exp(-d.grid**2)))
    assert dg.DiagnosticsRecord.from_dict(r.to_dict()) == r
    assert dg.DiagnosticsRecord.columns()[0] == "time"


def test_entropy_floor_flag():
    d = Domain.line(64, 4.0)
    u = np.exp(-d.grid**2)
    u[10] = -1e-9
    r = dg.compute_record(DensityField(d, u), holder=False)
    assert r.floor_activated and math.isfinite(r.entropy)


def test_record_rejects_nonfinite():
    d = Domain.torus(16)
    with pytest.raises(ValueError):
        dg.compute_record(DensityField(d, np.full(16, np.nan)))


# -- Hoelder seminorm --------------------------------------------------------------------


def test_holder_of_constant():
    assert dg.holder_seminorm(np.full(64, 2.0), 1 / 3, Domain.torus(64)) == 0.0


def test_holder_of_a_one_cell_jump():
    d = Domain.torus(64)
    h = 0.7
    f = np.where(np.arange(64) < 32, 0.0, h)
    assert dg.holder_seminorm(f, 1 / 3, d) == pytest.approx(h / d.dx ** (1 / 3), rel=1e-14)


def test_holder_of_cube_root_edge_is_stable_under_refinement():
    vals = []
    for n in (1024, 2048, 4096):
        d = Domain.torus(n)
        vals.append(dg.holder_seminorm(np.abs(np.sin(d.grid / 2)) ** (2 / 3), 1 / 3, d))
    assert math.isfinite(vals[-1])
    assert abs(vals[1] - vals[0]) <= 0.05 * vals[0]
    assert abs(vals[2] - vals[1]) <= 0.05 * vals[1]


def test_strided_holder_is_a_lower_bound():
    d = Domain.torus(8192)
    f = np.abs(np.sin(d.grid / 2)) ** (2 / 3) + 0.1 * np.sin(37 * d.grid)
    strided = dg.holder_seminorm(f, 0.5, d, stride_budget=16)
    x = d.grid
    full = max(np.max(np.abs(f - np.roll(f, -s))) / (s * d.dx) ** 0.5 for s in range(1, 4097))
    assert strided <= full * (1 + 1e-14)
    assert strided >= 0.9 * full


def test_holder_rejects_bad_exponent():
    with pytest.raises(ValueError):
        dg.holder_seminorm(np.ones(16), 1.0, Domain.torus(16))


def test_holder_lemma_on_constant():
    holds, margin, lhs, rhs = dg.holder_lemma_check(np.full(64, 0.3), Domain.torus(64))
    assert holds and margin == 0.0 and lhs == rhs == 0.0


def test_holder_lemma_on_semicircle():
    d = Domain.line(2048, 8.0)
    holds, margin, lhs, rhs = dg.holder_lemma_check(oracle.semicircle_density(1.0, d.grid), d)
    assert holds and margin >= 0
    assert math.isfinite(lhs) and math.isfinite(rhs) and lhs > 0


@given(st.integers(min_value=0, max_value=2**32 - 1))
def test_holder_lemma_on_random_densities(seed):
    rng = np.random.default_rng(seed)
    d = Domain.torus(256)
    u = positive_density(rng, d, amplitude=float(rng.uniform(0.1, 1.0)))
    assert dg.holder_lemma_check(u, d)[0]


def test_holder_lemma_rejects_negative_fields():
    with pytest.raises(ValueError):
        dg.holder_lemma_check(np.full(16, -1.0), Domain.torus(16))


# -- balances ----------------------------------------------------------------------------


def _uniform_records(n=3):
    d = Domain.torus(64)
    return [dg.compute_record(DensityField(d, np.full(64, 1 / TWO_PI), float(t))) for t in range(n)]


def test_stationary_balances_vanish():
    recs = _uniform_records()
    for reps in (dg.entropy_balance(recs, 1e-3), dg.hhalf_balance(recs, 1e-3)):
        assert all(r.residual == 0.0 for r in reps)
    d = Domain.torus(64)
    fields = [DensityField(d, np.full(64, 1 / TWO_PI), float(t)) for t in range(3)]
    reps, _ = dg.power_balance(recs, fields, 1e-3)
    assert all(abs(r.residual) < 1e-30 for r in reps)


def test_balance_needs_three_increasing_records():
    recs = _uniform_records(2)
    with pytest.raises(ValueError):
        dg.entropy_balance(recs, 0.0)
    recs = _uniform_records(3)[::-1]
    with pytest.raises(ValueError):
        dg.hhalf_balance(recs, 0.0)


@pytest.fixture(scope="module")
def smooth_line_run():
    # wide Poisson bump, resolved well enough for the inviscid identities
    d = Domain.line(1024, 16.0)
    u = oracle.periodic_poisson_kernel(0.5, d.grid, 16.0)
    u0 = DensityField(d, u / (u.sum() * d.dx))
    cfg = SolverConfig(epsilon=0.0, t_end=0.5, output_times=list(np.linspace(0, 0.5, 51)))
    return trajectory(u0, cfg)


def test_inviscid_entropy_identity(smooth_line_run):
    recs, _ = smooth_line_run
    reps = dg.entropy_balance(recs, 0.0)
    assert dg.cumulative(reps).relative_residual <= 1e-2
    assert max(r.relative_residual for r in reps) <= 1e-2


def test_inviscid_hhalf_identity(smooth_line_run):
    recs, _ = smooth_line_run
    reps = dg.hhalf_balance(recs, 0.0)
    assert dg.cumulative(reps).relative_residual <= 1e-2
    for r in recs:
        assert r.h1_power_sq >= 0 and r.triple_term >= -1e-10 and r.h32_sq >= 0


def test_power_identity_and_cross_term_signs(smooth_line_run):
    recs, fields = smooth_line_run
    reps, signs = dg.power_balance(recs, fields, 0.0)
    assert dg.cumulative(reps).relative_residual <= 2e-2
    assert len(signs) == len(recs) and set(signs) <= {-1, 0, 1}


def test_power_balance_needs_matching_fields(smooth_line_run):
    recs, fields = smooth_line_run
    with pytest.raises(ValueError):
        dg.power_balance(recs, fields[:-1])
    with pytest.raises(ValueError):
        dg.power_balance(recs, fields[1:] + fields[:1])


@pytest.fixture(scope="module")
def drift_run():
    d = Domain.torus(128)
    drift = DriftSpec.sampled(np.sin(d.grid), d, np.cos(d.grid), 1.0)
    u0 = DensityField(d, (1 + 0.5 * np.cos(d.grid)) / TWO_PI)
    cfg = SolverConfig(epsilon=1e-4, t_end=1.0, output_times=list(np.linspace(0, 1, 101)), drift=drift)
    recs, fields = trajectory(u0, cfg)
    return recs, fields, drift


def test_drift_source_accounts_for_the_hhalf_residual(drift_run):
    recs, fields, drift = drift_run
    src = [dg.hhalf_drift_source(f, drift) for f in fields]
    plain = dg.cumulative(dg.hhalf_balance(recs, 1e-4))
    t = np.array([r.time for r in recs])
    integrated = float(np.sum(0.5 * (np.array(src[1:]) + np.array(src[:-1])) * np.diff(t)))
    assert plain.residual == pytest.approx(integrated, rel=1e-2)
    corrected = dg.cumulative(dg.hhalf_balance(recs, 1e-4, src))
    assert corrected.relative_residual <= 1e-2


def test_drift_source_accounts_for_the_entropy_residual(drift_run):
    recs, fields, drift = drift_run
    src = [dg.entropy_drift_source(f, drift) for f in fields]
    assert dg.cumulative(dg.entropy_balance(recs, 1e-4, src)).relative_residual <= 1e-2


def test_drift_sources_vanish_without_drift():
    d = Domain.torus(32)
    u = DensityField(d, np.full(32, 1 / TWO_PI))
    assert dg.hhalf_drift_source(u, DriftSpec.none()) == 0.0
    assert dg.entropy_drift_source(u, DriftSpec.none()) == 0.0


# -- second moment --------------------------------------------------------------------------


def test_sampled_semicircle_family_has_slope_one_over_pi():
    d = Domain.line(16384, 8.0)
    recs = [
        dg.compute_record(DensityField(d, oracle.semicircle_density(t, d.grid), t), holder=False)
        for t in np.linspace(0.5, 1.5, 11)
    ]
    law = dg.second_moment_law(recs, 0.0)
    assert law["slope"] == pytest.approx(1 / math.pi, rel=1e-4)
    assert law["predicted_unnormalised"] == 1.0
    assert law["relative_deviation_unnormalised"] == pytest.approx(1 - 1 / math.pi, rel=1e-3)


def test_second_moment_degenerate_fit():
    d = Domain.line(64, 4.0)
    r = dg.compute_record(DensityField(d, np.exp(-d.grid**2), 1.0), holder=False)
    with pytest.raises(ValueError):
        dg.second_moment_law([r, r], 0.0)


def test_second_moment_not_defined_on_torus():
    with pytest.raises(ValueError):
        dg.second_moment_law(_uniform_records(), 0.0)


# -- periodic checks ------------------------------------------------------------------------


def test_level_set_uniform():
    d = Domain.torus(128)
    holds, measure, bound = dg.level_set_measure_check(DensityField(d, np.full(128, 1 / TWO_PI)), 0.01)
    assert holds and measure == 0.0 and bound == 0.0


def test_level_set_cosine_profile():
    d = Domain.torus(512)
    u = DensityField(d, (1 + 0.9 * np.cos(d.grid)) / TWO_PI)
    holds, measure, bound = dg.level_set_measure_check(u, 0.05 / TWO_PI)
    # {cos < -0.05/0.9}: length 2 (pi - arccos(-1/18))
    assert measure == pytest.approx(2 * (math.pi - math.acos(-1 / 18)), abs=2 * d.dx)
    assert holds and bound - measure > 0.5


def test_level_set_errors():
    with pytest.raises(ValueError):
        dg.level_set_measure_check(DensityField(Domain.line(16, 1.0), np.ones(16) / 2), 0.1)
    with pytest.raises(ValueError):
        dg.level_set_measure_check(DensityField(Domain.torus(16), np.ones(16) / TWO_PI), 0.0)


def test_long_time_summary_detects_t1():
    d = Domain.torus(16)
    vals = [np.full(16, 1 / TWO_PI) for _ in range(4)]
    vals[1] = vals[1].copy()
    vals[1][0] = -1e-3
    recs = [dg.compute_record(DensityField(d, v, float(t)), holder=False) for t, v in enumerate(vals)]
    s = dg.long_time_summary(recs)
    assert s["t1"] == 2.0 and s["final_sup_deviation"] == pytest.approx(0.0, abs=1e-17)


# -- Groenwall envelope and Kato-Ponce -----------------------------------------------------------


def test_gronwall_without_drift_is_monotonicity(drift_run):
    recs, _, _ = drift_run
    # with B = 0 the envelope reduces to h(t) <= h(s) for s <= t
    out = dg.gronwall_envelope_check(recs, 0.0)
    mono, _ = dg.hhalf_monotone(recs)
    assert all(o[2] for o in out) == mono


def test_gronwall_diagonal_pairs_are_tight(drift_run):
    # at s = t the envelope equals h(t) up to the rounding of (h + B/2) - B/2
    recs, _, drift = drift_run
    diag = [o for o in dg.gronwall_envelope_check(recs, drift.lipschitz_bound) if o[0] == o[1]]
    assert len(diag) == len(recs)
    assert all(o[2] and o[3] == pytest.approx(o[4], rel=1e-14) for o in diag)


def test_gronwall_holds_on_drift_run(drift_run):
    recs, _, drift = drift_run
    assert all(o[2] for o in dg.gronwall_envelope_check(recs, drift.lipschitz_bound))
    with pytest.raises(ValueError):
        dg.gronwall_envelope_check(recs, None)


def test_kato_ponce_constant_drift_is_zero():
    d = Domain.torus(64)
    drift = DriftSpec.sampled(np.full(64, 2.0), d, np.zeros(64), 1.0)
    assert dg.kato_ponce_ratio(np.cos(d.grid), drift, d) == pytest.approx(0.0, abs=1e-14)


def _kato_ponce_by_coefficients(u_modes, b_modes, lip):
    """Commutator ratio from explicit coefficient convolution (dict mode -> coeff)."""

    def conv(f, g):
        out = {}
        for k1, c1 in f.items():
            for k2, c2 in g.items():
                out[k1 + k2] = out.get(k1 + k2, 0) + c1 * c2
        return out

    ux = {k: 1j * k * c for k, c in u_modes.items()}
    half = lambda f: {k: abs(k) ** 0.5 * c for k, c in f.items()}  # noqa: E731
    comm = conv(b_modes, ux)
    comm = {k: v for k, v in half(comm).items()}
    other = conv(b_modes, half(ux))
    diff = {k: comm.get(k, 0) - other.get(k, 0) for k in set(comm) | set(other)}
    norm = math.sqrt(TWO_PI * sum(abs(v) ** 2 for v in diff.values()))
    hh = TWO_PI * sum(abs(k) * abs(c) ** 2 for k, c in u_modes.items())
    return norm / (lip * math.sqrt(hh))


def test_kato_ponce_two_ways():
    d = Domain.torus(64)
    drift = DriftSpec.sampled(np.sin(d.grid), d, np.cos(d.grid), 1.0)
    spectral_ratio = dg.kato_ponce_ratio(np.cos(d.grid), drift, d)
    by_coeffs = _kato_ponce_by_coefficients({1: 0.5, -1: 0.5}, {1: -0.5j, -1: 0.5j}, 1.0)
    assert spectral_ratio > 0 and math.isfinite(spectral_ratio)
    assert spectral_ratio == pytest.approx(by_coeffs, rel=1e-10)


def test_kato_ponce_random_trials_stable_under_doubling():
    from dyson_lab.harness.checks import kato_ponce_trials

    a = kato_ponce_trials(256, "sin", 100, 8, seed=11)
    b = kato_ponce_trials(512, "sin", 100, 8, seed=11)
    assert np.all(np.isfinite(a))
    assert abs(b.max() - a.max()) <= 0.1 * a.max()


def test_kato_ponce_requires_nonconstant_u():
    d = Domain.torus(32)
    drift = DriftSpec.sampled(np.sin(d.grid), d)
    with pytest.raises(ValueError):
        dg.kato_ponce_ratio(np.ones(32), drift, d)


# -- summaries -------------------------------------------------------------------------------


def test_holder_cubed_integral():
    d = Domain.torus(16)
    f = np.where(np.arange(16) < 8, 0.0, 1.0)
    recs = [dg.compute_record(DensityField(d, f, t)) for t in (0.0, 0.5, 1.0)]
    h = recs[0].holder_13
    assert dg.holder_cubed_integral(recs, 0.0, 1.0) == pytest.approx(h**3)
    with pytest.raises(ValueError):
        dg.holder_cubed_integral(recs, 2.0, 3.0)


def test_hhalf_monotone_detects_increase():
    recs = _uniform_records()
    assert dg.hhalf_monotone(recs)[0]
    recs[2].hhalf_sq = 1.0
    assert not dg.hhalf_monotone(recs)[0]
