import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, optimize, stats

from girko_lab import montecarlo as mc
from girko_lab.ensembles import EnsembleSpec, ShiftSpec
from girko_lab.errors import InsufficientData, InsufficientSamples, InvalidParameter

CG16 = EnsembleSpec('complex', 'gaussian', 16)


def _binomial_inversion(k, n, alpha):
    """Clopper-Pearson limits by root finding on binomial tail sums."""
    lo = 0.0 if k == 0 else optimize.brentq(
        lambda p: stats.binom.sf(k - 1, n, p) - alpha / 2, 1e-12, 1 - 1e-12, xtol=1e-14)
    hi = 1.0 if k == n else optimize.brentq(
        lambda p: stats.binom.cdf(k, n, p) - alpha / 2, 1e-12, 1 - 1e-12, xtol=1e-14)
    return lo, hi


def test_clopper_pearson_edges():
    assert mc.clopper_pearson(0, 50)[0] == 0
    assert mc.clopper_pearson(50, 50)[1] == 1


def test_clopper_pearson_table_value():
    lo, hi = mc.clopper_pearson(5, 100, 0.05)
    assert abs(lo - 0.0164) <= 1e-3 and abs(hi - 0.1128) <= 1e-3
    ref = _binomial_inversion(5, 100, 0.05)
    assert abs(lo - ref[0]) <= 1e-9 and abs(hi - ref[1]) <= 1e-9


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 400).flatmap(lambda n: st.tuples(st.integers(0, n), st.just(n))))
def test_clopper_pearson_contains_estimate(kn):
    k, n = kn
    lo, hi = mc.clopper_pearson(k, n)
    assert 0 <= lo <= k / n <= hi <= 1
    ref = _binomial_inversion(k, n, 0.05)
    assert abs(lo - ref[0]) <= 1e-8 and abs(hi - ref[1]) <= 1e-8


def test_clopper_pearson_invalid():
    with pytest.raises(InvalidParameter):
        mc.clopper_pearson(5, 4)


def _synthetic(p_of_s, trials=10 ** 12):
    s = np.geomspace(0.05, 1.0, 20)
    counts = np.round(p_of_s(s) * trials).astype(np.int64)
    return mc.TailEstimate(s, counts, trials, 0, np.zeros(0))


def test_fit_slope_exact_square():
    fit = mc.fit_slope(_synthetic(lambda s: s ** 2 / 2), (0.05, 1.0))
    assert abs(fit.slope - 2) <= 1e-6


def test_fit_slope_cubic_intercept():
    fit = mc.fit_slope(_synthetic(lambda s: 0.3 * s ** 3), (0.05, 1.0))
    assert abs(fit.slope - 3) <= 1e-6
    assert abs(fit.intercept - math.log(0.3)) <= 1e-5


def test_fit_slope_needs_four_points():
    est = _synthetic(lambda s: s ** 2 / 2)
    with pytest.raises(InsufficientData):
        mc.fit_slope(est, (0.5, 0.6))


def test_fit_slope_drops_sparse_cells():
    s = np.array([0.1, 0.2, 0.3, 0.4, 0.5, 0.6])
    est = mc.TailEstimate(s, np.array([0, 3, 6, 12, 20, 30]), 1000, 0, np.zeros(0))
    assert mc.fit_slope(est, (0.1, 0.6)).points == 4


@pytest.fixture(scope='module')
def small_tail():
    cfg = mc.TailConfig(CG16, 1, tuple(np.geomspace(0.05, 2, 40)), 4000, 3)
    return mc.run_tail(cfg)


def test_tail_estimate_invariants(small_tail):
    p = small_tail.p_hat
    assert np.all(np.diff(p) >= 0)
    lo, hi = small_tail.intervals()
    assert np.all(lo <= p) and np.all(p <= hi)
    assert small_tail.failures == 0 and small_tail.interlacing_violations == 0
    np.testing.assert_allclose(small_tail.eta, small_tail.s / 16)


def test_bootstrap_matches_analytic_stderr(small_tail):
    fit = mc.fit_slope(small_tail, (0.1, 0.5))
    boot = mc.bootstrap_slope(small_tail, (0.1, 0.5), resamples=200)
    assert 0.5 <= boot / fit.stderr <= 2


def test_tail_config_validation():
    with pytest.raises(InvalidParameter):
        mc.TailConfig(CG16, s_grid=(0.1, 2.5))
    with pytest.raises(InvalidParameter):
        mc.TailConfig(CG16, trials=50)
    with pytest.raises(InvalidParameter):
        mc.TailConfig(CG16, k=0)
    with pytest.raises(InvalidParameter):
        mc.TailConfig(CG16, s_grid=(0.5, 0.2))


def test_target_exponents():
    real = EnsembleSpec('real', 'gaussian', 16)
    assert mc.TailConfig(CG16, k=2).target_exponent == 8
    assert mc.TailConfig(real, k=2).target_exponent == 4
    assert mc.TailConfig(real, k=1).target_exponent == 1
    assert mc.TailConfig(real, k=1, z=0.3j).target_exponent == 2


def test_tail_parallel_matches_serial():
    cfg = mc.TailConfig(CG16, 2, (0.5, 1.0, 2.0), 600, 9)
    a, b = mc.run_tail(cfg, workers=1), mc.run_tail(cfg, workers=3)
    assert a.samples.tobytes() == b.samples.tobytes()
    assert np.array_equal(a.counts, b.counts)


def test_tail_shift_and_z_commute():
    spec = EnsembleSpec('real', 'gaussian', 8)
    grid = (0.5, 1.0)
    via_z = mc.run_tail(mc.TailConfig(spec, 1, grid, 200, 1, z=0.3j))
    via_a = mc.run_tail(mc.TailConfig(spec, 1, grid, 200, 1, shift=ShiftSpec('scalar', -0.3j)))
    np.testing.assert_allclose(via_z.samples, via_a.samples, rtol=1e-12)


def test_wegner_outside_spectrum():
    n = 32
    est = mc.run_wegner(EnsembleSpec('complex', 'gaussian', n), 2.0, n ** -0.75, 500, 4)
    assert est.mean_count <= 1e-3


def test_wegner_zero_radius():
    est = mc.run_wegner(CG16, 0.0, 0.0, 100, 4)
    assert est.mean_count == 0 and est.normalized_density == 0


def test_wegner_radius_limit():
    with pytest.raises(InvalidParameter):
        mc.run_wegner(CG16, 0.0, 0.5, 100, 4)


def test_domain_geometry():
    disk, square = mc.Domain('disk', 0, 0.2), mc.Domain('square', 1j, 0.1)
    assert disk.area == pytest.approx(math.pi * 0.04)
    assert square.area == pytest.approx(0.04)
    assert list(square.contains(np.array([1j + 0.09, 1j + 0.11j]))) == [True, False]
    with pytest.raises(InvalidParameter):
        mc.Domain('hexagon')


def test_overlap_sum_near_normal():
    a = np.diag(np.linspace(-0.8, 0.8, 16) + 0.1j)
    rep = mc.run_overlap_sum(CG16, mc.Domain('square', 0, 1.0), 40, 2,
                             shift=ShiftSpec('dense', a), noise_scale=1e-3)
    assert np.all(rep.counts == 16)
    np.testing.assert_allclose(rep.sums, rep.counts, rtol=1e-2)


def test_overlap_samples_dominate_counts():
    rep = mc.run_overlap_sum(CG16, mc.Domain('disk', 0, 0.5), 60, 3)
    assert np.all(rep.sums >= rep.counts * (1 - 1e-12))
    assert rep.median_of_means > 0 and math.isfinite(rep.mean)


def test_median_of_means():
    x = np.concatenate([np.ones(95), [1e9] * 5])
    assert mc.median_of_means(x) == 1.0
    with pytest.raises(InsufficientData):
        mc.median_of_means(np.ones(5))


def test_inverse_gamma2_cdf_against_quadrature():
    for y in (0.05, 0.3, 1.0, 2.5, 10.0, 100.0):
        ref, _ = integrate.quad(lambda t: t * math.exp(-t), 1 / y, np.inf, epsabs=1e-14)
        assert abs(mc.inverse_gamma2_cdf(np.array([y]))[0] - ref) <= 1e-10


def test_inverse_gamma2_cdf_limits():
    vals = mc.inverse_gamma2_cdf(np.array([-1.0, 0.0, 1e12]))
    assert vals[0] == 0 and vals[1] == 0 and abs(vals[2] - 1) < 1e-12


def test_overlap_shape_requires_samples():
    with pytest.raises(InsufficientSamples):
        mc.run_overlap_shape(CG16, 0.0, 600, 1, radius=0.05, max_trials=250)


def test_overlap_shape_rejects_other_laws():
    with pytest.raises(InvalidParameter):
        mc.run_overlap_shape(EnsembleSpec('real', 'gaussian', 16), 0.0, 600, 1)
    with pytest.raises(InvalidParameter):
        mc.run_overlap_shape(CG16, 0.7, 600, 1)


def test_real_count_complex_ensemble():
    est = mc.run_real_count(EnsembleSpec('complex', 'gaussian', 16), 200, 5)
    assert est.normalized <= 0.05


def test_real_count_two_by_two():
    est = mc.run_real_count(EnsembleSpec('real', 'gaussian', 2), 5000, 5)
    assert 0.6 <= np.mean(est.counts == 2) <= 0.8


def test_real_count_small_n_expectation():
    # both eigenvalues are real with probability 1/sqrt(2), so E_2 = sqrt(2)
    est = mc.run_real_count(EnsembleSpec('real', 'gaussian', 2), 20_000, 6)
    se = (est.ci_hi - est.ci_lo) / 3.92 * math.sqrt(2)
    assert abs(est.mean - math.sqrt(2)) <= 4 * se


def test_resolvent_moment_outside_disk():
    est = mc.run_resolvent_moment(EnsembleSpec('complex', 'gaussian', 64), 2.0, 0.5, 300, 7)
    assert abs(est.moment - 0.5 ** 1.5) <= 0.05
    assert est.ci_lo <= est.moment <= est.ci_hi


def test_resolvent_moment_lp_ordering():
    spec = EnsembleSpec('complex', 'gaussian', 32)
    a = mc.run_resolvent_moment(spec, 0.0, 0.5, 300, 8)
    b = mc.run_resolvent_moment(spec, 0.0, 0.1, 300, 8)
    assert b.moment ** (1 / b.power) >= a.moment ** (1 / a.power) * (1 - 1e-12)


def test_resolvent_moment_delta_range():
    with pytest.raises(InvalidParameter):
        mc.run_resolvent_moment(CG16, 0.0, 0.0, 10, 1)


def test_manifest_round_trip():
    m = mc.RunManifest({'k': 1}, 7, '0.1.0', 4, {'tails': 1.5}, {'trials': 0}, ['a.csv'])
    assert mc.RunManifest.from_json(m.to_json()) == m
