import math

import numpy as np
import pytest
from scipy import stats

from girko_lab import ensembles as en
from girko_lab.errors import DimensionMismatch, InvalidParameter

DISTS = ['gaussian', 'uniform', 'smoothed_bernoulli', 'cauchy']


def _components(spec, count, seed=3):
    """Real components of sqrt(N) X_ij gathered over enough trials."""
    out, t = [], 0
    while sum(a.size for a in out) < count:
        x = en.sample_matrix(spec, en.SeedStream(seed, t)) * math.sqrt(spec.n)
        out.append(np.concatenate([x.real.ravel(), x.imag.ravel()]) if spec.is_complex
                   else x.ravel())
        t += 1
    return np.concatenate(out)[:count]


def test_complex_gaussian_normalized_trace():
    x = en.sample_matrix(en.EnsembleSpec('complex', 'gaussian', 64), en.SeedStream(1, 0))
    assert abs(np.trace(x @ x.conj().T).real / 64 - 1) <= 0.15


def test_sampling_is_deterministic():
    spec = en.EnsembleSpec('real', 'smoothed_bernoulli', 16)
    a = en.sample_matrix(spec, en.SeedStream(99, 5))
    b = en.sample_matrix(spec, en.SeedStream(99, 5))
    assert a.tobytes() == b.tobytes()
    c = en.sample_matrix(spec, en.SeedStream(99, 6))
    assert not np.array_equal(a, c)


def test_trial_streams_do_not_depend_on_order():
    spec = en.EnsembleSpec('complex', 'gaussian', 5)
    late = en.sample_matrix(spec, en.SeedStream(4, 10))
    for t in range(10):
        en.sample_matrix(spec, en.SeedStream(4, t))
    assert np.array_equal(late, en.sample_matrix(spec, en.SeedStream(4, 10)))


def test_cauchy_sampling_and_median():
    spec = en.EnsembleSpec('real', 'cauchy', 32)
    assert math.isinf(spec.moment(2))
    vals = np.abs(_components(spec, 10_000))
    assert abs(np.median(vals) - 1) <= 0.05


def test_density_bounds():
    assert en.density_bound(en.EnsembleSpec('real', 'gaussian')) == pytest.approx(1 / math.sqrt(2 * math.pi))
    assert en.density_bound(en.EnsembleSpec('real', 'uniform')) == pytest.approx(1 / (2 * math.sqrt(3)))
    assert en.density_bound(en.EnsembleSpec('real', 'cauchy')) == pytest.approx(1 / math.pi)
    assert en.density_bound(en.EnsembleSpec('real', 'smoothed_bernoulli', width=0.1)) == 5.0


def test_complex_density_bound_per_component():
    spec = en.EnsembleSpec('complex', 'gaussian')
    assert spec.density_bound == pytest.approx(1 / math.sqrt(math.pi))


@pytest.mark.parametrize('dist', DISTS[:3])
@pytest.mark.parametrize('field', ['real', 'complex'])
def test_variance_and_mean(field, dist):
    spec = en.EnsembleSpec(field, dist, 50)
    assert spec.moment(2) == pytest.approx(1.0, rel=1e-8)
    x = np.concatenate([en.sample_matrix(spec, en.SeedStream(2, t)).ravel() for t in range(20)])
    x = x * math.sqrt(spec.n)
    assert abs(np.mean(np.abs(x) ** 2) - 1) < 0.02
    assert abs(np.mean(x)) < 0.02


@pytest.mark.parametrize('dist', DISTS[:3])
def test_complex_second_moment_vanishes(dist):
    spec = en.EnsembleSpec('complex', dist, 50)
    x = np.concatenate([en.sample_matrix(spec, en.SeedStream(8, t)).ravel() for t in range(40)])
    x = x * math.sqrt(spec.n)
    m2 = np.mean(x * x)
    assert abs(m2.real) <= 0.05 and abs(m2.imag) <= 0.05


def test_gaussian_fourth_moment_closed_form():
    assert en.EnsembleSpec('real', 'gaussian').moment(4) == pytest.approx(3.0)
    assert en.EnsembleSpec('complex', 'gaussian').moment(4) == pytest.approx(2.0)
    assert en.EnsembleSpec('real', 'uniform').moment(4) == pytest.approx(9 / 5)


@pytest.mark.parametrize('field', ['real', 'complex'])
@pytest.mark.parametrize('dist', DISTS)
def test_chi_square_against_analytic_cdf(field, dist):
    spec = en.EnsembleSpec(field, dist, 40)
    x = _components(spec, 100_000)
    edges = np.concatenate([[-np.inf], np.linspace(-3, 3, 61), [np.inf]])
    probs = np.diff(spec.component_cdf(edges))
    observed = np.histogram(x, edges)[0]
    support = probs * x.size >= 5
    # bins the law never reaches must stay empty
    assert observed[probs == 0].sum() == 0
    obs, exp = observed[support], probs[support] * x.size
    exp = exp * obs.sum() / exp.sum()
    assert stats.chisquare(obs, exp).pvalue > 0.01


def test_smoothed_bernoulli_support_and_density():
    spec = en.EnsembleSpec('real', 'smoothed_bernoulli', 30, width=0.2)
    x = _components(spec, 50_000)
    a = math.sqrt(1 - 0.2 ** 2 / 12)
    assert np.all(np.abs(np.abs(x) - a) <= 0.1 + 1e-12)
    hist, _ = np.histogram(x, bins=np.linspace(a - 0.1, a + 0.1, 11), density=False)
    dens = hist / x.size / 0.02
    assert np.all(np.abs(dens - spec.density_bound) < 0.3)


def test_invalid_specs():
    with pytest.raises(InvalidParameter):
        en.EnsembleSpec('quaternion')
    with pytest.raises(InvalidParameter):
        en.EnsembleSpec('real', 'poisson')
    with pytest.raises(InvalidParameter):
        en.EnsembleSpec('real', 'smoothed_bernoulli', width=2.0)


def test_alias_lookup():
    assert en.ensemble_from_name('ginibre-real', 8) == en.EnsembleSpec('real', 'gaussian', 8)
    with pytest.raises(InvalidParameter):
        en.ensemble_from_name('wigner', 8)


def test_build_shift_scalar():
    np.testing.assert_array_equal(en.build_shift(en.ShiftSpec('scalar', 0.0), 3), np.zeros((3, 3)))
    np.testing.assert_array_equal(en.build_shift(en.ShiftSpec('scalar', 1 + 1j), 2),
                                  np.diag([1 + 1j, 1 + 1j]))


def test_build_shift_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        en.build_shift(en.ShiftSpec('dense', np.zeros((2, 3))), 2)
    with pytest.raises(DimensionMismatch):
        en.build_shift(en.ShiftSpec('diagonal', np.zeros(3)), 2)


def test_shift_norm_bound(ginibre):
    a = ginibre(5)
    spec = en.ShiftSpec('dense', a)
    assert np.linalg.norm(en.build_shift(spec, 5), 2) <= spec.norm_bound + 1e-12


@pytest.mark.parametrize('cplx', [True, False])
def test_shift_json_round_trip(tmp_path, ginibre, cplx):
    a = ginibre(4, 1) if cplx else ginibre(4, 1, 'real')
    path = tmp_path / 'a.json'
    en.dump_shift_json(a, path)
    back = en.load_shift_json(path)
    assert np.array_equal(back, a) and np.iscomplexobj(back) == cplx


def test_shift_json_malformed():
    with pytest.raises(InvalidParameter):
        en.shift_from_dict({'rows': 2})
    with pytest.raises(DimensionMismatch):
        en.shift_from_dict({'rows': 2, 'cols': 2, 'complex': False, 'entries': [[1, 0]]})
