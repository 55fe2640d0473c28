import math

import numpy as np
import pytest

from girko_lab import hermitization as hz
from girko_lab import mde
from girko_lab.errors import InvalidParameter, QuantileOutOfSupport

ZERO = np.zeros((4, 4))


@pytest.mark.parametrize('eta', [1e-3, 0.1, 1.0, 5.0])
def test_semicircle_closed_form(eta):
    sol = mde.solve_mde(ZERO, 0, 1j * eta)
    expected = (-1j * eta + 1j * math.sqrt(eta * eta + 4)) / 2
    assert abs(sol.m - expected) <= 1e-11
    assert sol.residual <= 1e-12 and sol.m.imag > 0


def test_semicircle_density_at_zero():
    assert abs(mde.scdos(ZERO, 0, 0.0) - 1 / math.pi) <= 1e-5


@pytest.mark.parametrize('x', [-2.0, 2.0])
def test_semicircle_edges(x):
    assert mde.scdos(ZERO, 0, x) <= 1e-2


def test_unitary_shift_cubic_oracle(ginibre):
    q, _ = np.linalg.qr(ginibre(5))
    for w in (0.3 + 0.2j, 1.5 + 0.01j, 0.05j):
        sol = mde.solve_mde(q, 0, w)
        roots = np.roots([1, 2 * w, w * w, w])
        upper = roots[roots.imag > 0]
        assert np.min(np.abs(upper - sol.m)) <= 1e-10
        zeta = w + sol.m
        assert abs(sol.m - zeta / (1 - zeta ** 2)) <= 1e-12


def test_fixed_point_defect(ginibre):
    a = ginibre(10, 1)
    sol = mde.solve_mde(a, 0.4, 0.7 + 1e-4j)
    again = mde.stieltjes_map(sol.m, sol.w, sol.values)
    assert abs(again - sol.m) <= 1e-12


def test_full_matrix_is_consistent(ginibre):
    a = ginibre(6, 2)
    sol = mde.solve_mde(a, 0.2, 0.3 + 0.05j)
    m_full = sol.full_matrix()
    assert abs(np.trace(m_full) / 12 - sol.m) <= 1e-12
    im = (m_full - m_full.conj().T) / 2j
    assert np.linalg.eigvalsh(im).min() >= -1e-12


def test_offdiag_trace_matches_dense(ginibre):
    a = ginibre(6, 3)
    sol = mde.solve_mde(a, 0.2, 0.3 + 0.05j)
    m_full = sol.full_matrix()
    im = (m_full - m_full.conj().T) / 2j
    f = np.zeros((12, 12))
    f[6:, :6] = np.eye(6)
    assert abs(np.trace(im @ f) / 12 - sol.offdiag_im_trace()) <= 1e-12


def test_rejects_lower_half_plane():
    with pytest.raises(InvalidParameter):
        mde.solve_mde(ZERO, 0, 1.0)


def test_stieltjes_mass_one():
    eta = 1e6
    sol = mde.solve_mde(ZERO, 0, 1j * eta)
    assert abs(sol.m * 1j * eta + 1) <= 1e-6


def test_im_m_positive_everywhere(ginibre):
    a = ginibre(8, 4)
    for w in (-3 + 1e-3j, -0.5 + 1e-5j, 0.2 + 0.1j, 4 + 1e-2j):
        assert mde.solve_mde(a, 0.3, w).m.imag > 0


def test_scdos_symmetric(ginibre):
    a = ginibre(8, 5)
    for x in (0.1, 0.7, 1.9):
        assert abs(mde.scdos(a, 0.4, x) - mde.scdos(a, 0.4, -x)) <= 1e-10


def test_scdos_integrates_to_one(ginibre):
    for a, z in ((ZERO, 0.0), (ginibre(8, 6), 0.3)):
        xs = np.linspace(-4, 4, 8001)
        dens = mde.scdos_curve(a, z, xs)
        assert abs(np.trapezoid(dens, xs) - 1) <= 1e-4


def test_scdos_nonnegative(ginibre):
    xs = np.linspace(-3, 3, 61)
    assert np.all(mde.scdos_curve(ginibre(8, 7), 1.5, xs) >= 0)


def test_bulk_examples():
    q = mde.in_bulk(ZERO, 0, 0.5)
    assert q.value == pytest.approx(4.0) and q.in_bulk
    assert not mde.in_bulk(ZERO, 0.3, 1.0).in_bulk
    assert not mde.in_bulk(ZERO, 0.0, 1.2).in_bulk


def test_bulk_disk_for_zero_shift():
    tau = 0.4
    radius = math.sqrt(1 - tau * tau)
    for x in np.linspace(-1.2, 1.2, 25):
        for y in np.linspace(-1.2, 1.2, 25):
            z = complex(x, y)
            if abs(abs(z) - radius) > 1e-6:
                assert mde.in_bulk(ZERO, z, tau).in_bulk == (abs(z) < radius)


def test_bulk_requires_positive_tau():
    with pytest.raises(InvalidParameter):
        mde.in_bulk(ZERO, 0, 0.0)


def test_local_law_consistency(ginibre):
    n = 128
    eta = n ** -0.8
    m = mde.solve_mde(np.zeros((n, n)), 0, 1j * eta).m
    hits = 0
    for t in range(200):
        g = hz.resolvent_trace(ginibre(n, t, seed=77), 0, eta)
        hits += abs(g - m) <= 10 / (n * eta)
    assert hits >= 190


def test_overlap_profile_symmetric_shift_is_real():
    prof = mde.overlap_profile(np.zeros((32, 32)), 0.0, 8)
    assert np.max(np.abs(prof.q.imag)) <= 1e-8
    assert np.all(np.diff(prof.gamma) > 0)


def test_overlap_profile_growth_bound():
    n = 128
    prof = mde.overlap_profile(np.zeros((n, n)), 0.5, n // 4)
    i = np.arange(1, prof.q.size + 1)
    slope = np.polyfit(i / n, np.abs(prof.q), 1)[0]
    assert slope >= 0
    assert prof.fitted_constant() <= 10
    assert np.all(np.diff(prof.gamma) > 0)


def test_overlap_profile_out_of_range():
    with pytest.raises(QuantileOutOfSupport):
        mde.overlap_profile(np.zeros((4, 4)), 0.0, 5)
