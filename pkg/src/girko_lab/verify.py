"""Deterministic property suite behind ``girko-lab verify``.

Each check draws its own matrices from fixed seeds and returns the worst
observed defect next to the tolerance it is held to.
"""
import math
import time
from dataclasses import dataclass

import numpy as np
from scipy import optimize
from scipy.stats import unitary_group

from . import hermitization as hz
from . import linalg, mde, spectral
from .ensembles import EnsembleSpec, SeedStream, sample_matrix

__all__ = ['CheckResult', 'CHECKS', 'run_checks', 'brute_force_phase_floor']

SEED = 20240601


@dataclass(frozen=True)
class CheckResult:
    name: str
    ok: bool
    value: float
    tolerance: float
    seconds: float = 0.0

    def line(self):
        flag = 'PASS' if self.ok else 'FAIL'
        return f'{flag}  {self.name:<34s} worst={self.value:.3e}  tol={self.tolerance:.1e}'


def _ginibre(n, t, field='complex', seed=SEED):
    return sample_matrix(EnsembleSpec(field, 'gaussian', n), SeedStream(seed, t))


def check_biorthogonality(draws=50, n=12):
    worst = 0.0
    for t in range(draws):
        d = linalg.complex_eig(_ginibre(n, t, 'complex' if t % 2 else 'real'))
        worst = max(worst, np.linalg.norm(d.left.conj().T @ d.right - np.eye(n), 2))
    return worst, 1e-8


def check_svd_hermitization(draws=40, n=24):
    worst = 0.0
    for t in range(draws):
        b = _ginibre(n, t)
        z = 0.3 * np.exp(2j * np.pi * t / draws)
        eig = linalg.hermitian_eig(hz.hermitize(b, z).h).values
        s = hz.singular_system(b, z).values
        worst = max(worst, np.max(np.abs(eig[n:] - s)), np.max(np.abs(eig[:n] + s[::-1])))
    return worst, 1e-12


def check_schur_minor(draws=50, n=6):
    worst = 0.0
    rng = np.random.Generator(np.random.Philox(key=SEED))
    for t in range(draws):
        b = _ginibre(n, t)
        j = int(rng.integers(0, n))
        eta = float(10 ** rng.uniform(-3, 0))
        worst = max(worst, hz.schur_minor_report(b, j, eta).residual)
    return worst, 1e-9


def check_interlacing(draws=200, n=8):
    violations = 0
    rng = np.random.Generator(np.random.Philox(key=SEED + 1))
    for t in range(draws):
        b = _ginibre(n, t, 'complex' if t % 2 else 'real')
        removed = set(rng.choice(n, size=int(rng.integers(0, n - 1)), replace=False).tolist())
        extra = int(rng.choice([i for i in range(n) if i not in removed]))
        violations += not spectral.interlacing_report(b, removed, extra).ok
    return float(violations), 0.0


def check_weyl(draws=200, n=8):
    violations = 0
    for t in range(draws):
        b = _ginibre(n, t, 'complex' if t % 2 else 'real')
        z = 0.5 * np.exp(1j * t)
        violations += not spectral.weyl_report(b, z).ok
    return float(violations), 0.0


def check_contour_projector(draws=20, n=8):
    worst = 0.0
    for t in range(draws):
        b = _ginibre(n, t)
        d = linalg.complex_eig(b)
        i = t % n
        gaps = np.abs(d.sigma - d.sigma[i])
        gaps[i] = np.inf
        r = 0.5 * gaps.min()
        p = spectral.contour_projector(b, d.sigma[i], r, npts=128)
        dyad = np.outer(d.right[:, i], d.left[:, i].conj())
        worst = max(worst, np.linalg.norm(p - dyad, 2) / max(np.linalg.norm(dyad, 2), 1.0))
    return worst, 1e-6


def check_realification(draws=50, n=6):
    worst = 0.0
    for t in range(draws):
        a, b = _ginibre(n, 2 * t), _ginibre(n, 2 * t + 1)
        v = _ginibre(n, 2 * t + 2)[:, 0]
        worst = max(worst,
                    np.max(np.abs(linalg.realify(a @ b) - linalg.realify(a) @ linalg.realify(b))),
                    np.max(np.abs(linalg.realify_vector(a @ v)
                                  - linalg.realify(a) @ linalg.realify_vector(v))))
    return worst, 1e-13


def check_q_matrix(draws=100, n=16):
    worst = 0.0
    for t in range(draws):
        u = unitary_group.rvs(n, random_state=SEED + t)
        k = 1 + t % (n // 2)
        rep = hz.q_spectral_matrix(u, k)
        defect = max(rep.m[-1] - 1, 1 / math.sqrt(k + 1) - rep.m[k],
                     abs(rep.square_sum - k), 0.0)
        worst = max(worst, defect)
    return worst, 1e-10


def check_real_shift(draws=100, n=8):
    violations = 0
    for t in range(draws):
        y = _ginibre(n, 2 * t, 'real')
        b_im = _ginibre(n, 2 * t + 1, 'real')
        violations += not spectral.real_shift_bound_check(y, b_im).holds
    return float(violations), 0.0


def brute_force_phase_floor(v, grid=20001):
    """Dense scan of ``||Re(e^{i theta} v)||`` followed by a bounded polish."""
    v = np.asarray(v, dtype=complex)

    def f(t):
        return np.linalg.norm((np.exp(1j * t) * v).real)
    thetas = np.linspace(0, 2 * np.pi, grid)
    vals = np.linalg.norm((np.exp(1j * thetas)[:, None] * v[None]).real, axis=1)
    i = int(np.argmin(vals))
    h = thetas[1] - thetas[0]
    res = optimize.minimize_scalar(f, bounds=(thetas[i] - h, thetas[i] + h),
                                   method='bounded', options={'xatol': 1e-12})
    return float(min(res.fun, vals[i]))


def check_phase_floor(draws=50, n=6):
    worst = 0.0
    for t in range(draws):
        v = _ginibre(n, t)[:, 0]
        v = v / np.linalg.norm(v)
        worst = max(worst, abs(spectral.phase_floor(v).floor - brute_force_phase_floor(v)))
    return worst, 1e-6


def check_counting_inequality(draws=20, n=32):
    violations = 0
    for t in range(draws):
        b = _ginibre(n, t)
        s = hz.singular_system(b, 0.2).values
        for eta in (1e-3, 1e-2, 1e-1, 1.0):
            g = hz.resolvent_trace(b, 0.2, eta, values=s)
            violations += hz.count_below(s, eta) > 2 * n * eta * g.imag * (1 + 1e-12)
    return float(violations), 0.0


def check_resolvent_trace(draws=10, n=16):
    worst = 0.0
    for t in range(draws):
        b = _ginibre(n, t)
        for eta in (1e-2, 1.0):
            worst = max(worst, abs(hz.resolvent_trace(b, 0.1, eta)
                                   - hz.resolvent_trace_dense(b, 0.1, eta)))
    return worst, 1e-10


def check_semicircle():
    return abs(mde.scdos(np.zeros((4, 4)), 0.0, 0.0) - 1 / math.pi), 1e-5


def check_mde_residual(draws=10, n=16):
    worst = 0.0
    for t in range(draws):
        a = _ginibre(n, t)
        for w in (0.5 + 1e-3j, 0.01j, 2 + 0.1j):
            worst = max(worst, mde.solve_mde(a, 0.2, w).residual)
    return worst, 1e-12


def check_bulk_disk(grid=41, tau=0.5):
    wrong = 0
    radius = math.sqrt(1 - tau * tau)
    axis = np.linspace(-1.2, 1.2, grid)
    zero = np.zeros((2, 2))
    for x in axis:
        for y in axis:
            z = complex(x, y)
            margin = abs(abs(z) - radius)
            if margin <= 1e-6:
                continue
            wrong += mde.in_bulk(zero, z, tau).in_bulk != (abs(z) < radius)
    return float(wrong), 0.0


def check_girko(n=4, seed=SEED):
    b = _ginibre(n, 0, seed=seed)
    return spectral.girko_residual(b, 0.0, 0.5, 160).rel_err, 1e-2


CHECKS = [
    ('bi-orthogonality', check_biorthogonality),
    ('svd vs hermitization eigenvalues', check_svd_hermitization),
    ('schur minor identity', check_schur_minor),
    ('interlacing violations', check_interlacing),
    ('weyl violations', check_weyl),
    ('contour projector vs dyad', check_contour_projector),
    ('realification homomorphism', check_realification),
    ('q-matrix singular value bounds', check_q_matrix),
    ('real-shift phase bound violations', check_real_shift),
    ('phase floor vs brute force', check_phase_floor),
    ('resolvent counting violations', check_counting_inequality),
    ('resolvent trace vs dense inverse', check_resolvent_trace),
    ('semicircle density at zero', check_semicircle),
    ('mde fixed-point residual', check_mde_residual),
    ('bulk map misclassified points', check_bulk_disk),
    ('girko identity relative error', check_girko),
]


def run_checks(names=None):
    out = []
    for name, func in CHECKS:
        if names and name not in names:
            continue
        t0 = time.perf_counter()
        value, tol = func()
        ok = bool(value <= tol) if tol > 0 else bool(value == 0)
        out.append(CheckResult(name, ok, float(value), float(tol), time.perf_counter() - t0))
    return out
