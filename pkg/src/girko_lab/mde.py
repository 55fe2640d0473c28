"""Matrix Dyson equation for the hermitization of ``A - z``.

The solution is block constant, ``M = (H_0 - w - m)^{-1}`` with
``H_0 = [[0, A - z], [(A - z)^*, 0]]`` and ``m = <M>``, so the whole problem
collapses to the scalar fixed point

    m = (1/N) sum_i zeta / (s_i^2 - zeta^2),    zeta = w + m,

over the singular values ``s_i`` of ``A - z``.
"""
import math
from dataclasses import dataclass, field

import numpy as np

from . import linalg
from .errors import InvalidParameter, NonConvergence, QuantileOutOfSupport

__all__ = [
    'MdeSolution', 'BulkQuery', 'OverlapProfile', 'solve_mde', 'scdos',
    'scdos_curve', 'in_bulk', 'overlap_profile', 'stieltjes_map',
    'semicircle_m',
]

DAMPING = 0.5
MAX_ITER = 10_000
ETA0 = 1e-6
RICHARDSON_GAP = 1e-4


def semicircle_m(w):
    """Stieltjes transform of the semicircle law on [-2, 2] (upper branch)."""
    w = complex(w)
    root = np.sqrt(w * w - 4 + 0j)
    m = (-w + root) / 2
    if m.imag <= 0 and w.imag > 0:
        m = (-w - root) / 2
    return m


def stieltjes_map(m, w, values):
    """``<(H_0 - w - m)^{-1}>`` evaluated through the singular values."""
    zeta = w + m
    return complex(np.mean(zeta / (values ** 2 - zeta ** 2)))


def _derivative(m, w, values):
    zeta = w + m
    s2 = values ** 2
    return complex(np.mean((s2 + zeta ** 2) / (s2 - zeta ** 2) ** 2))


@dataclass
class MdeSolution:
    w: complex
    m: complex
    residual: float
    values: np.ndarray = field(repr=False)
    shift: np.ndarray = field(repr=False, default=None)
    iterations: int = 0

    @property
    def scdos(self):
        return self.m.imag / math.pi

    @property
    def zeta(self):
        return self.w + self.m

    def full_matrix(self):
        """Materialize the ``2N x 2N`` matrix ``M``."""
        y = self.shift
        n = y.shape[0]
        h0 = np.zeros((2 * n, 2 * n), dtype=complex)
        h0[:n, n:] = y
        h0[n:, :n] = y.conj().T
        return np.linalg.inv(h0 - self.zeta * np.eye(2 * n))

    def offdiag_im_trace(self):
        """``<Im[M] F>`` with ``F`` the lower-left block identity."""
        u, s, vh = np.linalg.svd(self.shift)
        zeta = self.zeta
        d = s * (1 / (s ** 2 - zeta ** 2) - 1 / (s ** 2 - np.conj(zeta) ** 2)) / 2j
        return complex(np.sum(d * np.diag(vh @ u)) / (2 * s.size))


def _fixed_point(m, w, values, tol, max_iter):
    alpha = DAMPING
    prev = abs(m - stieltjes_map(m, w, values))
    for it in range(1, max_iter + 1):
        new = (1 - alpha) * m + alpha * stieltjes_map(m, w, values)
        if new.imag <= 0:
            new = complex(new.real, abs(new.imag) + 1e-300)
        res = abs(new - stieltjes_map(new, w, values))
        if res > prev:
            alpha /= 2
            if alpha < 1e-8:
                break
        m, prev = new, res
        if res <= tol:
            return m, res, it
    return m, prev, max_iter


def _newton(m, w, values, tol, steps=60):
    for it in range(steps):
        g = m - stieltjes_map(m, w, values)
        if abs(g) <= tol:
            return m, abs(g), it
        dg = 1 - _derivative(m, w, values)
        if dg == 0:
            break
        step = g / dg
        new = m - step
        # stay in the upper half-plane
        while new.imag <= 0 and abs(step) > 1e-300:
            step /= 2
            new = m - step
        m = new
    return m, abs(m - stieltjes_map(m, w, values)), steps


def _solve_scalar(w, values, tol, m0=None):
    """Continuation in ``Im w`` from ``max(Im w, 2)`` down to ``Im w``."""
    x, eta = w.real, w.imag
    if m0 is not None:
        m, res, it = _newton(m0, w, values, tol)
        if res <= tol and m.imag > 0:
            return m, res, it
    etas = [eta]
    while etas[-1] < 2.0:
        etas.append(etas[-1] * 10)
    etas = etas[::-1]
    start = complex(x, etas[0])
    m = -1 / start
    m, res, total = _fixed_point(m, start, values, 1e-10, MAX_ITER)
    for e in etas:
        wk = complex(x, e)
        m_new, res, it = _newton(m, wk, values, tol)
        total += it
        if not (res <= tol and m_new.imag > 0):
            m_new, res, it = _fixed_point(m, wk, values, tol, MAX_ITER)
            total += it
            m_new, res, it = _newton(m_new, wk, values, tol)
            total += it
        m = m_new
    return m, res, total


def _shift_values(a, z):
    a = np.asarray(a)
    y = a - z * np.eye(a.shape[0])
    return y, linalg.singular_values(y)


def solve_mde(a, z, w, tol=1e-12, values=None, m0=None):
    """Solve the matrix Dyson equation at spectral parameter ``w``.

    Parameters
    ----------
    a : (N, N) array_like
        Deterministic matrix ``A``.
    z : complex
        Shift.
    w : complex
        Spectral parameter with ``Im w > 0``.
    tol : float
        Required fixed-point defect ``|m - <(H_0 - w - m)^{-1}>|``.
    values : array_like, optional
        Precomputed singular values of ``A - z``.
    m0 : complex, optional
        Warm start; tried with Newton before the continuation path.
    """
    w = complex(w)
    if not w.imag > 0:
        raise InvalidParameter('spectral parameter must satisfy Im w > 0')
    a = np.asarray(a)
    y = a - z * np.eye(a.shape[0])
    values = linalg.singular_values(y) if values is None else np.asarray(values)
    m, res, it = _solve_scalar(w, values, tol, m0)
    if not (res <= tol and m.imag > 0):
        raise NonConvergence(f'MDE defect {res:.3e} above tolerance at w={w}')
    return MdeSolution(w, m, float(res), values, y, it)


def scdos(a, z, x, eta0=ETA0, values=None):
    """Self-consistent density ``pi^{-1} Im m(x + i0)``, always >= 0.

    The boundary value uses ``eta0`` and one Richardson step with ``eta0/2``
    when the two evaluations differ by more than ``1e-4``.
    """
    if values is None:
        _, values = _shift_values(a, z)
    m1 = solve_mde(a, z, complex(x, eta0), values=values).m
    m2 = solve_mde(a, z, complex(x, eta0 / 2), values=values, m0=m1).m
    r1, r2 = m1.imag / math.pi, m2.imag / math.pi
    if abs(r1 - r2) > RICHARDSON_GAP:
        return max(2 * r2 - r1, 0.0)
    return max(r2, 0.0)


def scdos_curve(a, z, xs, eta0=ETA0):
    """Density on a grid, warm-starting each point from its neighbour."""
    _, values = _shift_values(a, z)
    out = np.empty(len(xs))
    m_prev = None
    for i, x in enumerate(xs):
        sol = solve_mde(a, z, complex(x, eta0), values=values, m0=m_prev)
        m_prev = sol.m
        out[i] = max(sol.m.imag / math.pi, 0.0)
    return out


@dataclass(frozen=True)
class BulkQuery:
    z: complex
    tau: float
    value: float

    @property
    def in_bulk(self):
        return self.value > 1


def in_bulk(a, z, tau):
    """``<((A - z)(A - z)^* + tau^2)^{-1}>`` and whether it exceeds one."""
    if tau <= 0:
        raise InvalidParameter('tau must be positive')
    _, values = _shift_values(a, z)
    return BulkQuery(complex(z), float(tau), float(np.mean(1 / (values ** 2 + tau ** 2))))


@dataclass(frozen=True)
class OverlapProfile:
    gamma: np.ndarray
    q: np.ndarray
    density: np.ndarray
    n: int

    def fitted_constant(self):
        """Smallest ``C`` with ``|q_i| <= C i / N`` over the profile."""
        n = self.n
        i = np.arange(1, self.q.size + 1)
        return float(np.max(np.abs(self.q) * n / i))


def _gauss_legendre(order=16):
    return np.polynomial.legendre.leggauss(order)


def overlap_profile(a, z, count, eta0=ETA0, grid=2001):
    """Quantiles ``gamma_i`` of the scDOS and the overlap profile ``q_i(z)``.

    ``gamma_i`` solves ``int_0^gamma rho = i / (2N)``: a tabulated cumulative
    density brackets each root, and bisection refines it with Gauss-Legendre
    integration from the nearest grid node.
    """
    a = np.asarray(a)
    n = a.shape[0]
    if not 1 <= count <= n:
        raise QuantileOutOfSupport(f'count must lie in 1..{n}')
    y, values = _shift_values(a, z)
    x_max = float(values.max()) + 2.5
    xs = np.linspace(0.0, x_max, grid)
    ms = np.empty(grid, dtype=complex)
    m_prev = None
    for k, x in enumerate(xs):
        m_prev = solve_mde(a, z, complex(x, eta0), values=values, m0=m_prev).m
        ms[k] = m_prev
    nodes, weights = _gauss_legendre()

    def rho_m(x, m_start):
        sol = solve_mde(a, z, complex(x, eta0), values=values, m0=m_start)
        return sol.m

    def piece(lo, hi, m_start):
        if hi <= lo:
            return 0.0
        t = (hi - lo) / 2 * nodes + (hi + lo) / 2
        dens = [max(rho_m(x, m_start).imag, 0.0) for x in t]
        return float((hi - lo) / 2 * np.dot(weights, dens)) / math.pi

    cum = np.zeros(grid)
    for k in range(1, grid):
        cum[k] = cum[k - 1] + piece(xs[k - 1], xs[k], ms[k - 1])

    gammas, qs, dens = [], [], []
    for i in range(1, count + 1):
        target = i / (2 * n)
        if target > cum[-1] + 1e-9:
            raise QuantileOutOfSupport(f'quantile {i} lies beyond the support')
        k = int(np.searchsorted(cum, target))
        k = min(max(k, 1), grid - 1)
        lo, hi = xs[k - 1], xs[k]
        base, m_start = cum[k - 1], ms[k - 1]
        for _ in range(60):
            mid = (lo + hi) / 2
            if base + piece(xs[k - 1], mid, m_start) < target:
                lo = mid
            else:
                hi = mid
            if hi - lo < 1e-13:
                break
        gamma = (lo + hi) / 2
        sol = solve_mde(a, z, complex(gamma, eta0), values=values, m0=m_start)
        gammas.append(gamma)
        qs.append(sol.offdiag_im_trace() / sol.m.imag)
        dens.append(sol.m.imag / math.pi)
    return OverlapProfile(np.array(gammas), np.array(qs), np.array(dens), n)
