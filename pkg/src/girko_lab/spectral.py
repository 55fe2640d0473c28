"""Deterministic per-matrix statistics.

Overlaps and condition numbers, contour spectral projectors, the Girko
log-determinant identity, Weyl and interlacing reports, and the phase floor
of complex vectors.
"""
import math
from dataclasses import dataclass

import numpy as np

from . import linalg
from .errors import (ContourTooClose, GridUnderflow, IndexOutOfRange,
                     InvalidInput, InvalidParameter)
from .hermitization import minor, padded_singular_values

__all__ = [
    'OverlapMatrix', 'GirkoReport', 'PhaseFloor', 'MarginReport',
    'RealShiftReport', 'overlaps', 'contour_projector', 'contour_nodes',
    'variational_condition', 'bump', 'bump_laplacian', 'girko_residual',
    'weyl_report', 'interlacing_report', 'phase_floor',
    'real_shift_bound_check',
]


@dataclass(frozen=True)
class OverlapMatrix:
    o: np.ndarray

    @property
    def diagonal(self):
        return self.o.diagonal().real.copy()

    @property
    def condition_numbers(self):
        return np.sqrt(self.diagonal)


def overlaps(d):
    """``O_ij = (l_i^* l_j)(r_j^* r_i)`` from a bi-orthogonal decomposition."""
    ll = d.left.conj().T @ d.left
    rr = d.right.conj().T @ d.right
    return OverlapMatrix(ll * rr.T)


def contour_nodes(norm, r, npts=None):
    if npts is None:
        npts = max(64, 16 * math.ceil(norm / r))
    return int(npts)


def contour_projector(b, z0, r, npts=None, clearance=0.05):
    """Trapezoidal ``-(1/2 pi i) oint (B - w)^{-1} dw`` on ``|w - z0| = r``.

    Raises :class:`ContourTooClose` when some eigenvalue lies within
    ``clearance * r`` of the circle.
    """
    b = np.asarray(b)
    n = b.shape[0]
    if r <= 0:
        raise InvalidParameter('radius must be positive')
    sigma = linalg.eigenvalues(b)
    if np.any(np.abs(np.abs(sigma - z0) - r) < clearance * r):
        raise ContourTooClose('an eigenvalue lies too close to the contour')
    npts = contour_nodes(np.linalg.norm(b, 2), r, npts)
    theta = 2 * np.pi * np.arange(npts) / npts
    eye = np.eye(n)
    acc = np.zeros((n, n), dtype=complex)
    for t in theta:
        w = z0 + r * np.exp(1j * t)
        dw = 1j * r * np.exp(1j * t)
        acc += linalg.linear_solve(b - w * eye, eye.astype(complex)) * dw
    return -acc * (2 * np.pi / npts) / (2j * np.pi)


def variational_condition(b, i, radii):
    """Ratios ``|sigma_i - z| / lambda_1(B - z)`` as ``z -> sigma_i``.

    Each radius is probed in the four compass directions and the ratios are
    averaged; the sequence tends to ``sqrt(O_ii)``.
    """
    b = np.asarray(b)
    d = linalg.complex_eig(b)
    if not 0 <= i < d.sigma.size:
        raise IndexOutOfRange(f'eigenvalue index {i} out of range')
    sigma = d.sigma[i]
    eye = np.eye(b.shape[0])
    out = []
    for rad in radii:
        ratios = []
        for phase in (1, 1j, -1, -1j):
            z = sigma + rad * phase
            lam1 = linalg.singular_values(b - z * eye)[0]
            ratios.append(abs(sigma - z) / lam1)
        out.append(float(np.mean(ratios)))
    return np.array(out)


# -- Girko identity ----------------------------------------------------------

def bump(u2):
    """``f_0`` as a function of ``|u|^2``: ``exp(1 - 1/(1 - |u|^2))`` on the disk."""
    u2 = np.asarray(u2, dtype=float)
    out = np.zeros_like(u2)
    inside = u2 < 1
    out[inside] = np.exp(1 - 1 / (1 - u2[inside]))
    return out


def bump_laplacian(u2):
    """Laplacian of ``f_0`` in the ``u`` plane, again as a function of ``|u|^2``.

    With ``g(rho) = f_0`` and ``rho = |u|^2``, ``Delta = 4 (rho g'' + g')``.
    """
    u2 = np.asarray(u2, dtype=float)
    out = np.zeros_like(u2)
    inside = u2 < 1
    rho = u2[inside]
    q = 1 - rho
    g = np.exp(1 - 1 / q)
    out[inside] = 4 * g * (rho / q ** 4 - 2 * rho / q ** 3 - 1 / q ** 2)
    return out


@dataclass(frozen=True)
class GirkoReport:
    lhs: float
    rhs: float
    abs_err: float
    rel_err: float
    grid_n: int
    z0: complex
    r: float


def girko_residual(b, z0=0.0, r=0.5, grid_n=160):
    """Both sides of ``sum_i f(sigma_i) = (1/2pi) int Delta f log|det(B - z)|``.

    ``f = f_0((. - z0)/r)``; the right side uses the midpoint rule on a
    ``grid_n x grid_n`` grid covering the square ``[z0 - r, z0 + r]^2``.
    """
    b = np.asarray(b)
    n = b.shape[0]
    sigma = linalg.eigenvalues(b)
    lhs = float(np.sum(bump(np.abs((sigma - z0) / r) ** 2)))
    h = 2 * r / grid_n
    offs = -r + h * (np.arange(grid_n) + 0.5)
    eye = np.eye(n)
    total = 0.0
    for dy in offs:
        u2 = (offs ** 2 + dy * dy) / (r * r)
        inside = u2 < 1
        if not np.any(inside):
            continue
        zs = z0 + offs[inside] + 1j * dy
        lam = linalg.singular_values(b[None] - zs[:, None, None] * eye)
        if np.any(lam[:, 0] < 1e-14):
            raise GridUnderflow('a grid point collides with an eigenvalue')
        logdet = np.sum(np.log(lam), axis=1)
        total += math.fsum(bump_laplacian(u2[inside]) * logdet)
    rhs = total * h * h / (r * r) / (2 * math.pi)
    abs_err = abs(lhs - rhs)
    rel_err = abs_err / abs(lhs) if lhs != 0 else abs_err
    return GirkoReport(lhs, rhs, abs_err, rel_err, grid_n, complex(z0), float(r))


# -- Weyl and interlacing ----------------------------------------------------

@dataclass(frozen=True)
class MarginReport:
    ok: bool
    margins: np.ndarray


def weyl_report(b, z=0.0, tol=1e-9):
    """``prod_{i<=k} |sigma_i - z| >= prod_{i<=k} lambda_i^z`` for every ``k``.

    Eigenvalues are ordered by distance to ``z``. Margins are
    ``log(eigen product) - log(singular product)``; a margin of 0 is
    reported when both products vanish.
    """
    b = np.asarray(b)
    n = b.shape[0]
    dist = np.sort(np.abs(linalg.eigenvalues(b) - z))
    lam = linalg.singular_values(b - z * np.eye(n))
    scale = max(np.linalg.norm(b - z * np.eye(n), 2), 1.0)
    tiny = 1e-13 * scale
    margins = np.empty(n)
    for k in range(1, n + 1):
        e_zero = np.any(dist[:k] <= tiny)
        s_zero = np.any(lam[:k] <= tiny)
        if e_zero and s_zero:
            margins[k - 1] = 0.0
        elif e_zero:
            margins[k - 1] = -np.inf
        elif s_zero:
            margins[k - 1] = np.inf
        else:
            margins[k - 1] = np.sum(np.log(dist[:k])) - np.sum(np.log(lam[:k]))
    return MarginReport(bool(np.all(margins >= -tol)), margins)


def interlacing_report(b, rows, i, tol=1e-10):
    """Check ``lambda_k^(I+i) <= lambda_k^(I) <= lambda_{k+1}^(I+i)``.

    ``rows`` is the already-removed index set ``I`` and ``i`` the extra row.
    Margins are the smaller of the two gaps for each ``k``.
    """
    b = np.asarray(b)
    n = b.shape[0]
    rows = set(int(r) for r in rows)
    if i in rows:
        raise InvalidParameter('extra row already removed')
    if not 0 <= i < n:
        raise IndexOutOfRange(f'row index {i} outside 0..{n - 1}')
    outer = padded_singular_values(minor(b, rows), n)
    inner = padded_singular_values(minor(b, rows | {i}), n)
    scale = max(outer[-1], 1.0)
    margins = np.empty(n)
    for k in range(n):
        left = outer[k] - inner[k]
        right = inner[k + 1] - outer[k] if k + 1 < n else np.inf
        margins[k] = min(left, right)
    return MarginReport(bool(np.all(margins >= -tol * scale)), margins)


# -- phase floor and the real-shift lemma --------------------------------------

@dataclass(frozen=True)
class PhaseFloor:
    v: np.ndarray
    floor: float
    theta_star: float


def phase_floor(v, tol=1e-10):
    """``min_theta ||Re(e^{i theta} v)||`` via the SVD of ``[Re v | Im v]``."""
    v = np.asarray(v, dtype=complex)
    if abs(np.linalg.norm(v) - 1) > tol:
        raise InvalidInput('vector must have unit norm')
    m = np.column_stack([v.real, v.imag])
    _, s, vh = np.linalg.svd(m, full_matrices=False)
    c, sn = vh[-1]
    # Re(e^{i t} v) = cos t Re v - sin t Im v  ->  (cos t, -sin t) = +-(c, sn)
    theta = math.atan2(-sn, c) % (2 * math.pi)
    return PhaseFloor(v, float(s[-1]), theta)


@dataclass(frozen=True)
class RealShiftReport:
    floor_sq: float
    bound: float

    @property
    def holds(self):
        return self.floor_sq >= self.bound * (1 - 1e-9) - 1e-15


def real_shift_bound_check(y, b_im):
    """Lower bound on how complex the null vector of ``J^(1)(Y + iB)`` is.

    Checks ``min_theta ||Re(e^{i theta} v)||^2 >= lambda_1(B)^2
    ||J Y w||^2 / (5 (||J Y|| + ||B||)^4)`` with ``J`` removing row 0 and ``w``
    the real unit null vector of ``J B``.
    """
    y = np.asarray(y, dtype=float)
    b_im = np.asarray(b_im, dtype=float)
    lam1 = linalg.singular_values(b_im)[0]
    if lam1 <= 1e-8:
        raise InvalidInput('B must have smallest singular value above 1e-8')
    v = linalg.kernel_vector(minor(y + 1j * b_im, [0]))
    w = linalg.kernel_vector(minor(b_im, [0]))
    jy = minor(y, [0])
    floor = phase_floor(v / np.linalg.norm(v)).floor
    denom = (np.linalg.norm(jy, 2) + np.linalg.norm(b_im, 2)) ** 4
    bound = lam1 ** 2 * np.linalg.norm(jy @ w) ** 2 / (5 * denom) if denom > 0 else 0.0
    return RealShiftReport(floor ** 2, float(bound))
