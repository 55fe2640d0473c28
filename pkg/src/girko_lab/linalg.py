"""Dense linear-algebra kernel.

Thin, checked wrappers around LAPACK (through numpy/scipy) that return the
decompositions in the conventions used throughout the package:

* eigenvalues and singular values are sorted ascending,
* right eigenvectors have unit norm and a fixed phase (largest entry real
  and positive), left eigenvectors are rescaled so that ``l_i^* r_i = 1``.

Matrices are plain :class:`numpy.ndarray` objects; the field (real or
complex) is carried by the dtype.
"""
from dataclasses import dataclass

import numpy as np
import scipy.linalg as la

from .errors import (DegenerateSpectrum, DimensionMismatch, InvalidInput,
                     NumericalFailure, RankDeficient, SingularSystemError)

__all__ = [
    'EigenSystem', 'SpectralDecomposition', 'SingularSystem',
    'hermitian_eig', 'svd', 'singular_values', 'complex_eig', 'eigenvalues',
    'kernel_vector', 'realify', 'realify_vector', 'linear_solve',
    'fix_phase', 'DEGENERACY_THRESHOLD',
]

#: relative minimum eigenvalue gap below which a spectrum counts as degenerate
DEGENERACY_THRESHOLD = 1e-9


@dataclass(frozen=True)
class EigenSystem:
    values: np.ndarray
    vectors: np.ndarray
    residual: float


@dataclass(frozen=True)
class SpectralDecomposition:
    """Eigen-decomposition ``B = sum_i sigma_i r_i l_i^*`` of a simple matrix.

    ``right[:, i]`` and ``left[:, i]`` hold ``r_i`` and ``l_i``.
    """
    sigma: np.ndarray
    right: np.ndarray
    left: np.ndarray
    residual: float

    def reconstruct(self):
        return (self.right * self.sigma) @ self.left.conj().T


@dataclass(frozen=True)
class SingularSystem:
    """Singular triples ``B v_i = lambda_i u_i`` with ``lambda`` ascending."""
    values: np.ndarray
    left_u: np.ndarray
    right_v: np.ndarray


def _as_matrix(a):
    a = np.asarray(a)
    if a.ndim != 2:
        raise InvalidInput(f'expected a 2-d array, got shape {a.shape}')
    if not np.all(np.isfinite(a)):
        raise InvalidInput('matrix has non-finite entries')
    if not (np.issubdtype(a.dtype, np.floating)
            or np.issubdtype(a.dtype, np.complexfloating)):
        a = a.astype(float)
    return a


def _square(a):
    a = _as_matrix(a)
    if a.shape[0] != a.shape[1]:
        raise DimensionMismatch(f'expected a square matrix, got {a.shape}')
    return a


def fix_phase(vectors):
    """Rotate each column so its largest-magnitude entry is real positive."""
    vectors = np.array(vectors, dtype=complex)
    idx = np.argmax(np.abs(vectors), axis=0)
    pivots = vectors[idx, np.arange(vectors.shape[1])]
    phases = np.ones_like(pivots)
    nz = pivots != 0
    phases[nz] = np.abs(pivots[nz]) / pivots[nz]
    return vectors * phases


def hermitian_eig(h, tol=1e-10):
    """Full spectrum of a Hermitian matrix, ascending, with orthonormal basis.

    Raises
    ------
    InvalidInput
        If ``h`` deviates from its adjoint by more than ``tol * ||h||``.
    NumericalFailure
        If LAPACK fails to converge.
    """
    h = _square(h)
    scale = max(np.linalg.norm(h, 2), np.finfo(float).tiny)
    if np.linalg.norm(h - h.conj().T, 2) > tol * scale:
        raise InvalidInput('matrix is not Hermitian within tolerance')
    h = (h + h.conj().T) / 2
    try:
        values, vectors = np.linalg.eigh(h)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure(str(exc)) from exc
    residual = np.linalg.norm(h @ vectors - vectors * values, 2) / scale
    return EigenSystem(values, vectors, float(residual))


def svd(b, tol=1e-10):
    """Singular system of ``b`` with ascending singular values.

    For an ``m x n`` input the ``min(m, n)`` singular triples are returned;
    ``left_u`` is ``m x k`` and ``right_v`` is ``n x k``.
    """
    b = _as_matrix(b)
    try:
        u, s, vh = np.linalg.svd(b, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure(str(exc)) from exc
    return SingularSystem(s[::-1].copy(), u[:, ::-1].copy(),
                          vh[::-1].conj().T.copy())


def singular_values(b):
    """Ascending singular values only (works on stacks of matrices too)."""
    try:
        s = np.linalg.svd(b, compute_uv=False)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure(str(exc)) from exc
    return s[..., ::-1]


def eigenvalues(b):
    """Eigenvalues of a square matrix (or stack), no vectors.

    Real input goes through the real LAPACK path, so real eigenvalues of a
    real matrix come back with an imaginary part of exactly zero.
    """
    try:
        return np.linalg.eigvals(b)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure(str(exc)) from exc


def complex_eig(b, tol=1e-10, degeneracy=DEGENERACY_THRESHOLD):
    """Bi-orthogonal eigendecomposition of a square matrix with simple spectrum.

    Parameters
    ----------
    b : (N, N) array_like
        Real or complex matrix.
    tol : float
        Relative tolerance for the reconstruction check.
    degeneracy : float
        A minimum eigenvalue gap below ``degeneracy * ||b||`` raises
        :class:`DegenerateSpectrum`.

    Returns
    -------
    SpectralDecomposition
        ``r_i`` unit norm with fixed phase, ``l_i`` scaled so ``l_i^* r_i = 1``.
    """
    b = _square(b)
    n = b.shape[0]
    norm = np.linalg.norm(b, 2)
    try:
        sigma, vl, vr = la.eig(b, left=True, right=True)
    except la.LinAlgError as exc:
        raise NumericalFailure(str(exc)) from exc
    if not (np.all(np.isfinite(sigma)) and np.all(np.isfinite(vr))):
        raise NumericalFailure('eigensolver returned non-finite values')
    if n > 1:
        gaps = np.abs(sigma[:, None] - sigma[None, :])
        gaps[np.diag_indices(n)] = np.inf
        if gaps.min() < degeneracy * max(norm, 1.0):
            raise DegenerateSpectrum(
                f'minimum eigenvalue gap {gaps.min():.3e} below threshold')
    right = vr / np.linalg.norm(vr, axis=0)
    right = fix_phase(right)
    left = vl.astype(complex)
    pairing = np.einsum('ij,ij->j', left.conj(), right)
    if np.any(np.abs(pairing) == 0):
        raise NumericalFailure('left and right eigenvectors are orthogonal')
    left = left / pairing.conj()
    decomp = SpectralDecomposition(sigma.astype(complex), right, left, 0.0)
    residual = np.linalg.norm(decomp.reconstruct() - b, 2) / max(norm, 1e-300)
    if residual > max(tol, 1e-6):
        raise NumericalFailure(f'reconstruction residual {residual:.3e}')
    return SpectralDecomposition(decomp.sigma, right, left, float(residual))


def kernel_vector(m, tol=1e-10):
    """Unit null vector of an ``(N-1) x N`` matrix of full row rank.

    The vector is the right singular vector belonging to the (structural)
    zero singular value, phase-fixed like eigenvectors.
    """
    m = _as_matrix(m)
    rows, cols = m.shape
    if rows != cols - 1:
        raise DimensionMismatch(f'expected (N-1) x N, got {m.shape}')
    try:
        u, s, vh = np.linalg.svd(m, full_matrices=True)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure(str(exc)) from exc
    scale = s[0] if s.size and s[0] > 0 else 0.0
    if s.size == 0 or s[-1] <= tol * scale or scale == 0.0:
        raise RankDeficient('kernel is not one-dimensional')
    v = vh[-1].conj()
    if np.isrealobj(m):
        return v / np.linalg.norm(v) * np.sign(v[np.argmax(np.abs(v))])
    return fix_phase(v[:, None])[:, 0]


def realify(m):
    """Real ``2d1 x 2d2`` embedding ``[[Re M, -Im M], [Im M, Re M]]``."""
    m = np.asarray(m)
    re, im = m.real, (m.imag if np.iscomplexobj(m) else np.zeros_like(m.real))
    return np.block([[re, -im], [im, re]]).astype(float)


def realify_vector(v):
    """Stack ``(Re v; Im v)``."""
    v = np.asarray(v)
    im = v.imag if np.iscomplexobj(v) else np.zeros_like(v.real)
    return np.concatenate([v.real, im]).astype(float)


def linear_solve(m, rhs, tol=1e-10):
    """Solve ``m x = rhs`` with a residual check."""
    m = _square(m)
    rhs = np.asarray(rhs)
    if rhs.shape[0] != m.shape[0]:
        raise DimensionMismatch('right-hand side has wrong leading dimension')
    try:
        with np.errstate(divide='ignore', invalid='ignore'):
            x = la.solve(m, rhs, check_finite=False)
    except (la.LinAlgError, ValueError) as exc:
        raise SingularSystemError(str(exc)) from exc
    if not np.all(np.isfinite(x)):
        raise SingularSystemError('solution is not finite')
    resid = np.linalg.norm(m @ x - rhs)
    bound = tol * np.linalg.norm(m, 2) * max(np.linalg.norm(x), 1e-300)
    if resid > max(bound, 1e-300) and resid > tol * np.linalg.norm(rhs):
        raise SingularSystemError(f'residual {resid:.3e} exceeds tolerance')
    return x
