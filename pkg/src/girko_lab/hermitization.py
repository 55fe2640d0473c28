"""Hermitization ``H_z`` of ``B - z`` and the identities built on it.

Indices are 0-based throughout: row ``j`` of ``B`` is ``B[j]`` and the minor
chain ``J^(j-1) B`` is ``B`` with rows ``0..j-1`` removed.
"""
from dataclasses import dataclass

import numpy as np

from . import linalg
from .errors import IndexOutOfRange, InvalidParameter, NonUnitary

__all__ = [
    'Hermitization', 'SchurMinorReport', 'QMatrixReport', 'hermitize',
    'hermitian_block', 'singular_system', 'resolvent_trace',
    'resolvent_trace_dense', 'count_below', 'minor', 'padded_singular_values',
    'schur_minor_report', 'q_spectral_matrix',
]


@dataclass(frozen=True)
class Hermitization:
    base: np.ndarray
    z: complex
    h: np.ndarray


def hermitian_block(y):
    """``[[0, Y], [Y^*, 0]]`` for a possibly rectangular ``Y``."""
    y = np.asarray(y)
    m, n = y.shape
    dtype = np.result_type(y.dtype, float)
    h = np.zeros((m + n, m + n), dtype=dtype)
    h[:m, m:] = y
    h[m:, :m] = y.conj().T
    return h


def hermitize(b, z=0.0):
    b = np.asarray(b)
    if b.ndim != 2 or b.shape[0] != b.shape[1]:
        raise InvalidParameter('hermitize expects a square matrix')
    shifted = b - z * np.eye(b.shape[0])
    return Hermitization(b, complex(z), hermitian_block(shifted))


def singular_system(b, z=0.0):
    """Singular system of ``B - z`` (ascending ``lambda_1^z <= ...``)."""
    b = np.asarray(b)
    return linalg.svd(b - z * np.eye(b.shape[0]))


def resolvent_trace(b, z, eta, values=None):
    """``<G_z(i eta)> = (i/N) sum_i eta / (lambda_i^2 + eta^2)``.

    ``<.>`` is the normalized trace over the ``2N``-dimensional space. Pass
    precomputed singular ``values`` of ``B - z`` to skip the SVD.
    """
    if eta <= 0:
        raise InvalidParameter('eta must be positive')
    if values is None:
        values = singular_system(b, z).values
    values = np.asarray(values)
    return 1j * float(np.mean(eta / (values ** 2 + eta ** 2)))


def resolvent_trace_dense(b, z, eta):
    """Same quantity through a dense inverse of ``H_z - i eta``; for tests."""
    h = hermitize(b, z).h
    g = np.linalg.inv(h - 1j * eta * np.eye(h.shape[0]))
    return complex(np.trace(g) / h.shape[0])


def count_below(values, eta):
    return int(np.count_nonzero(np.asarray(values) <= eta))


def minor(b, rows):
    """``J^(I) B``: ``B`` with the rows listed in ``rows`` removed."""
    b = np.asarray(b)
    rows = sorted(set(int(r) for r in rows))
    if any(r < 0 or r >= b.shape[0] for r in rows):
        raise IndexOutOfRange(f'row indices {rows} outside 0..{b.shape[0] - 1}')
    keep = [r for r in range(b.shape[0]) if r not in rows]
    return b[keep]


def padded_singular_values(m, n=None):
    """Singular values of an ``(n - p) x n`` matrix padded with ``p`` zeros.

    These are the non-negative eigenvalues ``lambda^(I)`` of the
    hermitization of the minor, kernel included, in ascending order.
    """
    m = np.asarray(m)
    n = m.shape[1] if n is None else n
    s = linalg.singular_values(m) if m.shape[0] else np.zeros(0)
    return np.concatenate([np.zeros(n - s.size), s])


@dataclass(frozen=True)
class SchurMinorReport:
    j: int
    eta: float
    c: np.ndarray
    w: np.ndarray
    singular_values: np.ndarray
    lhs: complex
    rhs: complex
    residual: float

    def small_value_bounds_hold(self, k):
        """If ``lambda_k <= eta`` then ``c_i >= 1/(2 N eta)`` for ``i <= k``."""
        n = self.c.size
        if k < 1 or self.singular_values[k - 1] > self.eta:
            return True
        lower = 1.0 / (2 * n * self.eta)
        upper = 1.0 / (n * self.eta)
        head = self.c[:k]
        return bool(np.all(head >= lower * (1 - 1e-12))
                    and np.all(head <= upper * (1 + 1e-12)))


def schur_minor_report(b, j, eta):
    """Evaluate ``1 / G^(j-1)_jj`` directly and through the minor expansion.

    The direct side inverts ``H^(j-1) - i eta`` where ``H^(j-1)`` hermitizes
    ``B`` with rows ``0..j-1`` removed; the expansion side is
    ``-i eta - i sum_i c_i |w_i|^2`` over the singular system of the minor
    with rows ``0..j`` removed (kernel included).
    """
    b = np.asarray(b)
    n = b.shape[0]
    if not 0 <= j < n:
        raise IndexOutOfRange(f'row index {j} outside 0..{n - 1}')
    if eta <= 0:
        raise InvalidParameter('eta must be positive')
    chain = b[j:]
    h = hermitian_block(chain)
    rhs_vec = np.zeros(h.shape[0], dtype=complex)
    rhs_vec[0] = 1.0
    g_col = linalg.linear_solve(h - 1j * eta * np.eye(h.shape[0]), rhs_vec)
    lhs = 1.0 / g_col[0]

    sub = b[j + 1:]
    if sub.shape[0]:
        _, s, vh = np.linalg.svd(sub, full_matrices=True)
        lam = np.concatenate([np.zeros(n - s.size), s[::-1]])
        vecs = np.concatenate([vh[s.size:], vh[:s.size][::-1]])
    else:
        lam = np.zeros(n)
        vecs = np.eye(n, dtype=b.dtype)
    # rows of vecs are v_i^*, so (vecs @ B^* e_j)_i = v_i^* B^* e_j
    w = np.sqrt(n) * (vecs @ b[j].conj())
    c = n * eta / ((n * lam) ** 2 + (n * eta) ** 2)
    rhs = -1j * eta - 1j * np.sum(c * np.abs(w) ** 2)
    residual = abs(lhs - rhs) / abs(lhs)
    return SchurMinorReport(j, float(eta), c, w, lam, complex(lhs), complex(rhs),
                            float(residual))


@dataclass(frozen=True)
class QMatrixReport:
    q: np.ndarray
    m: np.ndarray
    k: int

    @property
    def top_bound_holds(self):
        return bool(self.m[-1] <= 1 + 1e-10)

    @property
    def middle_bound_holds(self):
        return bool(self.m[self.k] >= 1 / np.sqrt(self.k + 1) - 1e-10)

    @property
    def square_sum(self):
        return float(np.sum(self.m ** 2))


def q_spectral_matrix(u, k, tol=1e-10):
    """``Q = J[P_k] J[U] [I_N; 0]`` and its ascending singular values.

    ``P_k = [I_k, 0]`` selects the first ``k`` coordinates, so ``Q`` stacks the
    real and imaginary parts of the first ``k`` rows of ``U``.
    """
    u = np.asarray(u)
    n = u.shape[0]
    if u.shape != (n, n):
        raise InvalidParameter('U must be square')
    if np.linalg.norm(u.conj().T @ u - np.eye(n), 2) > tol:
        raise NonUnitary('U is not unitary within tolerance')
    if not 1 <= k or 2 * k > n:
        raise InvalidParameter('need 1 <= k and 2k <= N')
    p = np.zeros((k, n))
    p[:, :k] = np.eye(k)
    embed = np.vstack([np.eye(n), np.zeros((n, n))])
    q = linalg.realify(p) @ linalg.realify(u) @ embed
    m = linalg.singular_values(q)
    return QMatrixReport(q, m, k)
