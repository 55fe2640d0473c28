"""Noise ensembles ``X`` and deterministic shifts ``A``.

Every sample is a pure function of ``(spec, master_seed, trial_index)``: each
trial owns a Philox counter stream keyed by the pair, and entries consume the
stream in row-major order, so trial ``t`` is reproducible in isolation and
independently of how trials are scheduled.
"""
import json
import math
from dataclasses import dataclass, field as dc_field

import numpy as np
from scipy import integrate

from .errors import DimensionMismatch, InvalidParameter

__all__ = [
    'EnsembleSpec', 'ShiftSpec', 'SeedStream', 'sample_matrix',
    'density_bound', 'build_shift', 'load_shift_json', 'dump_shift_json',
    'ENSEMBLE_ALIASES', 'ensemble_from_name',
]

FIELDS = ('real', 'complex')
DISTS = ('gaussian', 'uniform', 'smoothed_bernoulli', 'cauchy')

_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class SeedStream:
    master_seed: int
    trial_index: int = 0

    def generator(self):
        key = (self.master_seed & _MASK64) | ((self.trial_index & _MASK64) << 64)
        return np.random.Generator(np.random.Philox(key=key))

    def uniforms(self, count):
        """``count`` uniforms on ``(0, 1]`` (never exactly zero)."""
        return 1.0 - self.generator().random(count)


@dataclass(frozen=True)
class EnsembleSpec:
    """Law of ``X``: entries i.i.d. with ``sqrt(N) X_ij`` drawn from ``dist``.

    Real fields use a unit-variance law; complex fields draw real and
    imaginary parts independently from the same law scaled by ``1/sqrt(2)``,
    so that ``E|sqrt(N) X_ij|^2 = 1`` and ``E (sqrt(N) X_ij)^2 = 0``.
    ``width`` is only used by ``smoothed_bernoulli``.
    """
    field: str = 'complex'
    dist: str = 'gaussian'
    n: int = 64
    width: float = 0.1

    def __post_init__(self):
        if self.field not in FIELDS:
            raise InvalidParameter(f'field must be one of {FIELDS}')
        if self.dist not in DISTS:
            raise InvalidParameter(f'dist must be one of {DISTS}')
        if int(self.n) < 1:
            raise InvalidParameter('n must be positive')
        if self.dist == 'smoothed_bernoulli' and not 0 < self.width < math.sqrt(3):
            raise InvalidParameter('smoothed_bernoulli width must lie in (0, sqrt(3))')

    @property
    def is_complex(self):
        return self.field == 'complex'

    @property
    def beta(self):
        return 2 if self.is_complex else 1

    @property
    def component_scale(self):
        return 1 / math.sqrt(2) if self.is_complex else 1.0

    @property
    def density_bound(self):
        return density_bound(self)

    def with_n(self, n):
        return EnsembleSpec(self.field, self.dist, int(n), self.width)

    # -- analytic law of one real component of sqrt(N) X_ij ------------------

    def _unit_cdf(self, x):
        from scipy.special import ndtr
        x = np.asarray(x, dtype=float)
        if self.dist == 'gaussian':
            return ndtr(x)
        if self.dist == 'uniform':
            return np.clip((x + math.sqrt(3)) / (2 * math.sqrt(3)), 0, 1)
        if self.dist == 'cauchy':
            return 0.5 + np.arctan(x) / math.pi
        a, w = _sb_center(self.width), self.width
        lo = np.clip((x + a + w / 2) / w, 0, 1)
        hi = np.clip((x - a + w / 2) / w, 0, 1)
        return 0.5 * (lo + hi)

    def component_cdf(self, x):
        """CDF of one real component of ``sqrt(N) X_ij``."""
        return self._unit_cdf(np.asarray(x) / self.component_scale)

    def moment(self, p):
        """``E|sqrt(N) X_ij|^p``; ``math.inf`` for the Cauchy law."""
        if self.dist == 'cauchy':
            return math.inf
        if not self.is_complex:
            return _real_abs_moment(self.dist, self.width, p)
        if self.dist == 'gaussian':
            return math.gamma(1 + p / 2)
        c = self.component_scale
        total = 0.0
        # the density is constant on each rectangle of bands, so integrate piecewise
        for (a0, a1, da) in _bands(self.dist, self.width):
            for (b0, b1, db) in _bands(self.dist, self.width):
                val, _ = integrate.dblquad(
                    lambda y, x: (c * c * (x * x + y * y)) ** (p / 2),
                    a0, a1, b0, b1, epsabs=1e-13, epsrel=1e-12)
                total += val * da * db
        return total

    def moments(self, orders=(2, 4, 6, 8)):
        return {p: self.moment(p) for p in orders}


def _sb_center(width):
    return math.sqrt(1 - width * width / 12)


def _bands(dist, width):
    """``(lo, hi, density)`` intervals on which the unit law has constant density."""
    if dist == 'uniform':
        r3 = math.sqrt(3)
        return [(-r3, r3, 1 / (2 * r3))]
    a = _sb_center(width)
    return [(-a - width / 2, -a + width / 2, 1 / (2 * width)),
            (a - width / 2, a + width / 2, 1 / (2 * width))]


def _real_abs_moment(dist, width, p):
    if dist == 'gaussian':
        return 2 ** (p / 2) * math.gamma((p + 1) / 2) / math.sqrt(math.pi)
    if dist == 'uniform':
        return 3 ** (p / 2) / (p + 1)
    a = _sb_center(width)
    return ((a + width / 2) ** (p + 1) - (a - width / 2) ** (p + 1)) / (width * (p + 1))


def density_bound(spec):
    """Supremum of the density of one real component of ``sqrt(N) X_ij``."""
    if spec.dist == 'gaussian':
        bound = 1 / math.sqrt(2 * math.pi)
    elif spec.dist == 'uniform':
        bound = 1 / (2 * math.sqrt(3))
    elif spec.dist == 'cauchy':
        bound = 1 / math.pi
    else:
        bound = 1 / (2 * spec.width)
    return bound / spec.component_scale


def _unit_draws(dist, width, u):
    """Map a flat array of uniforms to unit-variance draws (one per uniform)."""
    if dist == 'gaussian':
        m = u.size // 2
        r = np.sqrt(-2.0 * np.log(u[:m]))
        theta = 2.0 * math.pi * u[m:2 * m]
        return np.concatenate([r * np.cos(theta), r * np.sin(theta)])
    if dist == 'uniform':
        return math.sqrt(3) * (2.0 * u - 1.0)
    if dist == 'cauchy':
        return np.tan(math.pi * (u - 0.5))
    m = u.size // 2
    sign = np.where(u[:m] <= 0.5, -1.0, 1.0)
    return sign * _sb_center(width) + width * (u[m:2 * m] - 0.5)


def _uniforms_needed(dist, count):
    if dist == 'gaussian':
        return 2 * ((count + 1) // 2)
    if dist == 'smoothed_bernoulli':
        return 2 * count
    return count


def sample_matrix(spec, stream):
    """Draw ``X`` (``n x n``) for one trial; deterministic in ``(spec, stream)``."""
    n = spec.n
    count = n * n * (2 if spec.is_complex else 1)
    u = stream.uniforms(_uniforms_needed(spec.dist, count))
    draws = _unit_draws(spec.dist, spec.width, u)[:count]
    draws = draws * (spec.component_scale / math.sqrt(n))
    if spec.is_complex:
        return (draws[:n * n] + 1j * draws[n * n:]).reshape(n, n)
    return draws.reshape(n, n)


def sample_batch(spec, master_seed, trial_indices):
    """Stack of samples for the given trial indices."""
    return np.stack([sample_matrix(spec, SeedStream(master_seed, t))
                     for t in trial_indices])


ENSEMBLE_ALIASES = {
    'ginibre-complex': ('complex', 'gaussian'),
    'ginibre-real': ('real', 'gaussian'),
    'uniform-complex': ('complex', 'uniform'),
    'uniform-real': ('real', 'uniform'),
    'bernoulli-complex': ('complex', 'smoothed_bernoulli'),
    'bernoulli-real': ('real', 'smoothed_bernoulli'),
    'cauchy-complex': ('complex', 'cauchy'),
    'cauchy-real': ('real', 'cauchy'),
}


def ensemble_from_name(name, n, width=0.1):
    try:
        fld, dist = ENSEMBLE_ALIASES[name]
    except KeyError:
        raise InvalidParameter(
            f'unknown ensemble {name!r}; choose from {sorted(ENSEMBLE_ALIASES)}') from None
    return EnsembleSpec(fld, dist, int(n), width)


@dataclass(frozen=True)
class ShiftSpec:
    """Deterministic shift: ``scalar`` (payload z gives z*I), ``diagonal``
    (payload is the diagonal) or ``dense`` (payload is the matrix)."""
    kind: str = 'scalar'
    payload: object = 0.0
    meta: dict = dc_field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.kind not in ('scalar', 'dense', 'diagonal'):
            raise InvalidParameter(f'unknown shift kind {self.kind!r}')

    @property
    def norm_bound(self):
        if self.kind == 'scalar':
            return abs(complex(self.payload))
        if self.kind == 'diagonal':
            d = np.asarray(self.payload)
            return float(np.max(np.abs(d))) if d.size else 0.0
        return float(np.linalg.norm(np.asarray(self.payload), 2))

    @property
    def is_real(self):
        return not np.any(np.imag(np.asarray(self.payload)) != 0)


def build_shift(spec, n):
    if spec.kind == 'scalar':
        z = complex(spec.payload)
        dtype = float if z.imag == 0 else complex
        return (z.real if z.imag == 0 else z) * np.eye(n, dtype=dtype)
    payload = np.asarray(spec.payload)
    if spec.kind == 'diagonal':
        if payload.shape != (n,):
            raise DimensionMismatch(f'diagonal payload has shape {payload.shape}, need ({n},)')
        return np.diag(payload)
    if payload.shape != (n, n):
        raise DimensionMismatch(f'dense payload has shape {payload.shape}, need ({n}, {n})')
    return payload.copy()


def load_shift_json(path):
    """Read a dense matrix stored as ``{"rows", "cols", "complex", "entries"}``."""
    with open(path) as fh:
        doc = json.load(fh)
    return shift_from_dict(doc)


def shift_from_dict(doc):
    try:
        rows, cols = int(doc['rows']), int(doc['cols'])
        is_complex = bool(doc['complex'])
        entries = doc['entries']
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidParameter(f'malformed shift matrix document: {exc}') from exc
    if len(entries) != rows * cols:
        raise DimensionMismatch(f'expected {rows * cols} entries, got {len(entries)}')
    vals = []
    for e in entries:
        if isinstance(e, (list, tuple)):
            re, im = float(e[0]), float(e[1]) if len(e) > 1 else 0.0
        else:
            re, im = float(e), 0.0
        vals.append(complex(re, im))
    mat = np.array(vals, dtype=complex).reshape(rows, cols)
    if not is_complex:
        mat = mat.real.copy()
    return mat


def dump_shift_json(matrix, path):
    matrix = np.asarray(matrix)
    doc = {
        'rows': int(matrix.shape[0]),
        'cols': int(matrix.shape[1]),
        'complex': bool(np.iscomplexobj(matrix)),
        'entries': [[float(x.real), float(x.imag)] for x in matrix.ravel().astype(complex)],
    }
    with open(path, 'w') as fh:
        json.dump(doc, fh)
