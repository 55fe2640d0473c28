"""Reproducible Monte Carlo experiments on ``X + A``.

Every trial draws its matrix from ``(ensemble, master_seed, trial_index)``
alone, trials are processed in fixed-size chunks, and the per-trial results
are folded in trial-index order. The number of worker processes therefore
changes wall time but never a single output bit.
"""
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import stats

from . import linalg
from .ensembles import EnsembleSpec, SeedStream, ShiftSpec, build_shift, sample_matrix
from .errors import (InsufficientData, InsufficientSamples, InvalidParameter,
                     NumericalFailure)
from .spectral import interlacing_report, overlaps

__all__ = [
    'TailConfig', 'TailEstimate', 'SlopeFit', 'WegnerEstimate', 'Domain',
    'OverlapReport', 'OverlapShapeReport', 'RealCountEstimate',
    'MomentEstimate', 'RunManifest', 'run_tail', 'fit_slope',
    'bootstrap_slope', 'run_wegner', 'run_overlap_sum', 'run_overlap_shape',
    'run_real_count', 'run_resolvent_moment', 'clopper_pearson',
    'inverse_gamma2_cdf', 'median_of_means', 'CHUNK', 'FAILURE_BUDGET',
]

#: trials per work unit; fixed so that scheduling never changes arithmetic
CHUNK = 250
#: largest tolerated fraction of failed trials
FAILURE_BUDGET = 1e-3
MOM_BLOCKS = 20
SPOT_CHECK_EVERY = 100


# -- trial scheduling --------------------------------------------------------

def _chunks(trials):
    return [(lo, min(lo + CHUNK, trials)) for lo in range(0, trials, CHUNK)]


def _map_trials(func, payload, trials, workers=1):
    """Apply ``func(payload, lo, hi)`` over trial chunks, results in order.

    ``func`` returns one entry per trial, ``None`` marking a failed trial.
    """
    chunks = _chunks(trials)
    if workers <= 1 or len(chunks) <= 1:
        parts = [func(payload, lo, hi) for lo, hi in chunks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(func, payload, lo, hi) for lo, hi in chunks]
            parts = [f.result() for f in futures]
    out = []
    for part in parts:
        out.extend(part)
    return out


def _sample(payload, t):
    spec, seed, a, z = payload['ensemble'], payload['seed'], payload['a'], payload['z']
    x = sample_matrix(spec, SeedStream(seed, t))
    scale = payload.get('scale', 1.0)
    b = (x if scale == 1.0 else scale * x) + a
    if z != 0:
        b = b - z * np.eye(spec.n)
    return b


def _check_failures(failures, trials):
    if trials and failures / trials > FAILURE_BUDGET:
        raise NumericalFailure(
            f'{failures} of {trials} trials failed (budget {FAILURE_BUDGET:.1%})')


def _payload(ensemble, shift, z, seed):
    shift = ShiftSpec() if shift is None else shift
    return {'ensemble': ensemble, 'seed': int(seed),
            'a': build_shift(shift, ensemble.n), 'z': complex(z)}


# -- binomial intervals ------------------------------------------------------

def clopper_pearson(k, n, alpha=0.05):
    """Exact two-sided binomial interval through Beta quantiles."""
    if not 0 <= k <= n or n < 1:
        raise InvalidParameter('need 0 <= k <= n and n >= 1')
    lo = 0.0 if k == 0 else float(stats.beta.ppf(alpha / 2, k, n - k + 1))
    hi = 1.0 if k == n else float(stats.beta.ppf(1 - alpha / 2, k + 1, n - k))
    return lo, hi


# -- smallest singular value tails -------------------------------------------

@dataclass(frozen=True)
class TailConfig:
    """Tail experiment for ``P(N lambda_k(X + A - z) <= s)``.

    ``shift`` builds ``A``; ``z`` is subtracted on top of it.
    """
    ensemble: EnsembleSpec
    k: int = 1
    s_grid: tuple = tuple(np.round(np.geomspace(0.05, 2.0, 40), 12))
    trials: int = 10_000
    master_seed: int = 0
    shift: ShiftSpec = field(default_factory=ShiftSpec)
    z: complex = 0.0

    def __post_init__(self):
        s = np.asarray(self.s_grid, dtype=float)
        if s.ndim != 1 or s.size == 0:
            raise InvalidParameter('s_grid must be a non-empty 1-d sequence')
        if np.any(s <= 0) or np.any(s > 2) or np.any(np.diff(s) <= 0):
            raise InvalidParameter('s_grid must be strictly ascending inside (0, 2]')
        if self.trials < 100:
            raise InvalidParameter('trials must be at least 100')
        if not 1 <= self.k <= self.ensemble.n:
            raise InvalidParameter(f'k must lie in 1..{self.ensemble.n}')
        object.__setattr__(self, 's_grid', tuple(float(v) for v in s))

    @property
    def beta(self):
        return self.ensemble.beta

    @property
    def target_exponent(self):
        """``beta k^2``, or 2 for real noise with a genuinely complex shift at k=1."""
        if self.ensemble.beta == 1 and self.k == 1 and complex(self.z).imag != 0:
            return 2
        return self.beta * self.k ** 2


@dataclass(frozen=True)
class SlopeFit:
    slope: float
    intercept: float
    stderr: float
    window: tuple
    points: int


@dataclass
class TailEstimate:
    s: np.ndarray
    counts: np.ndarray
    trials: int
    failures: int
    samples: np.ndarray = field(repr=False)
    k: int = 1
    beta: int = 2
    interlacing_violations: int = 0
    n_dim: int = 1

    @property
    def p_hat(self):
        return self.counts / self.trials

    @property
    def eta(self):
        """Spectral parameters ``eta = s / N`` matching the grid."""
        return self.s / self.n_dim

    def intervals(self, alpha=0.05):
        cis = [clopper_pearson(int(c), self.trials, alpha) for c in self.counts]
        return np.array([c[0] for c in cis]), np.array([c[1] for c in cis])

    def table(self):
        lo, hi = self.intervals()
        return [(float(s), int(c), int(self.trials), float(p), float(l), float(h))
                for s, c, p, l, h in zip(self.s, self.counts, self.p_hat, lo, hi)]


def _tail_chunk(payload, lo, hi):
    n, k = payload['ensemble'].n, payload['k']
    mats, out = [], []
    for t in range(lo, hi):
        mats.append(_sample(payload, t))
    stack = np.stack(mats)
    try:
        lam = linalg.singular_values(stack)
        values = list(n * lam[:, k - 1])
    except NumericalFailure:
        values = []
        for m in mats:
            try:
                values.append(n * linalg.singular_values(m)[k - 1])
            except NumericalFailure:
                values.append(None)
    for t, v in zip(range(lo, hi), values):
        if v is None or not np.isfinite(v):
            out.append(None)
            continue
        spot = None
        if t % SPOT_CHECK_EVERY == 0 and n > 1:
            spot = interlacing_report(mats[t - lo], [], t % n).ok
        out.append((float(v), spot))
    return out


def run_tail(cfg, workers=1):
    """Empirical distribution of ``N lambda_k`` on the configured grid."""
    payload = _payload(cfg.ensemble, cfg.shift, cfg.z, cfg.master_seed)
    payload['k'] = cfg.k
    results = _map_trials(_tail_chunk, payload, cfg.trials, workers)
    good = [r for r in results if r is not None]
    failures = len(results) - len(good)
    _check_failures(failures, cfg.trials)
    samples = np.array([r[0] for r in good])
    violations = sum(1 for r in good if r[1] is False)
    s = np.asarray(cfg.s_grid)
    counts = np.searchsorted(np.sort(samples), s, side='right')
    return TailEstimate(s, counts.astype(int), len(good), failures, samples,
                        cfg.k, cfg.beta, violations, cfg.ensemble.n)


def _wls(x, y, w, cov):
    """Weighted fit of ``y`` on ``x`` with a sandwich standard error.

    ``cov`` is the covariance of ``y``; the cells of an empirical CDF are
    strongly correlated, so the naive ``1/sqrt(sum w (x - xbar)^2)`` would
    understate the spread of the slope.
    """
    sw = w.sum()
    xm, ym = (w * x).sum() / sw, (w * y).sum() / sw
    sxx = (w * (x - xm) ** 2).sum()
    if sxx <= 0:
        raise InsufficientData('window points share one abscissa')
    slope = (w * (x - xm) * (y - ym)).sum() / sxx
    g = w * (x - xm) / sxx
    return slope, ym - slope * xm, math.sqrt(max(g @ cov @ g, 0.0))


def _window_mask(s, counts, trials, window):
    lo, hi = window
    return (s >= lo) & (s <= hi) & (counts >= 5) & (counts < trials)


def fit_slope(est, window):
    """Weighted least squares of ``log p_hat`` against ``log s``.

    Weights are the delta-method inverse variances ``n p / (1 - p)``; cells
    with fewer than five hits or with ``p_hat = 1`` are dropped. The standard
    error propagates the full covariance of the cumulative counts.
    """
    s, counts, n = np.asarray(est.s), np.asarray(est.counts), est.trials
    mask = _window_mask(s, counts, n, window)
    if mask.sum() < 4:
        raise InsufficientData(
            f'only {int(mask.sum())} usable grid points in window {tuple(window)}')
    p = counts[mask] / n
    w = n * p / (1 - p)
    # delta method: Cov(log p_i, log p_j) = (p_min(i,j) - p_i p_j) / (n p_i p_j)
    cov = (np.minimum.outer(p, p) - np.outer(p, p)) / (n * np.outer(p, p))
    slope, intercept, stderr = _wls(np.log(s[mask]), np.log(p), w, cov)
    return SlopeFit(float(slope), float(intercept), float(stderr),
                    tuple(float(v) for v in window), int(mask.sum()))


def bootstrap_slope(est, window, resamples=200, seed=0):
    """Standard deviation of the fitted slope over trial resamples."""
    rng = np.random.Generator(np.random.Philox(key=seed))
    s = np.asarray(est.s)
    samples = np.asarray(est.samples)
    slopes = []
    for _ in range(resamples):
        draw = np.sort(rng.choice(samples, samples.size, replace=True))
        counts = np.searchsorted(draw, s, side='right')
        boot = TailEstimate(s, counts, samples.size, 0, draw, est.k, est.beta,
                            n_dim=est.n_dim)
        try:
            slopes.append(fit_slope(boot, window).slope)
        except InsufficientData:
            continue
    if len(slopes) < 2:
        raise InsufficientData('too few successful bootstrap fits')
    return float(np.std(slopes, ddof=1))


# -- Wegner estimate ---------------------------------------------------------

@dataclass(frozen=True)
class WegnerEstimate:
    z: complex
    r: float
    n: int
    trials: int
    mean_count: float
    normalized_density: float
    ci_lo: float
    ci_hi: float
    failures: int = 0


def _eig_chunk(payload, lo, hi):
    out = []
    for t in range(lo, hi):
        b = _sample(payload, t)
        try:
            sigma = linalg.eigenvalues(b)
        except NumericalFailure:
            out.append(None)
            continue
        out.append(payload['reduce'](sigma, b))
    return out


class _DiskCount:
    def __init__(self, z, r):
        self.z, self.r = complex(z), float(r)

    def __call__(self, sigma, b):
        if self.r == 0:
            return 0
        return int(np.count_nonzero(np.abs(sigma - self.z) <= self.r))


def run_wegner(ensemble, z, r, trials, seed, shift=None, workers=1):
    """Mean number of eigenvalues of ``X + A`` in the disk ``D(z, r)``."""
    n = ensemble.n
    if r < 0 or r > n ** -0.5 * (1 + 1e-12):
        raise InvalidParameter('radius must lie in [0, N^(-1/2)]')
    payload = _payload(ensemble, shift, 0.0, seed)
    payload['reduce'] = _DiskCount(z, r)
    results = _map_trials(_eig_chunk, payload, trials, workers)
    counts = np.array([c for c in results if c is not None], dtype=float)
    failures = trials - counts.size
    _check_failures(failures, trials)
    mean = float(counts.mean())
    half = 1.96 * float(counts.std(ddof=1)) / math.sqrt(counts.size) if counts.size > 1 else 0.0
    scale = n * r * r
    density = mean / scale if scale > 0 else 0.0
    lo = max(mean - half, 0.0)
    return WegnerEstimate(complex(z), float(r), n, int(counts.size), mean, density,
                          lo / scale if scale > 0 else 0.0,
                          (mean + half) / scale if scale > 0 else 0.0, failures)


# -- overlaps ----------------------------------------------------------------

@dataclass(frozen=True)
class Domain:
    """Disk (``half`` is the radius) or axis-parallel square (``half`` is half the side)."""
    kind: str = 'disk'
    center: complex = 0.0
    half: float = 0.2

    def __post_init__(self):
        if self.kind not in ('disk', 'square'):
            raise InvalidParameter(f'unknown domain kind {self.kind!r}')
        if self.half <= 0:
            raise InvalidParameter('domain size must be positive')

    @property
    def area(self):
        if self.kind == 'disk':
            return math.pi * self.half ** 2
        return 4 * self.half ** 2

    def contains(self, w):
        d = np.asarray(w) - complex(self.center)
        if self.kind == 'disk':
            return np.abs(d) <= self.half
        return (np.abs(d.real) <= self.half) & (np.abs(d.imag) <= self.half)


def median_of_means(x, blocks=MOM_BLOCKS):
    """Median of the means of ``blocks`` contiguous blocks (index order)."""
    x = np.asarray(x, dtype=float)
    if x.size < blocks:
        raise InsufficientData(f'need at least {blocks} values for median-of-means')
    return float(np.median([b.mean() for b in np.array_split(x, blocks)]))


@dataclass
class OverlapReport:
    domain: Domain
    n: int
    trials: int
    sums: np.ndarray = field(repr=False)
    counts: np.ndarray = field(repr=False)
    sigma: np.ndarray = field(repr=False)
    o_diag: np.ndarray = field(repr=False)
    failures: int = 0

    @property
    def mean(self):
        return float(self.sums.mean())

    @property
    def median_of_means(self):
        return median_of_means(self.sums)

    @property
    def conditional_mean(self):
        """``E[O_ii | sigma_i in D]`` as a ratio of pooled sums."""
        total = self.counts.sum()
        return float(self.sums.sum() / total) if total else math.nan

    @property
    def baseline(self):
        """``N (1 - |sigma|^2)`` averaged over the enclosed eigenvalues."""
        if self.sigma.size == 0:
            return math.nan
        return float(np.mean(self.n * (1 - np.abs(self.sigma) ** 2)))

    @property
    def normalized(self):
        return self.o_diag / (self.n * (1 - np.abs(self.sigma) ** 2))


class _OverlapReduce:
    def __init__(self, domain):
        self.domain = domain

    def __call__(self, b):
        d = linalg.complex_eig(b)
        diag = overlaps(d).diagonal
        inside = self.domain.contains(d.sigma)
        return d.sigma[inside], diag[inside]


def _overlap_chunk(payload, lo, hi):
    out = []
    for t in range(lo, hi):
        b = _sample(payload, t)
        try:
            out.append(payload['reduce'](b))
        except NumericalFailure:
            out.append(None)
    return out


def run_overlap_sum(ensemble, domain, trials, seed, shift=None, noise_scale=1.0,
                    workers=1):
    """Per-trial ``sum_{sigma_i in D} O_ii`` with heavy-tail-aware summaries.

    ``noise_scale`` multiplies ``X``; small values probe the near-normal regime.
    """
    payload = _payload(ensemble, shift, 0.0, seed)
    payload['scale'] = float(noise_scale)
    payload['reduce'] = _OverlapReduce(domain)
    results = _map_trials(_overlap_chunk, payload, trials, workers)
    good = [r for r in results if r is not None]
    failures = trials - len(good)
    _check_failures(failures, trials)
    sums = np.array([float(np.sum(o)) for _, o in good])
    counts = np.array([o.size for _, o in good])
    sigma = np.concatenate([s for s, _ in good]) if good else np.zeros(0, complex)
    o_diag = np.concatenate([o for _, o in good]) if good else np.zeros(0)
    return OverlapReport(domain, ensemble.n, len(good), sums, counts, sigma,
                         o_diag, failures)


def inverse_gamma2_cdf(y):
    """CDF of ``1/gamma_2``: ``(1 + 1/y) exp(-1/y)`` for ``y > 0``."""
    y = np.asarray(y, dtype=float)
    out = np.zeros_like(y)
    pos = y > 0
    inv = 1 / y[pos]
    out[pos] = (1 + inv) * np.exp(-inv)
    return out


@dataclass(frozen=True)
class OverlapShapeReport:
    ks: float
    pvalue: float
    samples: np.ndarray = field(repr=False)
    trials: int = 0


def run_overlap_shape(ensemble, z, samples, seed, radius=0.2, max_trials=None,
                      workers=1):
    """KS distance of ``O_ii / (N (1 - |sigma_i|^2))`` near ``z`` to ``1/gamma_2``.

    Trials run in chunks until ``samples`` normalized overlaps are collected;
    the first ``samples`` values in trial order are used.
    """
    if not (ensemble.is_complex and ensemble.dist == 'gaussian'):
        raise InvalidParameter('overlap shape test needs complex Ginibre noise')
    if abs(z) > 0.5:
        raise InvalidParameter('|z| must be at most 0.5')
    n = ensemble.n
    domain = Domain('disk', complex(z), radius)
    per_trial = max(n * radius * radius, 1e-3)
    max_trials = max_trials or int(20 * samples / per_trial) + CHUNK
    payload = _payload(ensemble, None, 0.0, seed)
    payload['reduce'] = _OverlapReduce(domain)
    collected, trials, failures = [], 0, 0
    batch = max(CHUNK, int(1.2 * samples / per_trial) // CHUNK * CHUNK)
    while sum(v.size for v in collected) < samples and trials < max_trials:
        stop = min(trials + batch, max_trials)
        part = _map_trials(_offset_chunk, (payload, trials), stop - trials, workers)
        for r in part:
            if r is None:
                failures += 1
                continue
            sig, o = r
            collected.append(o / (n * (1 - np.abs(sig) ** 2)))
        trials = stop
    _check_failures(failures, trials)
    values = np.concatenate(collected) if collected else np.zeros(0)
    if values.size < 500:
        raise InsufficientSamples(f'only {values.size} overlaps collected')
    values = values[:samples]
    res = stats.kstest(values, inverse_gamma2_cdf)
    return OverlapShapeReport(float(res.statistic), float(res.pvalue), values, trials)


def _offset_chunk(args, lo, hi):
    payload, offset = args
    return _overlap_chunk(payload, lo + offset, hi + offset)


# -- real eigenvalues ----------------------------------------------------------

@dataclass(frozen=True)
class RealCountEstimate:
    n: int
    trials: int
    mean: float
    normalized: float
    ci_lo: float
    ci_hi: float
    counts: np.ndarray = field(repr=False, default=None)


class _RealCount:
    def __call__(self, sigma, b):
        tol = 1e-9 * np.linalg.norm(b, 2)
        return int(np.count_nonzero(np.abs(sigma.imag) <= tol))


def run_real_count(ensemble, trials, seed, workers=1):
    """Mean number of real eigenvalues, also divided by ``sqrt(N)``."""
    payload = _payload(ensemble, None, 0.0, seed)
    payload['reduce'] = _RealCount()
    results = _map_trials(_eig_chunk, payload, trials, workers)
    counts = np.array([c for c in results if c is not None], dtype=float)
    _check_failures(trials - counts.size, trials)
    mean = float(counts.mean())
    half = 1.96 * float(counts.std(ddof=1)) / math.sqrt(counts.size) if counts.size > 1 else 0.0
    root = math.sqrt(ensemble.n)
    return RealCountEstimate(ensemble.n, int(counts.size), mean, mean / root,
                             (mean - half) / root, (mean + half) / root, counts)


# -- resolvent moments ---------------------------------------------------------

@dataclass(frozen=True)
class MomentEstimate:
    z: complex
    power: float
    trials: int
    moment: float
    ci_lo: float
    ci_hi: float
    values: np.ndarray = field(repr=False, default=None)


class _ResolventTrace:
    def __init__(self, z):
        self.z = complex(z)

    def __call__(self, sigma, b):
        return complex(np.mean(1 / (sigma - self.z)))


def run_resolvent_moment(ensemble, z, delta1, trials, seed, shift=None,
                         resamples=1000, workers=1):
    """``E |<(X + A - z)^{-1}>|^(2 - delta1)`` with a percentile bootstrap CI."""
    if not 0 < delta1 <= 1:
        raise InvalidParameter('delta1 must lie in (0, 1]')
    payload = _payload(ensemble, shift, 0.0, seed)
    payload['reduce'] = _ResolventTrace(z)
    results = _map_trials(_eig_chunk, payload, trials, workers)
    traces = np.array([c for c in results if c is not None], dtype=complex)
    _check_failures(trials - traces.size, trials)
    power = 2 - delta1
    values = np.abs(traces) ** power
    rng = np.random.Generator(np.random.Philox(key=int(seed) & ((1 << 64) - 1)))
    idx = rng.integers(0, values.size, size=(resamples, values.size))
    boot = values[idx].mean(axis=1)
    lo, hi = np.quantile(boot, [0.025, 0.975])
    return MomentEstimate(complex(z), power, int(values.size), float(values.mean()),
                          float(lo), float(hi), values)


# -- manifest ------------------------------------------------------------------

@dataclass
class RunManifest:
    config: dict
    master_seed: int
    code_version: str
    workers: int
    wall_time: dict = field(default_factory=dict)
    failures: dict = field(default_factory=dict)
    outputs: list = field(default_factory=list)

    def to_json(self):
        return json.dumps(asdict(self), indent=2, sort_keys=True, default=str)

    @classmethod
    def from_json(cls, text):
        return cls(**json.loads(text))


class Stopwatch:
    def __init__(self):
        self.start = time.perf_counter()

    def elapsed(self):
        return time.perf_counter() - self.start
