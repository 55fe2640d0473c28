"""Command-line front end: ``girko-lab <command> [flags]``.

Values come from three layers, later ones winning: built-in defaults, an
optional ``--config`` JSON file, explicit flags. The merged configuration is
echoed into a manifest written after every data file, so a manifest can be
fed back through ``--config`` to replay a run.

Exit codes: 0 success, 2 invalid configuration, 3 numerical or I/O failure.
"""
import argparse
import csv
import json
import math
import os
import re
import sys
import time

import numpy as np

from . import __version__, mde, montecarlo as mc, spectral, verify
from .ensembles import (ENSEMBLE_ALIASES, EnsembleSpec, SeedStream, ShiftSpec,
                        ensemble_from_name, load_shift_json, sample_matrix)
from .errors import GirkoLabError, InvalidParameter, NumericalFailure

EXIT_OK, EXIT_CONFIG, EXIT_FAILURE = 0, 2, 3
SEED_ENV = 'GIRKO_LAB_SEED'

TAIL_COLUMNS = ('s', 'count', 'trials', 'p_hat', 'ci_lo', 'ci_hi')
WEGNER_COLUMNS = ('z_re', 'z_im', 'r', 'mean_count', 'norm_density', 'ci_lo', 'ci_hi')

COMMON = {'seed': None, 'workers': 1, 'out': '.', 'plot': False}
DEFAULTS = {
    'tails': {'ensemble': 'ginibre-complex', 'n': 64, 'k': 1, 'trials': 10_000,
              'z': '0', 'shift': None, 'width': 0.1, 's_grid': '0.05:2:40',
              'window': None},
    'wegner': {'ensemble': 'ginibre-complex', 'n': 128, 'z': '0', 'r': None,
               'trials': 5000, 'shift': None, 'width': 0.1},
    'overlaps': {'ensemble': 'ginibre-complex', 'n': 64, 'domain': 'disk',
                 'center': '0', 'size': 0.2, 'trials': 2000, 'shift': None,
                 'width': 0.1},
    'overlap-shape': {'n': 64, 'z': '0', 'samples': 5000, 'radius': 0.2},
    'real-count': {'ensemble': 'ginibre-real', 'n': 64, 'trials': 2000, 'width': 0.1},
    'resolvent-moment': {'ensemble': 'ginibre-complex', 'n': 64, 'z': '0',
                         'delta1': 0.5, 'trials': 5000, 'shift': None,
                         'width': 0.1},
    'girko-check': {'n': 4, 'center': '0', 'r': 0.5, 'grid': 160, 'refine': True},
    'mde-density': {'a': 'zero', 'n': 64, 'z': '0', 'x_grid': '-3:3:601', 'eta0': 1e-6},
    'bulk-map': {'a': 'zero', 'n': 64, 'tau': 0.2, 'grid': 101, 'extent': None},
    'verify': {},
}


class ConfigError(Exception):
    """Invalid configuration; the message names the offending key."""


# -- parsing -----------------------------------------------------------------

def _parser():
    p = argparse.ArgumentParser(prog='girko-lab', description=__doc__.split('\n')[0])
    p.add_argument('--version', action='version', version=f'girko-lab {__version__}')
    sub = p.add_subparsers(dest='command', required=True)
    S = argparse.SUPPRESS

    def cmd(name, help_):
        c = sub.add_parser(name, help=help_, argument_default=S)
        c.add_argument('--config', help='JSON file with default values (or a manifest)')
        c.add_argument('--seed', type=int, help=f'master seed (default ${SEED_ENV} or 0)')
        c.add_argument('--workers', type=int, help='worker processes')
        c.add_argument('--out', help='output directory')
        c.add_argument('--plot', action='store_true', help='also emit a plot script')
        return c

    def noise(c):
        c.add_argument('--ensemble', help=f'one of {", ".join(sorted(ENSEMBLE_ALIASES))}')
        c.add_argument('--n', type=int)
        c.add_argument('--width', type=float, help='smoothed Bernoulli width')

    c = cmd('tails', 'tail of N lambda_k(X + A - z)')
    noise(c)
    c.add_argument('--k', type=int)
    c.add_argument('--trials', type=int)
    c.add_argument('--z')
    c.add_argument('--shift', help='JSON matrix file for A')
    c.add_argument('--s-grid', dest='s_grid', help='lo:hi:count (geometric)')
    c.add_argument('--window', help='slope-fit window lo:hi')

    c = cmd('wegner', 'mean eigenvalue count in a small disk')
    noise(c)
    c.add_argument('--z')
    c.add_argument('--r', type=float, help='radius (default N^-0.75)')
    c.add_argument('--trials', type=int)
    c.add_argument('--shift')

    c = cmd('overlaps', 'sum of diagonal overlaps over a domain')
    noise(c)
    c.add_argument('--domain', choices=['disk', 'square'])
    c.add_argument('--center')
    c.add_argument('--size', type=float, help='radius or half side')
    c.add_argument('--trials', type=int)
    c.add_argument('--shift')

    c = cmd('overlap-shape', 'KS distance of normalized overlaps to 1/gamma_2')
    c.add_argument('--n', type=int)
    c.add_argument('--z')
    c.add_argument('--samples', type=int)
    c.add_argument('--radius', type=float)

    c = cmd('real-count', 'mean number of real eigenvalues')
    noise(c)
    c.add_argument('--trials', type=int)

    c = cmd('resolvent-moment', 'moment of the normalized resolvent trace')
    noise(c)
    c.add_argument('--z')
    c.add_argument('--delta1', type=float)
    c.add_argument('--trials', type=int)
    c.add_argument('--shift')

    c = cmd('girko-check', 'both sides of the log-determinant identity')
    c.add_argument('--n', type=int)
    c.add_argument('--center')
    c.add_argument('--r', type=float)
    c.add_argument('--grid', type=int)
    c.add_argument('--no-refine', dest='refine', action='store_false')

    c = cmd('mde-density', 'self-consistent density of states')
    c.add_argument('--a', help="'zero' or a JSON matrix file")
    c.add_argument('--n', type=int, help='size used with --a zero')
    c.add_argument('--z')
    c.add_argument('--x-grid', dest='x_grid', help='lo:hi:count')
    c.add_argument('--eta0', type=float)

    c = cmd('bulk-map', 'bulk indicator over a grid of z')
    c.add_argument('--a')
    c.add_argument('--n', type=int)
    c.add_argument('--tau', type=float)
    c.add_argument('--grid', type=int)
    c.add_argument('--extent', type=float, help='half width of the z square')

    cmd('verify', 'deterministic property suite')
    return p


def _load_config_file(path, command):
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except (OSError, ValueError) as exc:
        raise ConfigError(f'config: cannot read {path}: {exc}') from exc
    if not isinstance(doc, dict):
        raise ConfigError('config: top level must be a JSON object')
    if 'config' in doc and 'master_seed' in doc:
        doc = dict(doc['config'])
    if doc.get('command', command) != command:
        raise ConfigError(f"command: file is for {doc['command']!r}, not {command!r}")
    doc.pop('command', None)
    return {k.replace('-', '_'): v for k, v in doc.items()}


def _glue_negative_values(argv):
    """Rewrite ``--flag -3:3:601`` as ``--flag=-3:3:601`` so ranges may start negative."""
    out, i = [], 0
    argv = list(argv)
    while i < len(argv):
        tok = argv[i]
        nxt = argv[i + 1] if i + 1 < len(argv) else None
        if (tok.startswith('--') and '=' not in tok and nxt is not None
                and re.match(r'^-[\d.]', nxt)):
            out.append(f'{tok}={nxt}')
            i += 2
        else:
            out.append(tok)
            i += 1
    return out


def parse_config(argv):
    """Merge defaults, optional JSON file and flags into one config dict."""
    args = vars(_parser().parse_args(_glue_negative_values(argv)))
    command = args.pop('command')
    config_path = args.pop('config', None)
    cfg = dict(COMMON)
    cfg.update(DEFAULTS[command])
    if config_path:
        for key, value in _load_config_file(config_path, command).items():
            if key not in cfg:
                raise ConfigError(f'{key}: unknown key for {command!r}')
            cfg[key] = value
    cfg.update(args)
    if cfg['seed'] is None:
        env = os.environ.get(SEED_ENV)
        try:
            cfg['seed'] = int(env) if env else 0
        except ValueError:
            raise ConfigError(f'seed: ${SEED_ENV}={env!r} is not an integer') from None
    _validate(command, cfg)
    cfg['command'] = command
    return cfg


def _complex(key, text):
    try:
        return complex(str(text).replace(' ', '').replace('i', 'j'))
    except ValueError:
        raise ConfigError(f'{key}: cannot parse {text!r} as a complex number') from None


def _range(key, text, parts=3):
    try:
        items = [float(v) for v in str(text).split(':')]
    except ValueError:
        raise ConfigError(f'{key}: expected lo:hi' + (':count' if parts == 3 else '')) from None
    if len(items) != parts:
        raise ConfigError(f'{key}: expected {parts} colon-separated values')
    if parts == 3:
        if items[2] < 2 or items[2] != int(items[2]):
            raise ConfigError(f'{key}: count must be an integer >= 2')
        items[2] = int(items[2])
    if items[1] <= items[0]:
        raise ConfigError(f'{key}: upper end must exceed lower end')
    return items


def _positive(cfg, key, strict=True):
    v = cfg.get(key)
    if v is None or isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f'{key}: expected a number, got {v!r}')
    if (strict and not v > 0) or (not strict and v < 0):
        raise ConfigError(f'{key}: must be {"positive" if strict else "non-negative"}')


def _validate(command, cfg):
    if not isinstance(cfg['workers'], int) or cfg['workers'] < 1:
        raise ConfigError('workers: must be a positive integer')
    if not isinstance(cfg['seed'], int) or cfg['seed'] < 0:
        raise ConfigError('seed: must be a non-negative integer')
    if 'ensemble' in cfg and cfg['ensemble'] not in ENSEMBLE_ALIASES:
        raise ConfigError(f"ensemble: unknown ensemble {cfg['ensemble']!r}")
    for key in ('n', 'trials', 'samples', 'grid'):
        if key in cfg:
            if not isinstance(cfg[key], int) or isinstance(cfg[key], bool) or cfg[key] < 1:
                raise ConfigError(f'{key}: must be a positive integer')
    if 'k' in cfg and not 1 <= cfg['k'] <= cfg['n']:
        raise ConfigError(f"k: must lie in 1..n, got {cfg['k']}")
    for key in ('z', 'center'):
        if key in cfg:
            _complex(key, cfg[key])
    for key in ('r', 'size', 'radius', 'tau', 'eta0', 'extent', 'width'):
        if key in cfg and cfg[key] is not None:
            _positive(cfg, key, strict=key != 'r')
    if 'delta1' in cfg and not 0 < cfg['delta1'] <= 1:
        raise ConfigError('delta1: must lie in (0, 1]')
    if 's_grid' in cfg:
        lo, hi, _ = _range('s_grid', cfg['s_grid'])
        if lo <= 0 or hi > 2:
            raise ConfigError('s_grid: must lie inside (0, 2]')
    if cfg.get('window') is not None:
        _range('window', cfg['window'], parts=2)
    if 'x_grid' in cfg:
        _range('x_grid', cfg['x_grid'])
    if command in ('tails', 'wegner', 'real-count', 'resolvent-moment', 'overlaps') \
            and cfg['trials'] < (100 if command == 'tails' else 1):
        raise ConfigError('trials: must be at least 100')
    for key in ('shift', 'a'):
        path = cfg.get(key)
        if path not in (None, 'zero') and not os.path.isfile(path):
            raise ConfigError(f'{key}: file {path!r} does not exist')
    if not os.path.isdir(cfg['out']):
        raise ConfigError(f"out: directory {cfg['out']!r} does not exist")


# -- output --------------------------------------------------------------------

def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return 'true' if v else 'false'
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), '.17g')
    return str(v)


def write_csv(path, header, rows):
    """RFC-4180 CSV with LF line endings and 17 significant digits."""
    header = list(header)
    with open(path, 'w', newline='') as fh:
        w = csv.writer(fh, lineterminator='\n')
        w.writerow(header)
        for row in rows:
            if len(row) != len(header):
                raise ValueError(f'row has {len(row)} fields, header has {len(header)}')
            w.writerow([_fmt(v) for v in row])
    return path


def read_csv(path):
    with open(path, newline='') as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


PLOT_TEMPLATE = '''\
"""Plot {csv}; generated by girko-lab, run with any Python that has matplotlib."""
import csv
import matplotlib.pyplot as plt

with open({csv!r}) as fh:
    rows = list(csv.DictReader(fh))
x = [float(r[{x!r}]) for r in rows]
y = [float(r[{y!r}]) for r in rows]
fig, ax = plt.subplots()
ax.plot(x, y, 'o-', ms=3)
ax.set_xlabel({x!r})
ax.set_ylabel({y!r})
{scale}
fig.savefig({png!r}, dpi=150)
'''


def _plot_script(out, stem, x, y, loglog=False):
    path = os.path.join(out, f'{stem}_plot.py')
    scale = "ax.set_xscale('log')\nax.set_yscale('log')" if loglog else ''
    with open(path, 'w') as fh:
        fh.write(PLOT_TEMPLATE.format(csv=f'{stem}.csv', x=x, y=y, scale=scale,
                                      png=f'{stem}.png'))
    return path


# -- dispatch --------------------------------------------------------------------

def _ensemble(cfg):
    return ensemble_from_name(cfg['ensemble'], cfg['n'], cfg.get('width', 0.1))


def _shift(cfg):
    if cfg.get('shift'):
        mat = load_shift_json(cfg['shift'])
        if mat.shape != (cfg['n'], cfg['n']):
            raise ConfigError(f"shift: matrix has shape {mat.shape}, need n x n")
        return ShiftSpec('dense', mat)
    return ShiftSpec()


def _matrix_a(cfg):
    if cfg['a'] in (None, 'zero'):
        return np.zeros((cfg['n'], cfg['n']))
    return load_shift_json(cfg['a'])


def _geom(text):
    lo, hi, count = _range('s_grid', text)
    return tuple(np.geomspace(lo, hi, count))


def run_tails(cfg, out):
    tcfg = mc.TailConfig(_ensemble(cfg), cfg['k'], _geom(cfg['s_grid']), cfg['trials'],
                         cfg['seed'], _shift(cfg), _complex('z', cfg['z']))
    est = mc.run_tail(tcfg, workers=cfg['workers'])
    write_csv(out('csv'), TAIL_COLUMNS, est.table())
    summary = {'trials': est.trials, 'failures': est.failures,
               'interlacing_violations': est.interlacing_violations,
               'target_exponent': tcfg.target_exponent}
    if cfg.get('window'):
        fit = mc.fit_slope(est, _range('window', cfg['window'], parts=2))
        summary.update(slope=fit.slope, intercept=fit.intercept, stderr=fit.stderr,
                       points=fit.points)
    return summary, ('s', 'p_hat', True)


def run_wegner(cfg, out):
    n = cfg['n']
    r = cfg['r'] if cfg.get('r') is not None else n ** -0.75
    z = _complex('z', cfg['z'])
    est = mc.run_wegner(_ensemble(cfg), z, r, cfg['trials'], cfg['seed'],
                        shift=_shift(cfg), workers=cfg['workers'])
    write_csv(out('csv'), WEGNER_COLUMNS,
              [(z.real, z.imag, r, est.mean_count, est.normalized_density,
                est.ci_lo, est.ci_hi)])
    return {'trials': est.trials, 'failures': est.failures}, None


def run_overlaps(cfg, out):
    dom = mc.Domain(cfg['domain'], _complex('center', cfg['center']), cfg['size'])
    rep = mc.run_overlap_sum(_ensemble(cfg), dom, cfg['trials'], cfg['seed'],
                             shift=_shift(cfg), workers=cfg['workers'])
    rows = [(t, int(c), float(s)) for t, (c, s) in enumerate(zip(rep.counts, rep.sums))]
    write_csv(out('csv'), ('trial', 'count', 'overlap_sum'), rows)
    return {'trials': rep.trials, 'failures': rep.failures, 'area': dom.area,
            'mean': rep.mean, 'median_of_means': rep.median_of_means,
            'conditional_mean': rep.conditional_mean, 'baseline': rep.baseline}, None


def run_overlap_shape(cfg, out):
    spec = EnsembleSpec('complex', 'gaussian', cfg['n'])
    rep = mc.run_overlap_shape(spec, _complex('z', cfg['z']), cfg['samples'],
                               cfg['seed'], radius=cfg['radius'], workers=cfg['workers'])
    y = np.sort(rep.samples)
    ecdf = np.arange(1, y.size + 1) / y.size
    write_csv(out('csv'), ('y', 'ecdf', 'reference_cdf'),
              zip(y, ecdf, mc.inverse_gamma2_cdf(y)))
    return {'ks': rep.ks, 'pvalue': rep.pvalue, 'trials': rep.trials}, ('y', 'ecdf', False)


def run_real_count(cfg, out):
    spec = _ensemble(cfg)
    est = mc.run_real_count(spec, cfg['trials'], cfg['seed'], workers=cfg['workers'])
    write_csv(out('csv'), ('n', 'trials', 'mean_count', 'mean_over_sqrt_n', 'ci_lo', 'ci_hi'),
              [(est.n, est.trials, est.mean, est.normalized, est.ci_lo, est.ci_hi)])
    return {'trials': est.trials}, None


def run_resolvent_moment(cfg, out):
    z = _complex('z', cfg['z'])
    est = mc.run_resolvent_moment(_ensemble(cfg), z, cfg['delta1'], cfg['trials'],
                                  cfg['seed'], shift=_shift(cfg), workers=cfg['workers'])
    write_csv(out('csv'), ('z_re', 'z_im', 'power', 'trials', 'moment', 'ci_lo', 'ci_hi'),
              [(z.real, z.imag, est.power, est.trials, est.moment, est.ci_lo, est.ci_hi)])
    return {'trials': est.trials}, None


def run_girko(cfg, out):
    b = sample_matrix(EnsembleSpec('complex', 'gaussian', cfg['n']), SeedStream(cfg['seed'], 0))
    center = _complex('center', cfg['center'])
    grids = [cfg['grid'], 2 * cfg['grid']] if cfg['refine'] else [cfg['grid']]
    reps = [spectral.girko_residual(b, center, cfg['r'], g) for g in grids]
    write_csv(out('csv'), ('grid_n', 'lhs', 'rhs', 'abs_err', 'rel_err'),
              [(r.grid_n, r.lhs, r.rhs, r.abs_err, r.rel_err) for r in reps])
    summary = {'rel_err': reps[0].rel_err}
    if len(reps) == 2 and reps[1].abs_err > 0:
        summary['refinement_ratio'] = reps[0].abs_err / reps[1].abs_err
    return summary, None


def run_mde_density(cfg, out):
    a = _matrix_a(cfg)
    lo, hi, count = _range('x_grid', cfg['x_grid'])
    xs = np.linspace(lo, hi, count)
    z = _complex('z', cfg['z'])
    dens = mde.scdos_curve(a, z, xs, eta0=cfg['eta0'])
    write_csv(out('csv'), ('x', 'density'), zip(xs, dens))
    return {'points': int(count)}, ('x', 'density', False)


def run_bulk_map(cfg, out):
    a = _matrix_a(cfg)
    extent = cfg.get('extent') or 1.5 * (np.linalg.norm(a, 2) + 1)
    axis = np.linspace(-extent, extent, cfg['grid'])
    rows = []
    for y in axis:
        for x in axis:
            q = mde.in_bulk(a, complex(x, y), cfg['tau'])
            rows.append((x, y, q.value, q.in_bulk))
    write_csv(out('csv'), ('z_re', 'z_im', 'value', 'in_bulk'), rows)
    return {'points': len(rows), 'in_bulk': sum(r[3] for r in rows)}, None


def run_verify(cfg, out):
    results = verify.run_checks()
    for r in results:
        print(r.line())
    write_csv(out('csv'), ('check', 'ok', 'worst', 'tolerance'),
              [(r.name, r.ok, r.value, r.tolerance) for r in results])
    failed = [r.name for r in results if not r.ok]
    return {'passed': len(results) - len(failed), 'failed': failed}, None


RUNNERS = {
    'tails': run_tails, 'wegner': run_wegner, 'overlaps': run_overlaps,
    'overlap-shape': run_overlap_shape, 'real-count': run_real_count,
    'resolvent-moment': run_resolvent_moment, 'girko-check': run_girko,
    'mde-density': run_mde_density, 'bulk-map': run_bulk_map, 'verify': run_verify,
}


def dispatch(cfg):
    """Run one command; returns the written paths, manifest last."""
    command = cfg['command']
    stem = command.replace('-', '_')
    written = []

    def out(ext):
        path = os.path.join(cfg['out'], f'{stem}.{ext}')
        written.append(path)
        return path

    t0 = time.perf_counter()
    try:
        summary, plot = RUNNERS[command](cfg, out)
        if cfg.get('plot') and plot:
            written.append(_plot_script(cfg['out'], stem, plot[0], plot[1], plot[2]))
        manifest = mc.RunManifest(
            config={k: v for k, v in cfg.items()}, master_seed=cfg['seed'],
            code_version=__version__, workers=cfg['workers'],
            wall_time={command: time.perf_counter() - t0},
            failures={'trials': summary.get('failures', 0)} if 'failures' in summary else {},
            outputs=[os.path.basename(p) for p in written])
        manifest_path = os.path.join(cfg['out'], f'{stem}.manifest.json')
        with open(manifest_path, 'w') as fh:
            fh.write(manifest.to_json() + '\n')
        written.append(manifest_path)
    except BaseException:
        for path in written:
            if os.path.exists(path):
                os.remove(path)
        raise
    print(json.dumps({'command': command, **_jsonable(summary)}, sort_keys=True))
    return written, summary


def _jsonable(d):
    out = {}
    for k, v in d.items():
        if isinstance(v, (np.floating, float)):
            v = float(v)
            v = v if math.isfinite(v) else str(v)
        elif isinstance(v, np.integer):
            v = int(v)
        out[k] = v
    return out


def main(argv=None):
    try:
        cfg = parse_config(sys.argv[1:] if argv is None else argv)
    except ConfigError as exc:
        print(f'girko-lab: config error: {exc}', file=sys.stderr)
        return EXIT_CONFIG
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code not in (0, None) else EXIT_OK
    try:
        _, summary = dispatch(cfg)
    except ConfigError as exc:
        print(f'girko-lab: config error: {exc}', file=sys.stderr)
        return EXIT_CONFIG
    except InvalidParameter as exc:
        print(f'girko-lab: config error: {exc}', file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalFailure, GirkoLabError, OSError) as exc:
        print(f'girko-lab: failure: {exc}', file=sys.stderr)
        return EXIT_FAILURE
    if cfg['command'] == 'verify' and summary['failed']:
        return EXIT_FAILURE
    return EXIT_OK


if __name__ == '__main__':
    sys.exit(main())
