"""Star-product experiments: products and residuals, seminorm estimates, approximate identity."""
from __future__ import annotations

from pathlib import Path

import click
import numpy as np
from flask import current_app

from weylmoyal.corpus import gaussian_corpus, mixed_cases, random_planewave_sum
from weylmoyal.errors import DimensionError, ExperimentConfigError
from weylmoyal.functions import (
    GridFunction,
    GridSpec,
    PlaneWaveSum,
    fourier_inverse,
    l1_estimate,
    load_grid_function,
    load_planewave,
    sample_planewave,
    save_grid_function,
    save_planewave,
    seminorm,
)
from weylmoyal.options import experiment_options, load_experiment_config, parse_int_list
from weylmoyal.poisson import PoissonVectorSpace
from weylmoyal.products import bp
from weylmoyal.reporting import read_json, write_json
from weylmoyal.runner import Outcome, run_experiment
from weylmoyal.settings import get_setting
from weylmoyal.star import (
    EXACT,
    GRID,
    MIXED,
    StarContext,
    approx_identity_errors,
    combined_direct,
    combined_expansion,
    fit_seminorm_constant,
    seminorm_ratio,
    star,
    star_exact,
    star_grid,
    sup_estimate,
    tensor_factor_check,
    twisted_convolution,
)

IDENTITY_INDICES = (
    ((0, 0), (1, 0)),
    ((0, 0), (0, 1)),
    ((1, 0), (0, 0)),
    ((0, 1), (0, 0)),
    ((1, 0), (0, 1)),
)


def relative_residual(value, reference) -> float:
    """max |value − reference| / max(1, max |reference|)."""
    value, reference = np.asarray(value), np.asarray(reference)
    if reference.size == 0:
        return 0.0
    return float(np.max(np.abs(value - reference)) / max(1.0, float(np.max(np.abs(reference)))))


def _worst(report, name: str, rows: list[dict], tol: float):
    values = [row[name] for row in rows if row.get(name) is not None]
    if not values:
        return
    worst = max(range(len(values)), key=lambda i: values[i])
    report.at_most(name, values[worst], tol, detail=f'{len(values)} cases, worst #{worst}')


def _nonnegative(report, name: str, rows: list[dict], tol: float):
    """Every ``rows[*][name]`` ≥ −tol (slacks are already relative)."""
    values = [row[name] for row in rows if row.get(name) is not None]
    if not values:
        return
    worst = min(values)
    report.check(name, worst >= -tol, worst, tol, detail=f'min over {len(values)} rows')


def _scaled(slack: float, scale: float) -> float:
    return slack / max(1.0, abs(scale))


def _load_factor(path: str, n: int):
    if Path(path).suffix.lower() == '.json':
        return load_planewave(path, n=n)
    return load_grid_function(path)


def _samples(h, spec: GridSpec) -> np.ndarray:
    return h.samples if isinstance(h, GridFunction) else sample_planewave(h, spec).samples


def _star_files(cfg, report, f_path: str, g_path: str) -> Outcome:
    if not (f_path and g_path):
        raise ExperimentConfigError('--f and --g must be given together.')
    f = _load_factor(f_path, cfg.pvs.n)
    g = _load_factor(g_path, cfg.pvs.n)
    grids = [h.spec for h in (f, g) if isinstance(h, GridFunction)]
    if len(grids) == 2 and grids[0] != grids[1]:
        raise DimensionError('Grid factors live on different grids.')
    spec = grids[0] if grids else None
    backend = EXACT if spec is None else (GRID if len(grids) == 2 else MIXED)
    ctx = StarContext(cfg.pvs, backend, spec)

    product = star(ctx, f, g)
    flipped = star(ctx.negated(), g, f)
    row = {'case': 'files', 'backend': backend}
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    if isinstance(product, PlaneWaveSum):
        row['terms'] = len(product)
        row['flip'] = product.distance(flipped) / max(1.0, product.coefficient_l1())
        if not cfg.sigma.any():
            row['pointwise'] = product.distance(f.pointwise(g)) / max(1.0, product.coefficient_l1())
        save_planewave(product, cfg.out_dir / 'product.json')
    else:
        row['max_abs'] = product.max_abs()
        row['flip'] = relative_residual(flipped.samples, product.samples)
        if backend == GRID:
            row['twisted_convolution'] = relative_residual(
                twisted_convolution(ctx, fourier_inverse(f), fourier_inverse(g)).samples,
                fourier_inverse(product).samples,
            )
        if not cfg.sigma.any():
            row['pointwise'] = relative_residual(_samples(f, spec) * _samples(g, spec), product.samples)
        save_grid_function(product, cfg.out_dir / 'product.bin')
    report.summary = {'backend': backend, 'commensurate': ctx.commensurate}
    return Outcome(rows=[row])


def _exact_algebra_residual(pvs: PoissonVectorSpace, rng: np.random.Generator, triples: int) -> float:
    """Worst relative defect over random plane-wave triples.

    Covers associativity, the flip identity, the involution and tensor factorization
    over a one-dimensional commutative factor V₀ ⊕ V.
    """
    ctx = StarContext(pvs)
    flat = PoissonVectorSpace(1, np.zeros((1, 1)))
    worst = 0.0
    for _ in range(triples):
        f, g, h = (random_planewave_sum(rng, pvs.n, terms=3, kmax=2) for _ in range(3))
        fg = star_exact(ctx, f, g)
        defects = (
            star_exact(ctx, fg, h).distance(star_exact(ctx, f, star_exact(ctx, g, h))),
            fg.distance(star_exact(ctx.negated(), g, f)),
            fg.involution().distance(star_exact(ctx, g.involution(), f.involution())),
        )
        scale = f.coefficient_l1() * g.coefficient_l1() * h.coefficient_l1()
        worst = max(worst, max(defects) / max(1.0, scale))
        f0, g0 = (random_planewave_sum(rng, 1, terms=2, kmax=2) for _ in range(2))
        tensor_scale = f0.coefficient_l1() * g0.coefficient_l1() * f.coefficient_l1() * g.coefficient_l1()
        worst = max(worst, tensor_factor_check(flat, pvs, f0, f, g0, g) / max(1.0, tensor_scale))
    return worst


def _star_sweep(cfg, report) -> Outcome:
    spec = cfg.grid_spec()
    ctx = StarContext(cfg.pvs, GRID, spec)
    minus = ctx.negated()
    corpus = gaussian_corpus(spec, cfg.count, cfg.seed)
    zero = not cfg.sigma.any()
    rows = []
    for i in range(len(corpus) - 1):
        f, g = corpus[i], corpus[i + 1]
        fg = star_grid(ctx, f, g)
        row = {'case': i, 'max_abs': fg.max_abs()}
        row['twisted_convolution'] = relative_residual(
            twisted_convolution(ctx, fourier_inverse(f), fourier_inverse(g)).samples,
            fourier_inverse(fg).samples,
        )
        row['flip'] = relative_residual(star_grid(minus, g, f).samples, fg.samples)
        if zero:
            row['pointwise'] = relative_residual(f.samples * g.samples, fg.samples)
        if ctx.commensurate and i + 2 < len(corpus):
            h = corpus[i + 2]
            right = star_grid(ctx, f, star_grid(ctx, g, h))
            row['associativity'] = relative_residual(star_grid(ctx, fg, h).samples, right.samples)
        rows.append(row)
        current_app.logger.debug('star: pair %d flip=%.3e', i, row['flip'])
    triples = int(cfg.param('exact_triples', 5))
    report.at_most('exact_algebra', _exact_algebra_residual(cfg.pvs, np.random.default_rng(cfg.seed), triples),
                   cfg.tol('exact_algebra'), detail=f'{triples} plane-wave triples')
    report.summary = {
        'grid': spec.to_json(),
        'commensurate': ctx.commensurate,
        'pairs': len(rows),
    }
    if not ctx.commensurate:
        report.summary['associativity'] = 'skipped: grid is not commensurate with sigma'
    return Outcome(rows=rows)


@bp.cli.command('star')
@experiment_options
@click.option('--f', 'f_path', default=None, help='Left factor: .json plane-wave sum or binary grid file.')
@click.option('--g', 'g_path', default=None, help='Right factor, same formats.')
def star_command(config_path, seed, out, tol_overrides, f_path, g_path):
    """Star products and their residuals (flip, spectral form, associativity, σ=0 limit)."""
    def body(cfg, report):
        if f_path or g_path:
            outcome = _star_files(cfg, report, f_path, g_path)
        else:
            outcome = _star_sweep(cfg, report)
        for name in ('flip', 'twisted_convolution', 'pointwise', 'associativity'):
            _worst(report, name, outcome.rows, cfg.tol(name))
        return outcome

    run_experiment('star', lambda: load_experiment_config('star', config_path, seed, out, tol_overrides),
                   body, fallback_out=out)


def _frozen_constants(freeze: bool) -> tuple[Path, dict | None]:
    path = Path(get_setting('FIXTURES_DIR')) / 'seminorm_constants.json'
    if freeze or not path.is_file():
        return path, None
    return path, read_json(path)


def _estimate_rows(cfg, n: int, max_order: int, frozen: dict | None, constants: dict) -> list[dict]:
    if n == cfg.grid_dim:
        pvs = cfg.pvs
    else:
        theta = float(cfg.sigma[0, 1]) if cfg.grid_dim >= 2 else 1.0
        pvs = PoissonVectorSpace.canonical(n, theta)
    spec = cfg.grid_spec(pvs.sigma, n)
    ctx = StarContext(pvs, GRID, spec)
    corpus = gaussian_corpus(spec, cfg.count + 1, cfg.seed)
    pairs = list(zip(corpus[:-1], corpus[1:]))
    products = [star_grid(ctx, f, g) for f, g in pairs]

    orders = [(p, q) for p in range(max_order + 1) for q in range(max_order + 1)]
    used = {}
    for p, q in orders:
        key = f'n{n}_p{p}_q{q}'
        if frozen is not None and key in frozen:
            used[(p, q)] = (float(frozen[key]), 'fixture')
        else:
            used[(p, q)] = (fit_seminorm_constant(ctx, pairs, p, q, products), 'fitted')
        constants[key] = used[(p, q)][0]

    rows = []
    for i, ((f, g), fg) in enumerate(zip(pairs, products)):
        sup = sup_estimate(ctx, f, g)
        l1 = l1_estimate(g)
        shared = {
            'sup_lhs': sup['lhs'],
            'sup_l1_bound': sup['l1_bound'],
            'sup_seminorm_bound': sup['seminorm_bound'],
            'sup_l1_slack': _scaled(sup['l1_bound'] - sup['lhs'], sup['l1_bound']),
            'sup_seminorm_slack': _scaled(sup['seminorm_bound'] - sup['lhs'], sup['seminorm_bound']),
            'l1': l1['l1'],
            'l1_bound': l1['seminorm_bound'],
            'eps_disc': l1['eps_disc'],
            'l1_slack': _scaled(l1['slack'], l1['seminorm_bound']),
        }
        for p, q in orders:
            constant, source = used[(p, q)]
            ratio = seminorm_ratio(ctx, f, g, p, q, product=fg)
            rows.append({
                'n': n, 'case': i, 'p': p, 'q': q,
                'ratio': ratio,
                'constant': constant,
                'constant_source': source,
                'seminorm_slack': _scaled(constant - ratio, constant),
                **shared,
            })
    return rows


def _identity_rows(cfg) -> list[dict]:
    """x^α∂_β(f⋆g) against its expansion for plane-wave × Gaussian factors in n=2."""
    theta = float(cfg.sigma[0, 1]) if cfg.grid_dim >= 2 else 1.0
    pvs = cfg.pvs if cfg.grid_dim == 2 else PoissonVectorSpace.canonical(2, theta)
    points = int(cfg.param('identity_points', 128))
    spec = GridSpec.commensurate(2, points, pvs.sigma, cfg.grid_half_width)
    ctx = StarContext(pvs, MIXED, spec)
    rows = []
    cases = mixed_cases(spec, int(cfg.param('identity_cases', 20)), cfg.seed)
    for i, (f, g) in enumerate(cases):
        for alpha, beta in IDENTITY_INDICES:
            direct = combined_direct(ctx, f, g, alpha, beta)
            expanded = combined_expansion(ctx, f, g, alpha, beta)
            rows.append({
                'case': i,
                'alpha': ''.join(map(str, alpha)),
                'beta': ''.join(map(str, beta)),
                'grid_identity': relative_residual(expanded.samples, direct.samples),
            })
    return rows


@bp.cli.command('estimates')
@experiment_options
@click.option('--dims', default='1,2', show_default=True, help='Dimensions to sweep.')
@click.option('--max-order', type=int, default=1, show_default=True, help='Largest p and q.')
@click.option('--freeze', is_flag=True, help='Write the fitted seminorm constants to the fixtures directory.')
def estimates_command(config_path, seed, out, tol_overrides, dims, max_order, freeze):
    """Seminorm, sup and L¹ inequality sweeps, one CSV row per (n, f, p, q)."""
    def body(cfg, report):
        sweep = parse_int_list(dims, '--dims', minimum=1)
        if max_order < 0:
            raise ExperimentConfigError('--max-order must be nonnegative.')
        path, frozen = _frozen_constants(freeze)
        constants, rows = {}, []
        for n in sweep:
            current_app.logger.info('estimates: n=%d', n)
            rows.extend(_estimate_rows(cfg, n, max_order, frozen, constants))
        tol = cfg.tol('inequality')
        for name in ('seminorm_slack', 'sup_l1_slack', 'sup_seminorm_slack', 'l1_slack'):
            _nonnegative(report, name, rows, tol)

        identities = _identity_rows(cfg) if 2 in sweep else []
        _worst(report, 'grid_identity', identities, cfg.tol('grid_identity'))

        if freeze:
            write_json(path, constants)
            current_app.logger.info('estimates: froze %d seminorm constants in %s', len(constants), path)
        report.summary = {
            'dims': sweep,
            'rows': len(rows),
            'constants_source': 'fixture' if frozen is not None else 'fitted',
            'identity_cases': len(identities),
        }
        return Outcome(rows=rows, fixtures={'seminorm_constants': constants, 'identities': identities})

    run_experiment('estimates',
                   lambda: load_experiment_config('estimates', config_path, seed, out, tol_overrides),
                   body, fallback_out=out)


@bp.cli.command('approx-id')
@experiment_options
@click.option('--ks', default='1,2,3,4,5', show_default=True, help='Approximate-identity indices.')
def approx_id_command(config_path, seed, out, tol_overrides, ks):
    """Convergence table for χ_k ⋆ f → f."""
    def body(cfg, report):
        levels = parse_int_list(ks, '--ks', minimum=0)
        if any(b <= a for a, b in zip(levels, levels[1:])):
            raise ExperimentConfigError('--ks must be strictly increasing.')
        spec = cfg.grid_spec()
        ctx = StarContext(cfg.pvs, GRID, spec)
        corpus = gaussian_corpus(spec, cfg.count, cfg.seed, max_offset=spec.h / 2, widths=(0.85, 1.0))
        rows, last = [], []
        for i, f in enumerate(corpus):
            errors = approx_identity_errors(ctx, f, levels)
            rows.extend({'case': i, 'k': k, 'error': e} for k, e in zip(levels, errors))
            decreasing = all(b < a for a, b in zip(errors, errors[1:]))
            report.check(f'decreasing[{i}]', decreasing, detail=' > '.join(f'{e:.3e}' for e in errors))
            last.append(errors[-1])
        report.at_most('approx_identity', max(last), cfg.tol('approx_identity'),
                       detail=f'error at k={levels[-1]}, worst case')
        report.summary = {'grid': spec.to_json(), 'ks': levels, 'cases': len(corpus)}
        return Outcome(rows=rows, fieldnames=['case', 'k', 'error'])

    run_experiment('approx-id',
                   lambda: load_experiment_config('approx-id', config_path, seed, out, tol_overrides),
                   body, fallback_out=out)
