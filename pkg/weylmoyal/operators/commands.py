"""Operator-norm experiments in the regular representation."""
from __future__ import annotations

import click
import numpy as np
from flask import current_app

from weylmoyal.corpus import lattice_frequency, load_corpus
from weylmoyal.functions import GridSpec, PlaneWaveSum, make_gaussian
from weylmoyal.operators import bp
from weylmoyal.options import experiment_options, load_experiment_config
from weylmoyal.poisson import PoissonVectorSpace
from weylmoyal.representations import (
    RepSpec,
    apply_regular,
    conjugation_residual,
    faithfulness_witness,
    norm_bound_l1,
    norm_chain,
    operator_norm,
    strong_continuity_table,
    weyl_quantize,
)
from weylmoyal.runner import Outcome, run_experiment
from weylmoyal.star import GRID, StarContext, star

FIELDS = [
    'case', 'operator_norm', 'l1', 'seminorm_bound', 'eps_disc',
    'l1_slack', 'seminorm_slack', 'slack', 'witness',
]
CONJUGATION_GRID_POINTS = 16
CCR_SCALES = (0.0, 0.5, 1.0, 2.0)


def _planewave_row(rep: RepSpec, ctx: StarContext, i: int, pw: PlaneWaveSum) -> dict:
    op = operator_norm(weyl_quantize(rep, pw))
    l1 = norm_bound_l1(ctx, pw)
    return {'case': i, 'operator_norm': op, 'l1': l1, 'l1_slack': l1 - op, 'slack': l1 - op}


def _gaussian_row(ctx: StarContext, i: int, f) -> dict:
    row = {'case': i, **norm_chain(ctx, f)}
    row['witness'] = faithfulness_witness(ctx, f)
    return row


def _ccr_residual(rep: RepSpec, rng: np.random.Generator, pairs: int) -> float:
    """Largest ‖π(ξ)π(η)ψ − e^{−(i/2)σ(ξ,η)}π(ξ+η)ψ‖₂ over random lattice pairs and unit probes ψ."""
    spec, worst = rep.spec, 0.0
    for _ in range(pairs):
        xi, eta = lattice_frequency(spec, rng), lattice_frequency(spec, rng)
        psi = rng.standard_normal(spec.size) + 1j * rng.standard_normal(spec.size)
        psi /= np.linalg.norm(psi)
        lhs = apply_regular(rep, xi, apply_regular(rep, eta, psi))
        rhs = np.exp(-0.5j * rep.pvs.pairing(xi, eta)) * apply_regular(rep, xi + eta, psi)
        worst = max(worst, float(np.linalg.norm(lhs - rhs)))
    return worst


def _homomorphism_residual(rep: RepSpec, ctx: StarContext, corpus: list, pairs: int) -> float:
    """Largest ‖W(f)W(g) − W(f ⋆ g)‖_F / max(1, ‖W f‖_F ‖W g‖_F) over consecutive corpus pairs."""
    worst = 0.0
    for f, g in list(zip(corpus, corpus[1:]))[:pairs]:
        wf, wg = weyl_quantize(rep, f), weyl_quantize(rep, g)
        residual = (wf @ wg - weyl_quantize(rep, star(ctx, f, g))).frobenius()
        worst = max(worst, residual / max(1.0, wf.frobenius() * wg.frobenius()))
    return worst


def _conjugation_residual(ctx: StarContext, rng: np.random.Generator, cases: int) -> float | None:
    """Largest doubled-rep conjugation residual, on a grid of at most CONJUGATION_GRID_POINTS per axis.

    Returns None when the reduced grid is not commensurate with σ.
    """
    spec = ctx.spec
    if spec.N > CONJUGATION_GRID_POINTS:
        spec = GridSpec.commensurate(spec.n, CONJUGATION_GRID_POINTS, ctx.sigma, spec.L)
    if not spec.is_commensurate(ctx.sigma):
        return None
    rep = RepSpec.doubled(ctx.pvs, spec)
    g = make_gaussian(spec)
    worst = 0.0
    for _ in range(cases):
        x = rng.integers(-2, 3, spec.n) * spec.h
        worst = max(worst, conjugation_residual(rep, x, lattice_frequency(spec, rng, kmax=2), g))
    return worst


def _ccr_sweep(cfg, rng: np.random.Generator) -> tuple[float, list[float]]:
    """Worst CCR residual over σ scaled by each of the ``ccr_scales`` params, on commensurate grids."""
    pairs = int(cfg.param('ccr_pairs', 8))
    worst, scales = 0.0, []
    for scale in cfg.param('ccr_scales', CCR_SCALES):
        pvs = PoissonVectorSpace(cfg.pvs.n, float(scale) * cfg.sigma)
        spec = cfg.grid_spec(pvs.sigma)
        if not spec.is_commensurate(pvs.sigma):
            continue
        worst = max(worst, _ccr_residual(RepSpec.regular(pvs, spec), rng, pairs))
        scales.append(float(scale))
    return worst, scales


def _representation_checks(cfg, report, rep: RepSpec, ctx: StarContext, corpus: list):
    if not ctx.commensurate:
        report.summary['representation_checks'] = 'skipped: grid is not commensurate with sigma'
        return
    rng = np.random.default_rng(cfg.seed)
    ccr, scales = _ccr_sweep(cfg, rng)
    report.at_most('ccr', ccr, cfg.tol('ccr'),
                   detail=f'π(ξ)π(η) = e^{{−(i/2)σ(ξ,η)}} π(ξ+η) on unit probes, σ scaled by {scales}')
    pairs = int(cfg.param('homomorphism_pairs', 3))
    report.at_most('homomorphism', _homomorphism_residual(rep, ctx, corpus, pairs), cfg.tol('homomorphism'),
                   detail=f'W(f)W(g) = W(f ⋆ g) over {min(pairs, len(corpus) - 1)} pairs')
    conjugation = _conjugation_residual(ctx, rng, int(cfg.param('conjugation_cases', 2)))
    if conjugation is None:
        report.summary['conjugation'] = 'skipped: reduced grid is not commensurate with sigma'
    else:
        report.at_most('conjugation', conjugation, cfg.tol('conjugation'),
                       detail='W_Ω(x,ξ) R(g) W_Ω(x,ξ)⁻¹ = R(T_a g)')


@bp.cli.command('norms')
@experiment_options
@click.option('--levels', type=int, default=4, show_default=True,
              help='Grid doublings in the strong-continuity table.')
def norms_command(config_path, seed, out, tol_overrides, levels):
    """operator_norm(W f) ≤ ‖f̌‖₁ ≤ (2π)^n s_{2n,2n}(f) + ε_disc over a corpus."""
    def body(cfg, report):
        spec = cfg.grid_spec()
        ctx = StarContext(cfg.pvs, GRID, spec)
        rep = RepSpec.regular(cfg.pvs, spec)
        corpus = load_corpus(cfg.corpus, spec, cfg.count, cfg.seed)
        tol = cfg.tol('norm_chain')
        rows = []
        for i, f in enumerate(corpus):
            if isinstance(f, PlaneWaveSum):
                rows.append(_planewave_row(rep, ctx, i, f))
            else:
                rows.append(_gaussian_row(ctx, i, f))
            current_app.logger.debug('norms: case %d norm=%.12g', i, rows[-1]['operator_norm'])
        report.summary = {'grid': spec.to_json(), 'corpus': cfg.corpus, 'cases': len(rows)}

        worst = min(rows, key=lambda r: r['slack'] / max(1.0, r['l1']))
        report.check('norm_chain', worst['slack'] / max(1.0, worst['l1']) >= -tol,
                     worst['slack'], tol, detail=f'smallest relative slack at case {worst["case"]}')
        if cfg.corpus == 'planewave':
            deviation = max(abs(r['operator_norm'] - 1.0) for r in rows)
            report.at_most('unit_norm', deviation, tol, detail='|operator_norm(π(ξ)) − 1|')
        else:
            faint = [r['case'] for r in rows if not r['witness'] > 0.0]
            report.check('faithful', not faint, detail=f'zero witness at cases {faint}' if faint else '')
        _representation_checks(cfg, report, rep, ctx, corpus)

        table = []
        if levels > 0:
            table = strong_continuity_table(cfg.pvs, spec, levels=levels)
            residuals = [r['residual'] for r in table]
            report.check('strong_continuity', all(b < a for a, b in zip(residuals, residuals[1:])),
                         residuals[-1], detail='‖(π(ξ) − I)ψ‖₂ shrinks as ξ → 0')
        return Outcome(rows=rows, fieldnames=FIELDS, fixtures={'strong_continuity': table})

    run_experiment('norms', lambda: load_experiment_config('norms', config_path, seed, out, tol_overrides),
                   body, fallback_out=out)
