"""Experiment configuration: JSON file merged over app defaults, then command-line overrides."""
from __future__ import annotations

import functools
import json
from dataclasses import dataclass, field
from pathlib import Path

import click
import numpy as np
from wtforms import BooleanField, FloatField, Form, IntegerField, SelectField, StringField
from wtforms.validators import NumberRange, ValidationError

from weylmoyal.corpus import CORPORA, GAUSSIAN
from weylmoyal.errors import AntisymmetryError, DimensionError, ExperimentConfigError
from weylmoyal.functions import GridSpec
from weylmoyal.poisson import PoissonVectorSpace, load_poisson
from weylmoyal.settings import get_setting

# Per-command defaults applied before the config file; dense operators keep grids small.
COMMAND_DEFAULTS = {
    'star': {},
    'estimates': {'count': 4},
    'approx-id': {},
    'norms': {'grid_points': 32},
    'bundle': {'count': 20},
    'orbit': {'count': 200},
}


class ExperimentForm(Form):
    seed = IntegerField('Seed', validators=[NumberRange(min=0)])
    grid_dim = IntegerField('Grid dimension', validators=[NumberRange(min=1, max=3)])
    grid_points = IntegerField('Grid points per axis', validators=[NumberRange(min=2)])
    grid_half_width = FloatField('Grid half-width')
    commensurate = BooleanField('Commensurate grid')
    theta = FloatField('Default sigma^12')
    corpus = SelectField('Corpus', choices=[(c, c) for c in CORPORA])
    count = IntegerField('Corpus size', validators=[NumberRange(min=1)])
    out = StringField('Output directory')
    sigma_file = StringField('Poisson matrix file')

    def validate_grid_points(self, field):
        if field.data is not None and field.data % 2:
            raise ValidationError('Must be even.')

    def validate_grid_half_width(self, field):
        if field.data is None or not field.data > 0:
            raise ValidationError('Must be positive.')

    def validate_sigma_file(self, field):
        if field.data and not Path(field.data).is_file():
            raise ValidationError(f'No such file: {field.data}')


@dataclass
class ExperimentConfig:
    command: str
    seed: int
    out_dir: Path
    grid_dim: int
    grid_points: int
    grid_half_width: float
    commensurate: bool
    sigma: np.ndarray
    corpus: str = GAUSSIAN
    count: int = 10
    tolerances: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)

    @property
    def pvs(self) -> PoissonVectorSpace:
        return PoissonVectorSpace(self.sigma.shape[0], self.sigma)

    def grid_spec(self, sigma=None, n: int | None = None) -> GridSpec:
        """The configured grid, moved to the nearest commensurate half-width when asked."""
        n = self.grid_dim if n is None else n
        sigma = self.sigma if sigma is None else np.asarray(sigma, dtype=float)
        if self.commensurate:
            return GridSpec.commensurate(n, self.grid_points, sigma, self.grid_half_width)
        return GridSpec(n, self.grid_half_width, self.grid_points)

    def tol(self, name: str) -> float:
        return float(self.tolerances[name])

    def param(self, name: str, default=None):
        return self.params.get(name, default)

    def to_json(self) -> dict:
        return {
            'command': self.command,
            'seed': self.seed,
            'grid': {'n': self.grid_dim, 'N': self.grid_points, 'L': self.grid_half_width,
                     'commensurate': self.commensurate},
            'sigma': self.sigma.tolist(),
            'corpus': self.corpus,
            'count': self.count,
            'tolerances': dict(sorted(self.tolerances.items())),
            'params': dict(sorted(self.params.items())),
        }


def parse_tol_override(text: str) -> tuple[str, float]:
    key, sep, value = text.partition('=')
    key = key.strip()
    if not sep or not key:
        raise ExperimentConfigError(f'--tol-override expects KEY=VAL, got {text!r}.')
    try:
        return key, float(value)
    except ValueError:
        raise ExperimentConfigError(f'--tol-override {key}: {value!r} is not a number.') from None


def parse_int_list(text: str, name: str, minimum: int = 0) -> list[int]:
    """'1,2,3' -> [1, 2, 3]; order is kept."""
    try:
        values = [int(part) for part in str(text).replace(' ', ',').split(',') if part]
    except ValueError:
        raise ExperimentConfigError(f'{name}: expected comma-separated integers, got {text!r}.') from None
    if not values:
        raise ExperimentConfigError(f'{name}: at least one value is required.')
    if min(values) < minimum:
        raise ExperimentConfigError(f'{name}: values must be at least {minimum}.')
    return values


def _merge_tolerances(base: dict, updates: dict) -> dict:
    merged = dict(base)
    for key, value in updates.items():
        if key not in merged:
            raise ExperimentConfigError(f'Unknown tolerance {key!r}; known: {sorted(merged)}.')
        try:
            value = float(value)
        except (TypeError, ValueError):
            raise ExperimentConfigError(f'Tolerance {key!r} is not a number.') from None
        if not value > 0:
            raise ExperimentConfigError(f'Tolerance {key!r} must be positive, got {value}.')
        merged[key] = value
    return merged


def _read_config_file(path) -> tuple[dict, Path]:
    path = Path(path)
    if not path.is_file():
        raise ExperimentConfigError(f'Config file not found: {path}')
    try:
        data = json.loads(path.read_text(encoding='utf-8'))
    except json.JSONDecodeError as exc:
        raise ExperimentConfigError(f'{path}: invalid JSON ({exc}).') from None
    if not isinstance(data, dict):
        raise ExperimentConfigError(f'{path}: top level must be an object.')
    return data, path.parent


def _flatten(data: dict, root: Path | None) -> dict:
    flat = {k: v for k, v in data.items() if k not in ('grid', 'tolerances', 'params', 'sigma')}
    grid = data.get('grid') or {}
    if not isinstance(grid, dict):
        raise ExperimentConfigError('"grid" must be an object with n, N, L.')
    for key, name in (('n', 'grid_dim'), ('N', 'grid_points'), ('L', 'grid_half_width'),
                      ('commensurate', 'commensurate')):
        if key in grid:
            flat[name] = grid[key]
    if root is not None and flat.get('sigma_file'):
        flat['sigma_file'] = str((root / flat['sigma_file']).resolve())
    if root is not None and flat.get('out'):
        flat['out'] = str((root / flat['out']).resolve())
    return flat


def load_experiment_config(command: str, config_path=None, seed=None, out=None, tol_overrides=(),
                           params=None, **overrides) -> ExperimentConfig:
    """Defaults < per-command defaults < config file < flags."""
    values = {
        'seed': int(get_setting('DEFAULT_SEED')),
        'grid_dim': int(get_setting('GRID_DIM')),
        'grid_points': int(get_setting('GRID_POINTS')),
        'grid_half_width': float(get_setting('GRID_HALF_WIDTH')),
        'commensurate': True,
        'theta': 1.0,
        'corpus': GAUSSIAN,
        'count': 10,
        'out': str(get_setting('OUTPUT_DIR')),
        'sigma_file': '',
    }
    values.update(COMMAND_DEFAULTS.get(command, {}))
    file_data, file_tols, file_params, sigma = {}, {}, {}, None
    if config_path:
        raw, root = _read_config_file(config_path)
        file_data = _flatten(raw, root)
        file_tols = raw.get('tolerances') or {}
        file_params = raw.get('params') or {}
        sigma = raw.get('sigma')
        if not isinstance(file_tols, dict) or not isinstance(file_params, dict):
            raise ExperimentConfigError('"tolerances" and "params" must be objects.')
    unknown = set(file_data) - set(values)
    if unknown:
        raise ExperimentConfigError(f'Unknown config keys: {sorted(unknown)}.')
    values.update(file_data)
    values.update({k: v for k, v in overrides.items() if v is not None})
    if seed is not None:
        values['seed'] = seed
    if out:
        values['out'] = out

    form = ExperimentForm(data=values)
    if not form.validate():
        problems = '; '.join(f'{name}: {", ".join(errs)}' for name, errs in sorted(form.errors.items()))
        raise ExperimentConfigError(f'Invalid experiment config: {problems}')

    tolerances = dict(get_setting('TOLERANCES'))
    tolerances = _merge_tolerances(tolerances, file_tols)
    tolerances = _merge_tolerances(tolerances, dict(parse_tol_override(t) for t in tol_overrides))

    n = form.grid_dim.data
    try:
        if form.sigma_file.data:
            sigma = load_poisson(form.sigma_file.data).sigma
        elif sigma is not None:
            sigma = PoissonVectorSpace.from_matrix(sigma).sigma
        else:
            sigma = PoissonVectorSpace.canonical(n, form.theta.data).sigma
    except (AntisymmetryError, DimensionError, json.JSONDecodeError) as exc:
        raise ExperimentConfigError(f'Invalid Poisson matrix: {exc}') from None
    if sigma.shape[0] != n:
        if 'grid_dim' in file_data or overrides.get('grid_dim') is not None:
            raise ExperimentConfigError(f'sigma is {sigma.shape[0]}x{sigma.shape[0]} but the grid has n={n}.')
        n = sigma.shape[0]

    merged_params = dict(file_params)
    merged_params.update({k: v for k, v in (params or {}).items() if v is not None})
    return ExperimentConfig(
        command=command,
        seed=form.seed.data,
        out_dir=Path(form.out.data),
        grid_dim=n,
        grid_points=form.grid_points.data,
        grid_half_width=form.grid_half_width.data,
        commensurate=bool(form.commensurate.data),
        sigma=np.asarray(sigma, dtype=float),
        corpus=form.corpus.data,
        count=form.count.data,
        tolerances=tolerances,
        params=merged_params,
    )


def experiment_options(func):
    """Flags shared by every experiment command."""
    @click.option('--config', 'config_path', default=None, help='JSON experiment config.')
    @click.option('--seed', type=int, default=None, help='Base RNG seed.')
    @click.option('--out', default=None, help='Output directory.')
    @click.option('--tol-override', 'tol_overrides', multiple=True, metavar='KEY=VAL',
                  help='Override a named tolerance; repeatable.')
    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        return func(*args, **kwargs)
    return wrapper
