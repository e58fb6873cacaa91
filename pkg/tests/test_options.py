import json

import numpy as np
import pytest

from weylmoyal.errors import ExperimentConfigError
from weylmoyal.options import load_experiment_config, parse_int_list, parse_tol_override


def write_config(tmp_path, data, name='config.json'):
    path = tmp_path / name
    path.write_text(json.dumps(data))
    return path


def test_precedence(app, tmp_path):
    cfg = load_experiment_config('norms')
    assert cfg.grid_points == 32 and cfg.count == 10 and cfg.seed == 0
    path = write_config(tmp_path, {'grid': {'N': 16}, 'seed': 5, 'count': 3})
    cfg = load_experiment_config('norms', path)
    assert (cfg.grid_points, cfg.seed, cfg.count) == (16, 5, 3)
    cfg = load_experiment_config('norms', path, seed=9, grid_points=8)
    assert (cfg.grid_points, cfg.seed) == (8, 9)
    assert load_experiment_config('orbit').count == 200


def test_grid_spec_follows_commensurate_flag(app, tmp_path):
    cfg = load_experiment_config('star', write_config(tmp_path, {'grid': {'n': 2, 'N': 64, 'L': 12.0}}))
    spec = cfg.grid_spec()
    assert spec.is_commensurate(cfg.sigma) and spec.L != 12.0
    plain = load_experiment_config('star', write_config(tmp_path, {'grid': {'N': 64, 'commensurate': False}}))
    assert plain.grid_spec().L == 12.0


def test_rejects_bad_values(app, tmp_path):
    for data in ({'grid': {'N': 15}}, {'grid': {'L': -1.0}}, {'grid': {'n': 5}}, {'count': 0},
                 {'corpus': 'uniform'}, {'colour': 'red'}, {'sigma_file': 'missing.json'}):
        with pytest.raises(ExperimentConfigError):
            load_experiment_config('star', write_config(tmp_path, data))
    (tmp_path / 'broken.json').write_text('{"grid": ')
    with pytest.raises(ExperimentConfigError):
        load_experiment_config('star', tmp_path / 'broken.json')
    with pytest.raises(ExperimentConfigError):
        load_experiment_config('star', tmp_path / 'absent.json')


def test_tolerances(app, tmp_path):
    path = write_config(tmp_path, {'tolerances': {'flip': 1e-6}})
    cfg = load_experiment_config('star', path, tol_overrides=['pointwise=1e-4'])
    assert cfg.tol('flip') == 1e-6 and cfg.tol('pointwise') == 1e-4 and cfg.tol('ccr') == 1e-10
    with pytest.raises(ExperimentConfigError):
        load_experiment_config('star', tol_overrides=['nonsense=1'])
    with pytest.raises(ExperimentConfigError):
        load_experiment_config('star', tol_overrides=['flip=-1'])
    with pytest.raises(ExperimentConfigError):
        load_experiment_config('star', write_config(tmp_path, {'tolerances': {'flip': 'tiny'}}))
    assert parse_tol_override(' ccr = 2e-3') == ('ccr', 2e-3)
    for text in ('ccr', '=1', 'ccr=abc'):
        with pytest.raises(ExperimentConfigError):
            parse_tol_override(text)


def test_sigma_sources(app, tmp_path):
    cfg = load_experiment_config('star', write_config(tmp_path, {'theta': 0.25}))
    np.testing.assert_array_equal(cfg.sigma, [[0.0, 0.25], [-0.25, 0.0]])
    sub = tmp_path / 'nested'
    sub.mkdir()
    (sub / 'sigma.json').write_text(json.dumps({'n': 3, 'sigma': [[0, 1, 0], [-1, 0, 2], [0, -2, 0]]}))
    cfg = load_experiment_config('star', write_config(sub, {'sigma_file': 'sigma.json', 'grid': {'N': 8}}))
    assert cfg.grid_dim == 3 and cfg.pvs.rank() == 2
    with pytest.raises(ExperimentConfigError):
        load_experiment_config('star', write_config(sub, {'sigma_file': 'sigma.json', 'grid': {'n': 2}}))
    with pytest.raises(ExperimentConfigError):
        load_experiment_config('star', write_config(tmp_path, {'sigma': [[0, 1], [1, 0]]}))
    inline = load_experiment_config('star', write_config(tmp_path, {'sigma': [[0, 3], [-3, 0]]}))
    assert inline.pvs.pairing([1, 0], [0, 1]) == 3.0


def test_out_and_params(app, tmp_path):
    cfg = load_experiment_config('estimates', write_config(tmp_path, {'out': 'runs/a', 'params': {'identity_cases': 2}}))
    assert cfg.out_dir == (tmp_path / 'runs' / 'a').resolve()
    assert cfg.param('identity_cases') == 2 and cfg.param('missing', 7) == 7
    assert load_experiment_config('estimates', out=str(tmp_path / 'x')).out_dir == tmp_path / 'x'
    data = cfg.to_json()
    assert data['grid']['N'] == cfg.grid_points and data['command'] == 'estimates'
    assert 'out' not in data


def test_parse_int_list():
    assert parse_int_list('1,2, 3', '--ks') == [1, 2, 3]
    assert parse_int_list(4, '--dims', minimum=1) == [4]
    for text, minimum in (('', 0), ('a,b', 0), ('0,1', 1)):
        with pytest.raises(ExperimentConfigError):
            parse_int_list(text, '--x', minimum)
