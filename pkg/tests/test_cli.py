import csv
import json

import pytest

from weylmoyal.bundles import BaseSpace, PoissonBundle, load_bundle, save_bundle
from weylmoyal.functions import PlaneWaveSum, load_planewave, save_planewave
from weylmoyal.poisson import PoissonVectorSpace
from weylmoyal.star import EXACT


def write_config(tmp_path, data, name='config.json'):
    path = tmp_path / name
    path.write_text(json.dumps(data))
    return path


def read_report(out):
    return json.loads((out / 'report.json').read_text())


def read_rows(path):
    with path.open(newline='') as fh:
        return list(csv.DictReader(fh))


def check_names(report):
    return {c['name'] for c in report['checks']}


@pytest.mark.parametrize('args, data', [
    (['--tol-override', 'nonsense=1e-3'], {}),
    (['--tol-override', 'flip'], {}),
    ([], {'grid': {'N': 15}}),
    ([], {'colour': 'red'}),
    ([], {'tolerances': {'flip': 0}}),
])
def test_config_errors_exit_2(runner, tmp_path, args, data):
    out = tmp_path / 'out'
    config = write_config(tmp_path, data)
    result = runner.invoke(args=['star', '--config', str(config), '--out', str(out), *args])
    assert result.exit_code == 2
    report = read_report(out)
    assert report['status'] == 'config-error' and report['exit_code'] == 2
    assert report['error']
    assert not (out / 'results.csv').exists()


def test_invalid_json_exits_2(runner, tmp_path):
    out = tmp_path / 'out'
    (tmp_path / 'bad.json').write_text('{"seed": 1,,}')
    result = runner.invoke(args=['norms', '--config', str(tmp_path / 'bad.json'), '--out', str(out)])
    assert result.exit_code == 2
    assert 'config-error' in result.output
    assert read_report(out)['status'] == 'config-error'


def test_star_needs_both_factors(runner, tmp_path):
    out = tmp_path / 'out'
    save_planewave(PlaneWaveSum.phase([1.0, 0.0]), tmp_path / 'f.json')
    result = runner.invoke(args=['star', '--f', str(tmp_path / 'f.json'), '--out', str(out)])
    assert result.exit_code == 2


def test_star_sweep_at_zero_sigma(runner, tmp_path):
    out = tmp_path / 'out'
    config = write_config(tmp_path, {'theta': 0.0, 'grid': {'n': 2, 'N': 16}, 'count': 3})
    result = runner.invoke(args=['star', '--config', str(config), '--out', str(out)])
    assert result.exit_code == 0, result.output
    report = read_report(out)
    assert report['status'] == 'ok' and report['checks_failed'] == 0
    assert {'flip', 'twisted_convolution', 'pointwise', 'associativity', 'exact_algebra'} <= check_names(report)
    assert len(read_rows(out / 'results.csv')) == 2
    assert 'star: ok' in result.output


def test_star_from_planewave_files(runner, tmp_path):
    out = tmp_path / 'out'
    f = PlaneWaveSum(2, [1.0, 0.5j], [[1.0, 0.0], [0.0, 1.0]])
    g = PlaneWaveSum.phase([0.0, -2.0], 2.0)
    save_planewave(f, tmp_path / 'f.json')
    save_planewave(g, tmp_path / 'g.json')
    result = runner.invoke(args=['star', '--f', str(tmp_path / 'f.json'), '--g', str(tmp_path / 'g.json'),
                                 '--out', str(out)])
    assert result.exit_code == 0, result.output
    product = load_planewave(out / 'product.json', n=2)
    assert len(product) == 2
    assert read_report(out)['summary']['backend'] == EXACT


def test_norms_planewave_corpus(runner, tmp_path):
    out = tmp_path / 'out'
    config = write_config(tmp_path, {'grid': {'n': 2, 'N': 8}, 'corpus': 'planewave', 'count': 4})
    result = runner.invoke(args=['norms', '--config', str(config), '--out', str(out), '--levels', '2'])
    assert result.exit_code == 0, result.output
    report = read_report(out)
    assert check_names(report) == {'norm_chain', 'unit_norm', 'ccr', 'homomorphism', 'conjugation',
                                   'strong_continuity'}
    ccr = next(c for c in report['checks'] if c['name'] == 'ccr')
    assert '[0.0, 0.5, 1.0, 2.0]' in ccr['detail']
    rows = read_rows(out / 'results.csv')
    assert len(rows) == 4 and rows[0]['case'] == '0'
    table = json.loads((out / 'fixtures' / 'strong_continuity.json').read_text())
    assert [row['level'] for row in table] == [0, 1]


def test_approx_id(runner, tmp_path):
    out = tmp_path / 'out'
    config = write_config(tmp_path, {'grid': {'n': 2, 'N': 64}, 'count': 2})
    result = runner.invoke(args=['approx-id', '--config', str(config), '--out', str(out),
                                 '--tol-override', 'approx_identity=0.5'])
    assert result.exit_code == 0, result.output
    rows = read_rows(out / 'results.csv')
    assert list(rows[0]) == ['case', 'k', 'error'] and len(rows) == 10
    bad = runner.invoke(args=['approx-id', '--config', str(config), '--out', str(out), '--ks', '3,2'])
    assert bad.exit_code == 2


def test_estimates_are_deterministic(runner, tmp_path):
    config = write_config(tmp_path, {'grid': {'N': 16}, 'count': 2})
    outputs = []
    for name in ('a', 'b'):
        out = tmp_path / name
        result = runner.invoke(args=['estimates', '--config', str(config), '--out', str(out),
                                     '--dims', '1', '--max-order', '0'])
        assert result.exit_code == 0, result.output
        outputs.append(out)
    for artifact in ('results.csv', 'report.json'):
        assert (outputs[0] / artifact).read_bytes() == (outputs[1] / artifact).read_bytes()
    rows = read_rows(outputs[0] / 'results.csv')
    assert {row['n'] for row in rows} == {'1'} and {row['constant_source'] for row in rows} == {'fitted'}


def test_estimates_freeze_then_reuse(app, runner, tmp_path):
    config = write_config(tmp_path, {'grid': {'N': 16}, 'count': 2})
    args = ['estimates', '--config', str(config), '--dims', '1', '--max-order', '0']
    result = runner.invoke(args=[*args, '--out', str(tmp_path / 'a'), '--freeze'])
    assert result.exit_code == 0, result.output
    frozen = tmp_path / 'fixtures' / 'seminorm_constants.json'
    assert list(json.loads(frozen.read_text())) == ['n1_p0_q0']
    result = runner.invoke(args=[*args, '--out', str(tmp_path / 'b')])
    assert result.exit_code == 0, result.output
    assert read_report(tmp_path / 'b')['summary']['constants_source'] == 'fixture'


def test_bundle_round_trips(runner, tmp_path):
    out = tmp_path / 'out'
    config = write_config(tmp_path, {'count': 4})
    result = runner.invoke(args=['bundle', '--config', str(config), '--out', str(out),
                                 '--max-points', '3', '--max-dim', '2'])
    assert result.exit_code == 0, result.output
    report = read_report(out)
    assert {'roundtrip', 'degenerate_detected'} <= check_names(report)
    degenerate = json.loads((out / 'fixtures' / 'degenerate.json').read_text())
    assert degenerate['ok'] is False
    assert len(read_rows(out / 'results.csv')) == 4


def test_bundle_usc_sampling(runner, tmp_path):
    out = tmp_path / 'out'
    base = BaseSpace.sampled([[0.0], [0.5], [1.0]], k=1)
    bundle = PoissonBundle(base, 2, {pid: PoissonVectorSpace.canonical(2, t).sigma
                                     for pid, t in zip(base.ids, (0.0, 0.5, 1.0))})
    save_bundle(bundle, tmp_path / 'bundle.json')
    config = write_config(tmp_path, {'count': 1, 'params': {'usc_points': 8}})
    result = runner.invoke(args=['bundle', '--config', str(config), '--out', str(out),
                                 '--bundle-file', str(tmp_path / 'bundle.json')])
    assert result.exit_code == 0, result.output
    usc = json.loads((out / 'fixtures' / 'usc.json').read_text())
    assert [row['id'] for row in usc] == base.ids
    assert 'usc_flagged' in read_report(out)['summary']


def test_orbit(runner, tmp_path):
    out = tmp_path / 'out'
    result = runner.invoke(args=['orbit', '--samples', '12', '--out', str(out)])
    assert result.exit_code == 0, result.output
    report = read_report(out)
    assert check_names(report) == {'rank_constant', 'invariants', 'equivariance', 'dimension_count',
                                   'trivialization', 'tangent_frame'}
    assert report['summary']['stabilizer_dim'] == 2 and report['summary']['tangent_rank'] == 4
    rows = read_rows(out / 'invariants.csv')
    assert len(rows) == 12 and {row['rank'] for row in rows} == {'4'}
    bundle = load_bundle(out / 'fixtures' / 'orbit_bundle.json')
    assert len(bundle.base) == 12 and set(bundle.ranks().values()) == {4}
