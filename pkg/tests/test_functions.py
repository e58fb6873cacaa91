import math

import numpy as np
import pytest
from hypothesis import given, seed, settings
from hypothesis import strategies as st

from weylmoyal.errors import CommensurabilityError, DimensionError, GridSizeError
from weylmoyal.functions import (
    FREQUENCY,
    GridFunction,
    GridSpec,
    PlaneWaveSum,
    eval_planewave,
    fourier_forward,
    fourier_inverse,
    l1_estimate,
    l1_norm_freq,
    load_grid_function,
    load_planewave,
    make_gaussian,
    multi_indices,
    sample_planewave,
    save_grid_function,
    save_planewave,
    seminorm,
    spectral_derivative,
    translate,
)


@pytest.fixture
def line():
    return GridSpec(1, 10.0, 64)


def test_grid_spec_validation():
    with pytest.raises(DimensionError):
        GridSpec(1, 1.0, 15)
    with pytest.raises(DimensionError):
        GridSpec(1, 0.0, 16)
    with pytest.raises(DimensionError):
        GridSpec(0, 1.0, 16)
    with pytest.raises(GridSizeError):
        GridSpec(3, 1.0, 128)


def test_grid_layout(line):
    assert line.h == pytest.approx(20.0 / 64)
    assert line.axis()[0] == -10.0 and 0.0 in line.axis()
    assert line.dual_axis()[0] == pytest.approx(-32 * math.pi / 10)
    assert GridSpec(2, 3.0, 8).points().shape == (8, 8, 2)


def test_commensurate_half_width():
    sigma = np.array([[0.0, 1.0], [-1.0, 0.0]])
    spec = GridSpec.commensurate(2, 64, sigma, 12.0)
    assert spec.L == pytest.approx(math.sqrt(16 * math.pi))
    assert spec.is_commensurate(sigma)
    assert not GridSpec(2, 12.0, 64).is_commensurate(sigma)
    assert GridSpec.commensurate(2, 32, np.zeros((2, 2)), 12.0).L == 12.0


def test_lattice_index(line):
    assert line.lattice_index([3 * math.pi / 10]).tolist() == [3]
    with pytest.raises(CommensurabilityError):
        line.lattice_index([0.5])
    with pytest.raises(DimensionError):
        line.lattice_index([0.0, 0.0])


def test_gaussian_transform_matches_closed_form(line):
    fcheck = fourier_inverse(make_gaussian(line))
    assert fcheck.domain == FREQUENCY
    xi = line.dual_axis()
    expected = np.exp(-0.5 * xi ** 2) / math.sqrt(2 * math.pi)
    np.testing.assert_allclose(fcheck.samples, expected, atol=1e-12)


@seed(5)
@settings(max_examples=20, deadline=None)
@given(st.integers(min_value=0, max_value=2 ** 31 - 1))
def test_fourier_pair_inverts(rng_seed):
    spec = GridSpec(2, 4.0, 16)
    rng = np.random.default_rng(rng_seed)
    f = GridFunction(spec, rng.standard_normal(spec.shape) + 1j * rng.standard_normal(spec.shape))
    back = fourier_forward(fourier_inverse(f))
    np.testing.assert_allclose(back.samples, f.samples, atol=1e-12)


def test_translate_and_derivative(line):
    g = make_gaussian(line)
    moved = translate(g, [1.5])
    np.testing.assert_allclose(moved.samples, make_gaussian(line, [1.5]).samples, atol=1e-10)
    x = line.axis()
    deriv = spectral_derivative(g, (1,))
    np.testing.assert_allclose(deriv.samples, -x * np.exp(-0.5 * x ** 2), atol=1e-10)
    assert spectral_derivative(g, (0,)) is g
    with pytest.raises(DimensionError):
        translate(g, [1.0, 2.0])


def test_seminorm(line):
    g = make_gaussian(line)
    assert seminorm(GridFunction.zeros(line), 2, 2) == 0.0
    assert seminorm(g, 0, 0) == pytest.approx(1.0)
    # max |x e^{-x²/2}| = e^{-1/2}, attained near x = ±1
    assert seminorm(g, 1, 0) == pytest.approx(1.0 + math.exp(-0.5), rel=1e-2)
    assert multi_indices(2, 1) == [(0, 0), (0, 1), (1, 0)]


def test_l1_estimate_holds_for_gaussians():
    spec = GridSpec(2, 8.0, 32)
    for center in ([0.0, 0.0], [1.0, -0.5]):
        est = l1_estimate(make_gaussian(spec, center, [0.9, 1.1]))
        assert est['slack'] >= 0.0
        assert est['seminorm_bound'] >= est['l1']


def test_gaussian_l1_closed_form():
    spec = GridSpec(1, 10.0, 64)
    est = l1_estimate(make_gaussian(spec))
    # ∫ (2π)^{-1/2} e^{-ξ²/2} dξ = 1
    assert est['l1'] == pytest.approx(1.0, abs=1e-10)


def test_l1_norm_freq():
    spec = GridSpec(1, 12.0, 256)
    delta = np.zeros(spec.shape, dtype=complex)
    delta[spec.N // 2 + 3] = 1.0 / spec.dual_cell
    assert l1_norm_freq(GridFunction(spec, delta, FREQUENCY)) == pytest.approx(1.0)
    assert l1_norm_freq(GridFunction.zeros(spec, FREQUENCY)) == 0.0
    g = make_gaussian(spec)
    assert l1_norm_freq(fourier_inverse(g)) <= 2 * math.pi * seminorm(g, 2, 2)


def test_grid_function_arithmetic(line):
    g = make_gaussian(line)
    other = GridFunction.zeros(GridSpec(1, 5.0, 64))
    with pytest.raises(DimensionError):
        g + other
    assert (2 * g - g).max_abs() == pytest.approx(1.0)
    assert make_gaussian(line, amplitude=1j).conj().samples[32] == pytest.approx(-1j)
    assert g.l2_norm() == pytest.approx(math.pi ** 0.25, rel=1e-12)
    with pytest.raises(DimensionError):
        fourier_inverse(g).conj()


def test_planewave_merging():
    pw = PlaneWaveSum(1, [1.0, 2.0], [[0.5], [0.5 + 1e-12]])
    assert len(pw) == 1 and pw.coeffs[0] == 3.0 and pw.freqs[0, 0] == 0.5
    assert PlaneWaveSum(1, [1.0, -1.0], [[1.0], [1.0]]).is_zero()
    ordered = PlaneWaveSum(2, [1, 1, 1], [[1, 0], [0, 2], [0, 1]])
    assert ordered.freqs.tolist() == [[0, 1], [0, 2], [1, 0]]
    with pytest.raises(DimensionError):
        PlaneWaveSum(2, [1.0], [[1.0, 0.0], [0.0, 1.0]])


def test_planewave_algebra():
    a = PlaneWaveSum(2, [2.0, 1j], [[1.0, 0.0], [0.0, -1.0]])
    b = PlaneWaveSum.phase([0.5, 0.5])
    prod = a * b
    assert sorted(map(tuple, prod.freqs.tolist())) == [(0.5, -0.5), (1.5, 0.5)]
    assert a.involution().involution() == a
    assert (a - a).is_zero()
    assert a * PlaneWaveSum.unit(2) == a
    assert (a * 0).is_zero()
    x = np.array([[0.3, -0.7], [1.1, 2.0]])
    np.testing.assert_allclose(prod.evaluate(x), a.evaluate(x) * b.evaluate(x), atol=1e-14)
    np.testing.assert_allclose(a.involution().evaluate(x), np.conj(a.evaluate(x)), atol=1e-14)
    assert a.partial(0) == PlaneWaveSum.phase([1.0, 0.0], 2j)
    assert a.coefficient_l1() == pytest.approx(3.0)
    assert a.distance(a * 1.5) == pytest.approx(1.5)
    with pytest.raises(DimensionError):
        a + PlaneWaveSum.unit(3)


def test_planewave_tensor():
    a = PlaneWaveSum.phase([1.0], 2.0)
    b = PlaneWaveSum(2, [1.0, 1.0], [[0.0, 1.0], [1.0, 0.0]])
    t = a.tensor(b)
    assert t.n == 3 and len(t) == 2
    assert t.evaluate([0.2, 0.4, -0.1]) == pytest.approx(a.evaluate([0.2]) * b.evaluate([0.4, -0.1]))
    assert a.tensor(PlaneWaveSum.zero(2)).is_zero()


def test_eval_planewave():
    assert eval_planewave(PlaneWaveSum.phase([1.0, 0.0]), [math.pi, 0.0]) == pytest.approx(-1.0)
    assert eval_planewave(PlaneWaveSum.unit(2), [3.7, -1.2]) == pytest.approx(1.0)
    np.testing.assert_allclose(eval_planewave(PlaneWaveSum.unit(1), np.zeros((4, 1))), np.ones(4))


def test_sample_planewave(line):
    pw = PlaneWaveSum.phase([2 * line.dual_cell], 1.0) + PlaneWaveSum.unit(1)
    f = sample_planewave(pw, line)
    np.testing.assert_allclose(f.samples, pw.evaluate(line.points()))
    with pytest.raises(CommensurabilityError):
        sample_planewave(PlaneWaveSum.phase([0.123]), line)
    assert sample_planewave(PlaneWaveSum.zero(1), line).max_abs() == 0.0


def test_files(tmp_path, line):
    g = make_gaussian(line, [0.5], amplitude=0.5 + 0.5j)
    save_grid_function(g, tmp_path / 'g.bin')
    back = load_grid_function(tmp_path / 'g.bin')
    assert back.spec == line
    np.testing.assert_allclose(back.samples, g.samples, atol=1e-7)
    (tmp_path / 'bad.bin').write_bytes(b'{"n": 1, "L": 10.0, "N": 64}\n' + b'\0' * 8)
    with pytest.raises(DimensionError):
        load_grid_function(tmp_path / 'bad.bin')

    pw = PlaneWaveSum(2, [1.0, -0.25j], [[1.0, 0.0], [0.0, 2.0]])
    save_planewave(pw, tmp_path / 'pw.json')
    assert load_planewave(tmp_path / 'pw.json') == pw
    with pytest.raises(DimensionError):
        PlaneWaveSum.from_json([])
    assert PlaneWaveSum.from_json([], n=2).is_zero()
