import numpy as np
import pytest

from weylmoyal.corpus import gaussian_corpus, lattice_frequency, random_planewave_sum
from weylmoyal.errors import (
    ConvergenceError,
    DimensionError,
    GridSizeError,
    RankError,
    UnitarityError,
    UnsupportedRepresentationError,
)
from weylmoyal.functions import GridSpec, PlaneWaveSum, make_gaussian
from weylmoyal.poisson import HeisenbergElement, PoissonVectorSpace, heisenberg_product, standard_symplectic
from weylmoyal.representations import (
    OperatorMatrix,
    RepSpec,
    apply_regular,
    conjugation_residual,
    doubled_pairing,
    doubled_rep,
    faithfulness_witness,
    irrep_from_covector,
    irrep_op,
    left_translation,
    nondegeneracy_residuals,
    norm_bound_l1,
    norm_chain,
    operator_norm,
    operator_norm_estimate,
    quantization_map,
    regular_rep,
    rep_from_quantization,
    right_translation,
    schrodinger_op,
    strong_continuity_table,
    weyl_quantize,
)
from weylmoyal.star import GRID, StarContext, star_exact, star_grid

CANONICAL = PoissonVectorSpace.canonical(2)


@pytest.fixture(scope='module')
def small():
    return GridSpec.commensurate(2, 8, CANONICAL.sigma, 12.0)


@pytest.fixture(scope='module')
def medium():
    return GridSpec.commensurate(2, 16, CANONICAL.sigma, 12.0)


def lattice(spec, *k):
    return np.array(k, dtype=float) * spec.dual_cell


def test_operator_matrix_validation():
    with pytest.raises(DimensionError):
        OperatorMatrix(np.zeros((2, 3)))
    with pytest.raises(UnitarityError):
        OperatorMatrix(2 * np.eye(3), unitary=True)
    assert OperatorMatrix.identity(4).unitarity_residual() < 1e-15


def test_regular_rep_is_a_projective_homomorphism(small):
    rep = RepSpec.regular(CANONICAL, small)
    xi, eta = lattice(small, 1, -2), lattice(small, 3, 1)
    a, b = regular_rep(rep, xi), regular_rep(rep, eta)
    assert a.unitarity_residual() < 1e-12
    twist = np.exp(-0.5j * CANONICAL.pairing(xi, eta))
    assert ((a @ b) - regular_rep(rep, xi + eta) * twist).frobenius() < 1e-10
    ccr = np.exp(-1j * CANONICAL.pairing(xi, eta))
    assert ((a @ b) - (b @ a) * ccr).frobenius() < 1e-10
    psi = make_gaussian(small, [0.3, 0.0])
    np.testing.assert_allclose(apply_regular(rep, xi, psi).flat(), a @ psi.flat(), atol=1e-12)
    with pytest.raises(UnsupportedRepresentationError):
        regular_rep(RepSpec.doubled(CANONICAL, small), xi)


@pytest.mark.parametrize('theta', [0.0, 0.5, 1.0, 2.0])
def test_regular_rep_phase_law_across_sigma(theta):
    pvs = PoissonVectorSpace.canonical(2, theta)
    spec = GridSpec.commensurate(2, 8, pvs.sigma, 12.0)
    assert spec.is_commensurate(pvs.sigma)
    rep = RepSpec.regular(pvs, spec)
    rng = np.random.default_rng(17)
    for _ in range(5):
        xi, eta = lattice_frequency(spec, rng), lattice_frequency(spec, rng)
        a, b = regular_rep(rep, xi), regular_rep(rep, eta)
        twist = np.exp(-0.5j * pvs.pairing(xi, eta))
        assert ((a @ b) - regular_rep(rep, xi + eta) * twist).frobenius() < 1e-10
        assert ((a @ b) - (b @ a) * np.exp(-1j * pvs.pairing(xi, eta))).frobenius() < 1e-10


def test_weyl_quantization_is_multiplicative(small):
    rep = RepSpec.regular(CANONICAL, small)
    ctx = StarContext(CANONICAL)
    rng = np.random.default_rng(3)
    f = random_planewave_sum(rng, 2, terms=2, kmax=2, cell=small.dual_cell)
    g = random_planewave_sum(rng, 2, terms=2, kmax=2, cell=small.dual_cell)
    wf, wg = weyl_quantize(rep, f), weyl_quantize(rep, g)
    scale = f.coefficient_l1() * g.coefficient_l1()
    assert (weyl_quantize(rep, star_exact(ctx, f, g)) - wf @ wg).frobenius() < 1e-10 * scale
    assert (weyl_quantize(rep, f.involution()) - wf.adjoint()).frobenius() < 1e-10 * f.coefficient_l1()
    assert (weyl_quantize(rep, PlaneWaveSum.unit(2)) - OperatorMatrix.identity(small.size)).frobenius() < 1e-12
    assert weyl_quantize(rep, PlaneWaveSum.zero(2)).frobenius() == 0.0
    xi = lattice(small, 2, -1)
    recovered = rep_from_quantization(quantization_map(rep), xi)
    assert (recovered - regular_rep(rep, xi)).frobenius() < 1e-12


def test_grid_quantization_matches_left_translation(small):
    rep = RepSpec.regular(CANONICAL, small)
    ctx = StarContext(CANONICAL, GRID, small)
    f, h = gaussian_corpus(small, 2, seed=5)
    left = left_translation(ctx, f)
    assert (weyl_quantize(rep, f) - left).frobenius() < 1e-10
    np.testing.assert_allclose(left @ h.flat(), star_grid(ctx, f, h).flat(), atol=1e-12)
    np.testing.assert_allclose(right_translation(ctx, f) @ h.flat(), star_grid(ctx, h, f).flat(), atol=1e-12)


def test_power_iteration():
    diag = OperatorMatrix(np.diag([3.0, 1.0, 0.5]))
    est = operator_norm_estimate(diag)
    assert est.value == pytest.approx(3.0, rel=1e-9)
    assert est.lower <= est.upper
    assert operator_norm(OperatorMatrix.zeros(3)) == 0.0
    assert operator_norm(OperatorMatrix.identity(5)) == pytest.approx(1.0)
    close = OperatorMatrix(np.diag([1.0, 0.999999, 0.5]))
    with pytest.raises(ConvergenceError) as info:
        operator_norm_estimate(close, tol=1e-15, max_iter=3)
    assert info.value.lower <= info.value.upper and info.value.iterations == 3


def test_norm_chain_on_gaussians(medium):
    ctx = StarContext(CANONICAL, GRID, medium)
    for f in gaussian_corpus(medium, 2, seed=0):
        row = norm_chain(ctx, f)
        assert row['operator_norm'] <= row['l1'] * (1 + 1e-9)
        assert row['l1'] == pytest.approx(norm_bound_l1(ctx, f))
        assert faithfulness_witness(ctx, f) > 0.0


def test_planewave_norms(small):
    rep = RepSpec.regular(CANONICAL, small)
    ctx = StarContext(CANONICAL, GRID, small)
    assert operator_norm(weyl_quantize(rep, PlaneWaveSum.phase(lattice(small, 1, 2)))) == pytest.approx(1.0)
    pw = PlaneWaveSum(2, [1.0, 2.0j], [lattice(small, 1, 0), lattice(small, 0, 1)])
    assert operator_norm(weyl_quantize(rep, pw)) <= norm_bound_l1(ctx, pw) * (1 + 1e-9)


def test_dense_size_cap():
    spec = GridSpec(2, 10.0, 128)
    with pytest.raises(GridSizeError):
        regular_rep(RepSpec.regular(PoissonVectorSpace(2, np.zeros((2, 2))), spec), [0.0, 0.0])


def test_doubled_representation(small):
    rep = RepSpec.doubled(CANONICAL, small)
    x1, xi1 = np.array([small.h, 0.0]), lattice(small, 0, 1)
    x2, xi2 = np.array([0.0, 2 * small.h]), lattice(small, 1, 1)
    a, b = doubled_rep(rep, x1, xi1), doubled_rep(rep, x2, xi2)
    ccr = np.exp(-1j * doubled_pairing(x1, xi1, x2, xi2))
    assert ((a @ b) - (b @ a) * ccr).frobenius() < 1e-10
    g = make_gaussian(small, [0.2, -0.1])
    assert conjugation_residual(rep, x1, xi1, g) < 1e-9
    assert conjugation_residual(rep, x2, xi2, g) < 1e-9


def test_schrodinger_irrep():
    pvs = PoissonVectorSpace.canonical(3)
    line = GridSpec(1, np.sqrt(2 * np.pi), 8)
    rep = RepSpec.irrep(pvs, line, weight=[0.0, 0.0, 0.7])
    assert rep.half_rank == 1 and rep.carrier_dim == 8
    hw = PoissonVectorSpace(2, standard_symplectic(1))
    a = HeisenbergElement([line.dual_cell, line.h], 0.3)
    b = HeisenbergElement([-2 * line.dual_cell, 3 * line.h], -0.1)
    kernel = np.array([0.0, 0.0, 1.0])
    ab = irrep_op(rep, kernel, a) @ irrep_op(rep, kernel, b)
    expected = irrep_op(rep, 2 * kernel, heisenberg_product(hw, a, b))
    assert (ab - expected).frobenius() < 1e-10
    np.testing.assert_allclose(
        irrep_op(rep, kernel, HeisenbergElement.identity(2)).entries, np.exp(0.7j) * np.eye(8), atol=1e-14
    )
    with pytest.raises(RankError):
        irrep_op(rep, [1.0, 0.0, 0.0], a)
    with pytest.raises(UnsupportedRepresentationError):
        schrodinger_op(RepSpec.regular(CANONICAL, GridSpec(2, 3.0, 4)), [0.0], [0.0])


def test_rank_zero_irreps_are_point_evaluations():
    zero = PoissonVectorSpace(2, np.zeros((2, 2)))
    v = np.array([0.4, -1.1])
    rep = RepSpec.irrep(zero, GridSpec(2, 3.0, 4), weight=v)
    assert rep.carrier_dim == 1
    f = PlaneWaveSum(2, [1.0, -0.5j], [[1.0, 2.0], [0.3, 0.0]])
    assert weyl_quantize(rep, f).entries[0, 0] == pytest.approx(f.evaluate(v))
    assert irrep_from_covector(rep, [1.0, 2.0]).entries[0, 0] == pytest.approx(np.exp(1j * (v @ [1.0, 2.0])))


def test_continuity_and_nondegeneracy(small):
    table = strong_continuity_table(CANONICAL, small, levels=3)
    residuals = [row['residual'] for row in table]
    assert all(b < a for a, b in zip(residuals, residuals[1:]))
    assert [row['level'] for row in table] == [0, 1, 2]
    spec = GridSpec.commensurate(2, 32, CANONICAL.sigma, 12.0)
    ctx = StarContext(CANONICAL, GRID, spec)
    values = nondegeneracy_residuals(ctx, make_gaussian(spec), [0, 1])
    assert values[1] < values[0]
