import numpy as np
import pytest

from weylmoyal.bundles import (
    BaseSpace,
    PoissonBundle,
    SectionOverBase,
    compose_maps,
    cstar_fiber_sup_norm,
    evaluation,
    fiber_star,
    load_bundle,
    module_action,
    pullback_bundle,
    pullback_section,
    save_bundle,
    section_sup_seminorm,
    usc_sample_check,
)
from weylmoyal.errors import AntisymmetryError, DimensionError, UnknownPointError, UnsupportedRepresentationError
from weylmoyal.functions import GridSpec, PlaneWaveSum, make_gaussian
from weylmoyal.poisson import PoissonVectorSpace
from weylmoyal.star import StarContext, star_exact


def canonical(theta):
    return PoissonVectorSpace.canonical(2, theta).sigma


@pytest.fixture
def bundle():
    base = BaseSpace.finite_set(['a', 'b', 'c'])
    return PoissonBundle(base, 2, {'a': canonical(1.0), 'b': canonical(0.5), 'c': np.zeros((2, 2))})


def test_base_space():
    with pytest.raises(DimensionError):
        BaseSpace.finite_set(['a', 'a'])
    base = BaseSpace.sampled([[0.0], [1.0], [2.0], [3.0]], k=2)
    assert base.ids == ['p0', 'p1', 'p2', 'p3'] and not base.finite
    assert set(base.neighbors('p1')) == {'p0', 'p2'}
    with pytest.raises(UnknownPointError):
        base.index('q')
    again = BaseSpace.from_json(base.to_json(), finite=False)
    assert again.ids == base.ids and again.neighbors('p3') == base.neighbors('p3')
    with pytest.raises(DimensionError):
        BaseSpace.finite_set(['x']).with_knn_neighbors(1)


def test_bundle_validation(bundle):
    base = bundle.base
    with pytest.raises(DimensionError):
        PoissonBundle(base, 2, {'a': canonical(1.0)})
    with pytest.raises(AntisymmetryError):
        PoissonBundle.constant(base, [[0.0, 1.0], [1.0, 0.0]])
    with pytest.raises(DimensionError):
        PoissonBundle.constant(base, np.zeros((3, 3))).context_at('a', 'grid')
    assert bundle.ranks() == {'a': 2, 'b': 2, 'c': 0}


def test_bundle_files(tmp_path, bundle):
    save_bundle(bundle, tmp_path / 'bundle.json')
    back = load_bundle(tmp_path / 'bundle.json')
    assert back.base.ids == bundle.base.ids and back.base.finite
    for pid in bundle.base.ids:
        np.testing.assert_array_equal(back.sigma_at[pid], bundle.sigma_at[pid])
    (tmp_path / 'broken.json').write_text('{"n": 2}')
    with pytest.raises(DimensionError):
        load_bundle(tmp_path / 'broken.json')


def test_sections(bundle):
    spec = GridSpec(2, 4.0, 8)
    with pytest.raises(DimensionError):
        SectionOverBase(bundle, {'a': PlaneWaveSum.unit(2)})
    mixed = {'a': PlaneWaveSum.unit(2), 'b': make_gaussian(spec), 'c': make_gaussian(spec)}
    with pytest.raises(UnsupportedRepresentationError):
        SectionOverBase(bundle, mixed)
    with pytest.raises(UnknownPointError):
        SectionOverBase(bundle, {'a': PlaneWaveSum.unit(2), 'b': PlaneWaveSum.unit(2),
                                 'c': PlaneWaveSum.unit(2), 'd': PlaneWaveSum.unit(2)})
    phi = SectionOverBase(bundle, {pid: PlaneWaveSum.phase([1.0, 0.0]) for pid in bundle.base.ids})
    assert evaluation(phi, 'b') == phi['b']
    with pytest.raises(UnknownPointError):
        phi['z']


def test_fiber_star_is_pointwise(bundle):
    phi = SectionOverBase(bundle, {pid: PlaneWaveSum.phase([1.0, 0.0]) for pid in bundle.base.ids})
    psi = SectionOverBase(bundle, {pid: PlaneWaveSum.phase([0.0, 2.0], 1j) for pid in bundle.base.ids})
    product = fiber_star(bundle, phi, psi)
    for pid in bundle.base.ids:
        expected = star_exact(StarContext(bundle.pvs_at(pid)), phi[pid], psi[pid])
        assert product[pid].distance(expected) < 1e-15
    assert product['c'] == PlaneWaveSum.phase([1.0, 2.0], 1j)

    f = {'a': 2.0, 'b': -1.0, 'c': 0.5j}
    left = fiber_star(bundle, module_action(f, phi), psi)
    right = fiber_star(bundle, phi, module_action(f, psi))
    scaled = module_action(f, product)
    for pid in bundle.base.ids:
        assert left[pid].distance(scaled[pid]) < 1e-14
        assert right[pid].distance(scaled[pid]) < 1e-14
    assert all(v.is_zero() for v in SectionOverBase.zero_like(phi).values.values())


def test_sup_norms(bundle):
    spec = GridSpec(2, 4.0, 8)
    amps = {'a': 1.0, 'b': 3.0, 'c': 0.5}
    section = SectionOverBase(bundle, {pid: make_gaussian(spec, amplitude=amp) for pid, amp in amps.items()})
    assert section_sup_seminorm(section, 0, 0) == pytest.approx(3.0)
    assert section_sup_seminorm(section, 0, 0, subset=['a', 'c']) == pytest.approx(1.0)
    with pytest.raises(DimensionError):
        section_sup_seminorm(section, 0, 0, subset=[])
    phases = SectionOverBase(bundle, {pid: PlaneWaveSum.phase([np.pi / 3.0, 0.0]) for pid in bundle.base.ids})
    carrier = GridSpec(2, 3.0, 4)
    assert cstar_fiber_sup_norm(phases, carrier) == pytest.approx(1.0)
    with pytest.raises(DimensionError):
        cstar_fiber_sup_norm(phases)


def test_usc_sampling_flags_upward_jumps():
    base = BaseSpace.sampled([[0.0], [1.0], [2.0], [3.0], [4.0]], k=2)
    bundle = PoissonBundle.constant(base, canonical(1.0))
    spec = GridSpec(2, 4.0, 8)
    amps = [1.0, 1.0, 2.0, 1.0, 1.0]
    section = SectionOverBase(bundle, {pid: make_gaussian(spec, amplitude=a) for pid, a in zip(base.ids, amps)})
    report = usc_sample_check(bundle, section, 0, 0)
    assert report.violations == ['p2'] and not report.ok
    assert report.rows[2].excess == pytest.approx(1.0)
    flat = BaseSpace.finite_set(['x'])
    with pytest.raises(DimensionError):
        usc_sample_check(PoissonBundle.constant(flat, canonical(1.0)),
                         SectionOverBase(PoissonBundle.constant(flat, canonical(1.0)),
                                         {'x': make_gaussian(spec)}), 0, 0)


def test_usc_sampling_accepts_smooth_families():
    base = BaseSpace.sampled([[0.1 * i] for i in range(5)], k=2)
    bundle = PoissonBundle.constant(base, canonical(1.0))
    spec = GridSpec(2, 6.0, 64)
    widths = [1.0, 1.01, 1.02, 1.03, 1.04]
    widening = SectionOverBase(bundle, {pid: make_gaussian(spec, widths=w) for pid, w in zip(base.ids, widths)})
    report = usc_sample_check(bundle, widening, 1, 0)
    assert report.ok, [(row.id, row.excess, row.allowance) for row in report.rows]
    assert all(row.excess <= row.allowance for row in report.rows)

    widths[2] = 1.5
    spiked = SectionOverBase(bundle, {pid: make_gaussian(spec, widths=w) for pid, w in zip(base.ids, widths)})
    assert usc_sample_check(bundle, spiked, 1, 0).violations == ['p2']

    varying = PoissonBundle(base, 2, {pid: canonical(t) for pid, t in zip(base.ids, widths)})
    same = SectionOverBase(varying, {pid: make_gaussian(spec) for pid in base.ids})
    assert usc_sample_check(varying, same, 1, 0).ok


def test_pullbacks(bundle):
    base = BaseSpace.finite_set(['u', 'v'])
    f = {'u': 'b', 'v': 'b'}
    pulled = pullback_bundle(f, base, bundle)
    assert pulled.sigma_at['u'] is bundle.sigma_at['b']
    phi = SectionOverBase(bundle, {pid: PlaneWaveSum.phase([float(i), 0.0]) for i, pid in enumerate(bundle.base.ids)})
    assert pullback_section(f, pulled, phi)['v'] == phi['b']
    with pytest.raises(DimensionError):
        pullback_bundle({'u': 'a'}, base, bundle)
    with pytest.raises(UnknownPointError):
        pullback_bundle({'u': 'a', 'v': 'zz'}, base, bundle)
    assert compose_maps({'b': 'y'}, f) == {'u': 'y', 'v': 'y'}
