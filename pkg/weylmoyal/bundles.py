"""Poisson vector bundles over sampled base spaces and their section algebras."""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree

from weylmoyal.errors import (
    AntisymmetryError,
    DimensionError,
    UnknownPointError,
    UnsupportedRepresentationError,
)
from weylmoyal.functions import GridFunction, GridSpec, PlaneWaveSum, seminorm
from weylmoyal.poisson import PoissonVectorSpace
from weylmoyal.representations import RepSpec, left_translation, operator_norm, weyl_quantize
from weylmoyal.settings import get_setting
from weylmoyal.star import EXACT, GRID, MIXED, StarContext, star

logger = logging.getLogger(__name__)

USC_NOTE = 'Sampling can only falsify upper semicontinuity; no flags is not a proof.'


@dataclass(frozen=True, eq=False)
class BasePoint:
    id: str
    coords: np.ndarray = field(default_factory=lambda: np.zeros(0))
    compact: bool = True

    def __post_init__(self):
        object.__setattr__(self, 'id', str(self.id))
        object.__setattr__(self, 'coords', np.asarray(self.coords, dtype=float).reshape(-1))


class BaseSpace:
    """Ordered base samples with unique ids and an optional neighbor graph."""

    def __init__(self, points, finite: bool = True, neighbors: dict | None = None):
        self.points = tuple(p if isinstance(p, BasePoint) else BasePoint(p) for p in points)
        self.finite = bool(finite)
        ids = [p.id for p in self.points]
        if len(set(ids)) != len(ids):
            raise DimensionError('Base point ids must be unique.')
        self._index = {pid: i for i, pid in enumerate(ids)}
        self._neighbors = {}
        if neighbors:
            for pid, nbrs in neighbors.items():
                self.index(pid)
                for other in nbrs:
                    self.index(other)
                self._neighbors[str(pid)] = tuple(str(o) for o in nbrs)

    @classmethod
    def finite_set(cls, ids) -> BaseSpace:
        return cls([BasePoint(i) for i in ids], finite=True)

    @classmethod
    def sampled(cls, coords, ids=None, k: int = 2) -> BaseSpace:
        """Continuum samples; each point's neighbors are its k nearest samples."""
        coords = np.atleast_2d(np.asarray(coords, dtype=float))
        ids = [f'p{i}' for i in range(coords.shape[0])] if ids is None else [str(i) for i in ids]
        space = cls([BasePoint(i, c) for i, c in zip(ids, coords)], finite=False)
        return space.with_knn_neighbors(k)

    @property
    def ids(self) -> list[str]:
        return [p.id for p in self.points]

    def __len__(self):
        return len(self.points)

    def __contains__(self, pid):
        return str(pid) in self._index

    def index(self, pid) -> int:
        try:
            return self._index[str(pid)]
        except KeyError:
            raise UnknownPointError(f'Unknown base point {pid!r}.') from None

    def point(self, pid) -> BasePoint:
        return self.points[self.index(pid)]

    def with_knn_neighbors(self, k: int) -> BaseSpace:
        coords = np.array([p.coords for p in self.points])
        if coords.ndim != 2 or coords.shape[1] == 0:
            raise DimensionError('Neighbor graphs need coordinates on every base point.')
        count = min(k + 1, len(self.points))
        _, nbr = cKDTree(coords).query(coords, k=count)
        nbr = np.asarray(nbr).reshape(len(self.points), -1)
        graph = {}
        for i, p in enumerate(self.points):
            graph[p.id] = tuple(self.points[j].id for j in nbr[i] if j != i)
        return BaseSpace(self.points, self.finite, graph)

    def neighbors(self, pid) -> tuple[str, ...]:
        self.index(pid)
        return self._neighbors.get(str(pid), ())

    @property
    def has_neighbor_graph(self) -> bool:
        return bool(self._neighbors)

    def to_json(self) -> list:
        out = []
        for p in self.points:
            item = {'id': p.id, 'coords': [float(c) for c in p.coords]}
            if not p.compact:
                item['compact'] = False
            if p.id in self._neighbors:
                item['neighbors'] = list(self._neighbors[p.id])
            out.append(item)
        return out

    @classmethod
    def from_json(cls, data: list, finite: bool = True) -> BaseSpace:
        points, graph = [], {}
        for item in data:
            if isinstance(item, dict):
                points.append(BasePoint(item['id'], item.get('coords', []), bool(item.get('compact', True))))
                if item.get('neighbors'):
                    graph[str(item['id'])] = item['neighbors']
            else:
                points.append(BasePoint(item))
        return cls(points, finite, graph or None)


def compose_maps(g: dict, f: dict) -> dict:
    """g ∘ f for base maps given as id dictionaries."""
    return {x: g[y] for x, y in f.items()}


class PoissonBundle:
    """Fiber Poisson tensors σ(x) over a base; ranks may vary from point to point."""

    def __init__(self, base: BaseSpace, n: int, sigma_at: dict):
        self.base = base
        self.n = int(n)
        self.sigma_at = {}
        for pid in base.ids:
            if pid not in sigma_at:
                raise DimensionError(f'No Poisson tensor given at base point {pid!r}.')
            sigma = sigma_at[pid]
            if not isinstance(sigma, np.ndarray) or sigma.dtype != float:
                sigma = np.asarray(sigma, dtype=float)
            if sigma.shape != (self.n, self.n):
                raise DimensionError(f'sigma at {pid!r} has shape {sigma.shape}, expected {(self.n, self.n)}.')
            if not np.array_equal(sigma, -sigma.T):
                raise AntisymmetryError(f'sigma at {pid!r} is not antisymmetric.')
            self.sigma_at[pid] = sigma
        self._pvs = {}

    @classmethod
    def constant(cls, base: BaseSpace, sigma) -> PoissonBundle:
        sigma = np.asarray(sigma, dtype=float)
        return cls(base, sigma.shape[0], {pid: sigma for pid in base.ids})

    def pvs_at(self, pid) -> PoissonVectorSpace:
        pid = str(pid)
        self.base.index(pid)
        if pid not in self._pvs:
            self._pvs[pid] = PoissonVectorSpace(self.n, self.sigma_at[pid])
        return self._pvs[pid]

    def context_at(self, pid, backend: str = EXACT, spec: GridSpec | None = None) -> StarContext:
        return StarContext(self.pvs_at(pid), backend, spec)

    def ranks(self) -> dict:
        return {pid: self.pvs_at(pid).rank() for pid in self.base.ids}

    def to_json(self) -> dict:
        return {
            'base': self.base.to_json(),
            'finite': self.base.finite,
            'n': self.n,
            'sigma_at': {pid: self.sigma_at[pid].tolist() for pid in self.base.ids},
        }


def load_bundle(path) -> PoissonBundle:
    data = json.loads(Path(path).read_text())
    try:
        base = BaseSpace.from_json(data['base'], finite=bool(data.get('finite', True)))
        sigma_at = {
            str(k): PoissonVectorSpace.from_matrix(v).sigma for k, v in data['sigma_at'].items()
        }
        return PoissonBundle(base, int(data['n']), sigma_at)
    except KeyError as exc:
        raise DimensionError(f'{path}: bundle description is missing {exc}.') from None


def save_bundle(bundle: PoissonBundle, path) -> None:
    Path(path).write_text(json.dumps(bundle.to_json(), sort_keys=True))


class SectionOverBase:
    """A fiber element at every base point, all of one kind."""

    def __init__(self, bundle: PoissonBundle, values: dict):
        self.bundle = bundle
        self.values = {}
        kinds = set()
        for pid in bundle.base.ids:
            if pid not in values:
                raise DimensionError(f'Section has no value at base point {pid!r}.')
            value = values[pid]
            if not isinstance(value, (PlaneWaveSum, GridFunction)):
                raise UnsupportedRepresentationError(f'Unsupported fiber element {type(value).__name__}.')
            kinds.add(type(value))
            self.values[pid] = value
        unknown = set(map(str, values)) - set(bundle.base.ids)
        if unknown:
            raise UnknownPointError(f'Section has values at unknown points {sorted(unknown)}.')
        if len(kinds) > 1:
            raise UnsupportedRepresentationError('Section mixes plane-wave and grid fibers.')
        self.kind = kinds.pop() if kinds else None

    @classmethod
    def zero_like(cls, section: SectionOverBase) -> SectionOverBase:
        return module_action(lambda _pid: 0.0, section)

    def __getitem__(self, pid):
        return evaluation(self, pid)


def evaluation(section: SectionOverBase, pid):
    """δ_x(φ) = φ(x)."""
    section.bundle.base.index(pid)
    return section.values[str(pid)]


def _fiber_context(bundle: PoissonBundle, pid: str, a, b) -> StarContext:
    if isinstance(a, PlaneWaveSum) and isinstance(b, PlaneWaveSum):
        return bundle.context_at(pid)
    spec = a.spec if isinstance(a, GridFunction) else b.spec
    backend = GRID if isinstance(a, GridFunction) and isinstance(b, GridFunction) else MIXED
    return bundle.context_at(pid, backend, spec)


def fiber_star(bundle: PoissonBundle, phi: SectionOverBase, psi: SectionOverBase) -> SectionOverBase:
    """(φ ⋆ ψ)(x) = φ(x) ⋆_{σ(x)} ψ(x)."""
    if phi.bundle is not bundle and phi.bundle.base.ids != bundle.base.ids:
        raise DimensionError('First section lives on a different bundle.')
    if psi.bundle is not bundle and psi.bundle.base.ids != bundle.base.ids:
        raise DimensionError('Second section lives on a different bundle.')
    if phi.kind is not psi.kind and GridFunction not in (phi.kind, psi.kind):
        raise UnsupportedRepresentationError('Fiber kinds are not compatible.')
    values = {}
    for pid in bundle.base.ids:
        a, b = phi.values[pid], psi.values[pid]
        values[pid] = star(_fiber_context(bundle, pid, a, b), a, b)
    return SectionOverBase(bundle, values)


def module_action(f, section: SectionOverBase) -> SectionOverBase:
    """(fφ)(x) = f(x)φ(x); ``f`` is a mapping or a callable on point ids."""
    scale = f if callable(f) else (lambda pid: f[pid])
    values = {pid: section.values[pid] * complex(scale(pid)) for pid in section.bundle.base.ids}
    return SectionOverBase(section.bundle, values)


def _resolve_subset(section: SectionOverBase, subset) -> list[str]:
    ids = section.bundle.base.ids if subset is None else [str(s) for s in subset]
    if not ids:
        raise DimensionError('Seminorms need a nonempty set of base points.')
    for pid in ids:
        section.bundle.base.index(pid)
    return ids


def fiber_seminorm(value, p: int, q: int) -> float:
    if isinstance(value, GridFunction):
        return seminorm(value, p, q)
    raise UnsupportedRepresentationError('Fiber seminorms are evaluated on grid fibers.')


def section_sup_seminorm(section: SectionOverBase, p: int, q: int, subset=None) -> float:
    """‖φ‖_{s_{p,q},K} = max_{x∈K} s_{p,q}(φ(x))."""
    return max(fiber_seminorm(section.values[pid], p, q) for pid in _resolve_subset(section, subset))


def cstar_fiber_sup_norm(section: SectionOverBase, spec: GridSpec | None = None) -> float:
    """max_x ‖L_{σ(x)} φ(x)‖ over the sampled base points.

    Plane-wave fibers are quantized in the regular representation on ``spec``.
    """
    best = 0.0
    for pid in section.bundle.base.ids:
        value = section.values[pid]
        pvs = section.bundle.pvs_at(pid)
        if isinstance(value, GridFunction):
            op = left_translation(StarContext(pvs, GRID, value.spec), value)
        else:
            if spec is None:
                raise DimensionError('Plane-wave fibers need a carrier GridSpec.')
            op = weyl_quantize(RepSpec.regular(pvs, spec), value)
        best = max(best, operator_norm(op))
    return best


@dataclass
class UscRow:
    id: str
    value: float
    neighborhood_max: float
    spread: float
    excess: float
    allowance: float
    flagged: bool


@dataclass
class UscReport:
    rows: list = field(default_factory=list)
    threshold: float = 0.0
    spread_factor: float = 0.0
    note: str = USC_NOTE

    @property
    def violations(self) -> list[str]:
        return [row.id for row in self.rows if row.flagged]

    @property
    def ok(self) -> bool:
        return not self.violations


def usc_sample_check(bundle: PoissonBundle, section: SectionOverBase, p: int, q: int,
                     threshold: float | None = None, spread_factor: float | None = None) -> UscReport:
    """Flag isolated upward spikes of x ↦ s_{p,q}(φ(x)).

    A point is flagged when its value exceeds the maximum over its neighbors by more than
    ``threshold · max(1, neighborhood max) + spread_factor · (neighborhood max − min)``.
    """
    if threshold is None:
        threshold = float(get_setting('USC_JUMP_THRESHOLD'))
    if spread_factor is None:
        spread_factor = float(get_setting('USC_SPREAD_FACTOR'))
    base = bundle.base
    if not base.has_neighbor_graph:
        raise DimensionError('The USC sampling check needs a base with a neighbor graph.')
    values = {pid: fiber_seminorm(section.values[pid], p, q) for pid in base.ids}
    report = UscReport(threshold=threshold, spread_factor=spread_factor)
    for pid in base.ids:
        nbrs = base.neighbors(pid)
        if not nbrs:
            report.rows.append(UscRow(pid, values[pid], values[pid], 0.0, 0.0, 0.0, False))
            continue
        high = max(values[o] for o in nbrs)
        spread = high - min(values[o] for o in nbrs)
        excess = values[pid] - high
        allowance = threshold * max(1.0, abs(high)) + spread_factor * spread
        report.rows.append(UscRow(pid, values[pid], high, spread, excess, allowance, excess > allowance))
    if report.violations:
        logger.info('USC sampling check flagged %d of %d points', len(report.violations), len(base))
    return report


def pullback_bundle(f: dict, base: BaseSpace, bundle: PoissonBundle) -> PoissonBundle:
    """(f*B)_x = B_{f(x)}; the fiber tensors are shared, not copied."""
    missing = [x for x in base.ids if x not in f]
    if missing:
        raise DimensionError(f'Base map is not total; missing {missing}.')
    for x in base.ids:
        bundle.base.index(f[x])
    return PoissonBundle(base, bundle.n, {x: bundle.sigma_at[str(f[x])] for x in base.ids})


def pullback_section(f: dict, pulled: PoissonBundle, section: SectionOverBase) -> SectionOverBase:
    return SectionOverBase(pulled, {x: section.values[str(f[x])] for x in pulled.base.ids})
