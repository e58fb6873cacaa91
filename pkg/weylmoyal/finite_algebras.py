"""Finite-dimensional C₀(X)-algebras over finite bases, computed exactly.

An algebra is a direct sum of full matrix blocks M_d, each anchored at a base point
(or at nothing). Base functions act centrally: f acts on a block anchored at a by
the scalar f(a), and by zero on unanchored blocks. Coordinates are the matrix units
of the blocks, in block order and row-major inside each block. Spans, quotients and
inverses are computed over QQ with sympy's DomainMatrix; vectors are numpy object
arrays of exact rationals.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import sympy
from sympy import QQ
from sympy.polys.matrices import DomainMatrix

from weylmoyal.bundles import BaseSpace
from weylmoyal.errors import DimensionError, UnknownPointError

logger = logging.getLogger(__name__)


def _to_domain(arr: np.ndarray) -> DomainMatrix:
    return DomainMatrix.from_Matrix(sympy.Matrix(arr.tolist())).convert_to(QQ)


def _from_domain(dm: DomainMatrix) -> np.ndarray:
    rows, cols = dm.shape
    return np.array(dm.to_Matrix().tolist(), dtype=object).reshape(rows, cols)


def _apply(mat: np.ndarray, vec: np.ndarray) -> np.ndarray:
    """mat @ vec touching only the nonzero entries of vec."""
    nz = np.flatnonzero(vec != 0)
    if nz.size == 0:
        return np.zeros(mat.shape[0], dtype=object)
    return mat[:, nz].dot(vec[nz].astype(object))


def _invertible(arr: np.ndarray) -> bool:
    rows, cols = arr.shape
    if rows != cols:
        return False
    return rows == 0 or _to_domain(arr).det() != 0


@dataclass(frozen=True)
class Block:
    dim: int
    anchor: str | None


class FiniteCStarModuleAlgebra:
    def __init__(self, base: BaseSpace, blocks):
        if not base.finite:
            raise DimensionError('Finite C0(X)-algebras need a finite base.')
        self.base = base
        self.blocks = tuple(b if isinstance(b, Block) else Block(int(b[0]), b[1]) for b in blocks)
        for b in self.blocks:
            if b.dim <= 0:
                raise DimensionError('Block dimensions must be positive.')
            if b.anchor is not None:
                base.index(b.anchor)
        self.offsets = np.cumsum([0] + [b.dim ** 2 for b in self.blocks])

    @classmethod
    def pointwise(cls, base: BaseSpace, dims: dict) -> FiniteCStarModuleAlgebra:
        """⊕_x M_{d_x}, one block per base point."""
        return cls(base, [Block(int(dims[x]), x) for x in base.ids])

    @classmethod
    def scalar_functions(cls, base: BaseSpace) -> FiniteCStarModuleAlgebra:
        return cls.pointwise(base, {x: 1 for x in base.ids})

    @classmethod
    def random(cls, base: BaseSpace, rng: np.random.Generator, max_dim: int = 4) -> FiniteCStarModuleAlgebra:
        return cls.pointwise(base, {x: int(rng.integers(1, max_dim + 1)) for x in base.ids})

    @property
    def dimension(self) -> int:
        return int(self.offsets[-1])

    def __repr__(self):
        return f'FiniteCStarModuleAlgebra(blocks={[(b.dim, b.anchor) for b in self.blocks]})'

    def block_range(self, i: int) -> range:
        return range(int(self.offsets[i]), int(self.offsets[i + 1]))

    def split(self, coords) -> list:
        coords = np.asarray(coords)
        return [coords[self.offsets[i]:self.offsets[i + 1]].reshape(b.dim, b.dim) for i, b in enumerate(self.blocks)]

    def join(self, blocks) -> np.ndarray:
        return np.concatenate([np.asarray(m).reshape(-1) for m in blocks]) if blocks else np.zeros(0)

    def multiply(self, u, v) -> np.ndarray:
        return self.join([a.dot(b) for a, b in zip(self.split(u), self.split(v))])

    def involution(self, u) -> np.ndarray:
        return self.join([np.conj(a).T for a in self.split(u)])

    def norm(self, u) -> float:
        """C*-norm: the largest block operator norm."""
        blocks = self.split(np.asarray(u, dtype=complex))
        return max((float(np.linalg.norm(a, 2)) for a in blocks), default=0.0)

    def unit_vector(self, i: int) -> np.ndarray:
        e = np.zeros(self.dimension, dtype=np.int64)
        e[i] = 1
        return e

    def random_element(self, rng: np.random.Generator) -> np.ndarray:
        d = self.dimension
        return rng.standard_normal(d) + 1j * rng.standard_normal(d)

    def action_diagonal(self, f) -> np.ndarray:
        """Φ(f) is diagonal in matrix-unit coordinates; returns that diagonal exactly."""
        scale = f if callable(f) else (lambda pid: f.get(pid, 0))
        diag = np.zeros(self.dimension, dtype=object)
        for i, b in enumerate(self.blocks):
            value = 0 if b.anchor is None else sympy.nsimplify(scale(b.anchor))
            diag[self.block_range(i)] = value
        return diag

    def delta_action(self, pid) -> np.ndarray:
        self.base.index(pid)
        return self.action_diagonal(lambda y: 1 if y == str(pid) else 0)


def _column_basis(columns: list, d: int) -> np.ndarray:
    """Independent columns spanning the given ones (d × k object array)."""
    unique, seen = [], set()
    for col in columns:
        key = tuple(col)
        if any(v != 0 for v in key) and key not in seen:
            seen.add(key)
            unique.append(np.asarray(col, dtype=object))
    if not unique:
        return np.zeros((d, 0), dtype=object)
    stacked = np.stack(unique, axis=1)
    _, pivots = _to_domain(stacked).rref()
    return stacked[:, list(pivots)]


def _ideal_span(algebra: FiniteCStarModuleAlgebra, points) -> np.ndarray:
    """Basis of Σ_{y ∈ points} Φ(δ_y)A: the column span of each Φ(δ_y)."""
    d = algebra.dimension
    columns = []
    for y in points:
        diag = algebra.delta_action(y)
        for j in np.flatnonzero(diag != 0):
            col = np.zeros(d, dtype=object)
            col[j] = diag[j]
            columns.append(col)
    return _column_basis(columns, d)


@dataclass
class SrFiber:
    point: str
    dimension: int
    quotient_basis: np.ndarray  # D × q representatives in A
    projection: np.ndarray  # q × D, a ↦ class of a in quotient coordinates
    multiplication: np.ndarray  # q × q × q
    involution: np.ndarray  # q × q, row i = class of c_i*
    fiber_blocks: tuple = ()
    isomorphism: np.ndarray | None = None  # quotient coords → coords of ⊕ blocks anchored at x
    is_isomorphic: bool = False

    def product(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        out = np.zeros(self.dimension, dtype=object)
        for i in np.flatnonzero(a != 0):
            for j in np.flatnonzero(b != 0):
                out = out + a[i] * b[j] * self.multiplication[i, j]
        return out


def sr_fiber(algebra: FiniteCStarModuleAlgebra, pid) -> SrFiber:
    """SR(X,A)_x = A / Φ(I_x)A, where Φ(I_x)A is spanned by Φ(δ_y)A for y ≠ x.

    On a finite base the span is already closed.
    """
    pid = str(pid)
    if pid not in algebra.base:
        raise UnknownPointError(f'Unknown base point {pid!r}.')
    d = algebra.dimension
    kernel = _ideal_span(algebra, [y for y in algebra.base.ids if y != pid])
    covered = set()
    if kernel.shape[1]:
        _, pivots = _to_domain(kernel.T).rref()
        covered = set(pivots)
    chosen = [i for i in range(d) if i not in covered]
    q = len(chosen)
    basis = np.zeros((d, q), dtype=object)
    for col, i in enumerate(chosen):
        basis[i, col] = 1
    if q:
        full = np.concatenate([basis, kernel], axis=1)
        projection = _from_domain(_to_domain(full).inv())[:q, :]
    else:
        projection = np.zeros((0, d), dtype=object)

    mult = np.zeros((q, q, q), dtype=object)
    for i in range(q):
        for j in range(q):
            mult[i, j] = _apply(projection, algebra.multiply(basis[:, i], basis[:, j]))
    inv = np.zeros((q, q), dtype=object)
    for i in range(q):
        inv[i] = _apply(projection, algebra.involution(basis[:, i]))

    fiber_blocks = tuple(i for i, b in enumerate(algebra.blocks) if b.anchor == pid)
    rows = [r for i in fiber_blocks for r in algebra.block_range(i)]
    iso = basis[rows, :] if rows else np.zeros((0, q), dtype=object)
    kills_kernel = not rows or not kernel.shape[1] or not np.any(kernel[rows, :] != 0)
    is_iso = _invertible(iso) and kills_kernel
    return SrFiber(pid, q, basis, projection, mult, inv, fiber_blocks, iso, bool(is_iso))


@dataclass
class RoundtripReport:
    dimension: int
    fiber_dims: dict = field(default_factory=dict)
    nondegenerate: bool = False
    bijective: bool = False
    multiplicative: bool = False
    involutive: bool = False
    isometric: bool = False
    reason: str = ''

    @property
    def ok(self) -> bool:
        return self.nondegenerate and self.bijective and self.multiplicative and self.involutive and self.isometric

    def to_json(self) -> dict:
        return {
            'dimension': self.dimension,
            'fiber_dims': dict(self.fiber_dims),
            'nondegenerate': self.nondegenerate,
            'bijective': self.bijective,
            'multiplicative': self.multiplicative,
            'involutive': self.involutive,
            'isometric': self.isometric,
            'ok': self.ok,
            'reason': self.reason,
        }


def is_nondegenerate(algebra: FiniteCStarModuleAlgebra) -> bool:
    """Φ(C₀(X))A spans A."""
    return _ideal_span(algebra, algebra.base.ids).shape[1] == algebra.dimension


def _split(fibers: list[SrFiber], vec: np.ndarray) -> list:
    parts, pos = [], 0
    for fib in fibers:
        parts.append(vec[pos:pos + fib.dimension])
        pos += fib.dimension
    return parts


def _parts_equal(lhs: list, rhs: list) -> bool:
    return all(not np.any(a != b) for a, b in zip(lhs, rhs))


def sectional_roundtrip(algebra: FiniteCStarModuleAlgebra, probes: int = 8, seed: int = 0) -> RoundtripReport:
    """Check that a ↦ (x ↦ a + Φ(I_x)A) is a bijective isometric *-homomorphism onto Γ₀(X, SR(X,A))."""
    d = algebra.dimension
    report = RoundtripReport(dimension=d)
    report.nondegenerate = is_nondegenerate(algebra)
    if not report.nondegenerate:
        report.reason = 'module action is degenerate: Phi(C0(X))A does not span A, so A is not a C0(X)-algebra'
        logger.info('Sectional round trip: %s', report.reason)
        return report

    fibers = [sr_fiber(algebra, x) for x in algebra.base.ids]
    report.fiber_dims = {f.point: f.dimension for f in fibers}
    smap = np.concatenate([f.projection for f in fibers], axis=0)
    report.bijective = _invertible(smap)
    if not report.bijective:
        report.reason = f'section map is {smap.shape[0]}x{smap.shape[1]} and not invertible'
        return report

    images = [_split(fibers, smap[:, i]) for i in range(d)]
    report.multiplicative = all(
        _parts_equal(
            _split(fibers, _apply(smap, algebra.multiply(algebra.unit_vector(i), algebra.unit_vector(j)))),
            [fib.product(a, b) for fib, a, b in zip(fibers, images[i], images[j])],
        )
        for i in range(d)
        for j in range(d)
    )
    report.involutive = all(
        _parts_equal(
            _split(fibers, _apply(smap, algebra.involution(algebra.unit_vector(i)))),
            [a.dot(fib.involution) if fib.dimension else a for fib, a in zip(fibers, images[i])],
        )
        for i in range(d)
    )

    rng = np.random.default_rng(seed)
    isometric = True
    for _ in range(probes):
        u = algebra.random_element(rng)
        section_norm = max((_fiber_norm(algebra, fib, u) for fib in fibers if fib.dimension), default=0.0)
        if not abs(section_norm - algebra.norm(u)) <= 1e-12 * max(1.0, algebra.norm(u)):
            isometric = False
            break
    report.isometric = isometric
    if not report.ok:
        report.reason = 'structure mismatch between A and its section algebra'
    return report


def _fiber_norm(algebra: FiniteCStarModuleAlgebra, fib: SrFiber, u) -> float:
    """Norm of the class of u at x, read through the isomorphism onto the blocks at x."""
    if not fib.is_isomorphic:
        return float('nan')
    coords = fib.isomorphism.astype(complex) @ (fib.projection.astype(complex) @ u)
    norms, pos = [], 0
    for i in fib.fiber_blocks:
        dim = algebra.blocks[i].dim
        norms.append(float(np.linalg.norm(coords[pos:pos + dim * dim].reshape(dim, dim), 2)))
        pos += dim * dim
    return max(norms, default=0.0)


def change_base_ring(f: dict, algebra: FiniteCStarModuleAlgebra, target: BaseSpace) -> FiniteCStarModuleAlgebra:
    """f♯A: the same algebra with module action g ↦ Φ(g ∘ f)."""
    missing = [x for x in algebra.base.ids if x not in f]
    if missing:
        raise DimensionError(f'Base map is not total; missing {missing}.')
    blocks = [Block(b.dim, None if b.anchor is None else str(f[b.anchor])) for b in algebra.blocks]
    return FiniteCStarModuleAlgebra(target, blocks)


@dataclass
class FiberFormulaReport:
    point: str
    preimage: tuple
    pushed_dim: int
    summed_dim: int
    isomorphic: bool


def fiber_formula_check(f: dict, algebra: FiniteCStarModuleAlgebra, target: BaseSpace, y) -> FiberFormulaReport:
    """(f♯A)_y ≅ ⊕_{x ∈ f⁻¹(y)} A_x via the natural map between the quotients."""
    y = str(y)
    target.index(y)
    fy = sr_fiber(change_base_ring(f, algebra, target), y)
    preimage = tuple(x for x in algebra.base.ids if str(f[x]) == y)
    parts = [sr_fiber(algebra, x) for x in preimage]
    summed = sum(p.dimension for p in parts)
    if fy.dimension != summed:
        return FiberFormulaReport(y, preimage, fy.dimension, summed, False)
    if summed == 0:
        return FiberFormulaReport(y, preimage, 0, 0, True)
    natural = np.concatenate([p.projection for p in parts], axis=0).dot(fy.quotient_basis)
    iso = _invertible(natural)
    if iso:
        cols = [_split(parts, natural[:, i]) for i in range(fy.dimension)]
        iso = all(
            _parts_equal(
                _split(parts, _apply(natural, fy.multiplication[i, j])),
                [p.product(a, b) for p, a, b in zip(parts, cols[i], cols[j])],
            )
            for i in range(fy.dimension)
            for j in range(fy.dimension)
        )
    return FiberFormulaReport(y, preimage, fy.dimension, summed, bool(iso))
