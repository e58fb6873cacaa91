"""Heisenberg group representations on discretized carriers and Weyl quantization.

Carriers are the grids of :mod:`weylmoyal.functions`, flattened row-major (axis 0
slowest). Operators are dense and limited to ``MAX_CARRIER_DIM``; the regular
representation also has a matrix-free form for larger grids.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import partial

import numpy as np

from weylmoyal.errors import (
    ConvergenceError,
    DimensionError,
    GridSizeError,
    RankError,
    UnitarityError,
    UnsupportedRepresentationError,
)
from weylmoyal.functions import (
    GridFunction,
    GridSpec,
    PlaneWaveSum,
    fourier_inverse,
    l1_estimate,
    l1_norm_freq,
    make_gaussian,
    translate,
    translate_samples,
)
from weylmoyal.poisson import (
    HeisenbergElement,
    PoissonVectorSpace,
    RankDecomposition,
    darboux_basis,
    musical_sharp,
    rank_decomposition,
)
from weylmoyal.settings import get_setting
from weylmoyal.star import GRID, StarContext, approx_identity, star_grid, star_samples

logger = logging.getLogger(__name__)

REGULAR = 'regular-on-V'
DOUBLED = 'doubled'
IRREP = 'irrep-highest-weight'
KINDS = (REGULAR, DOUBLED, IRREP)


@dataclass(frozen=True, eq=False)
class OperatorMatrix:
    entries: np.ndarray
    unitary: bool = False

    def __post_init__(self):
        entries = np.asarray(self.entries, dtype=complex)
        if entries.ndim != 2 or entries.shape[0] != entries.shape[1]:
            raise DimensionError(f'Operator matrix must be square, got shape {entries.shape}.')
        if not np.all(np.isfinite(entries)):
            raise DimensionError('Operator matrix has non-finite entries.')
        object.__setattr__(self, 'entries', entries)
        if self.unitary:
            residual = self.unitarity_residual()
            tol = float(get_setting('UNITARITY_TOL'))
            if residual > tol:
                raise UnitarityError(f'Operator claimed unitary but ‖U*Uv − v‖ = {residual:.3e} > {tol:.1e}.')

    @classmethod
    def identity(cls, dim: int) -> OperatorMatrix:
        return cls(np.eye(dim, dtype=complex), unitary=True)

    @classmethod
    def zeros(cls, dim: int) -> OperatorMatrix:
        return cls(np.zeros((dim, dim), dtype=complex))

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def unitarity_residual(self, probes: int = 4, seed: int = 0) -> float:
        """max ‖U*U v − v‖ / ‖v‖ over seeded random probe vectors."""
        rng = np.random.default_rng(seed)
        v = rng.standard_normal((self.dim, probes)) + 1j * rng.standard_normal((self.dim, probes))
        back = self.entries.conj().T @ (self.entries @ v)
        return float(np.max(np.linalg.norm(back - v, axis=0) / np.linalg.norm(v, axis=0)))

    def adjoint(self) -> OperatorMatrix:
        return OperatorMatrix(self.entries.conj().T, self.unitary)

    def __matmul__(self, other):
        if isinstance(other, OperatorMatrix):
            self._same_dim(other)
            return OperatorMatrix(self.entries @ other.entries)
        return self.entries @ np.asarray(other)

    def __add__(self, other):
        if not isinstance(other, OperatorMatrix):
            return NotImplemented
        self._same_dim(other)
        return OperatorMatrix(self.entries + other.entries)

    def __sub__(self, other):
        if not isinstance(other, OperatorMatrix):
            return NotImplemented
        self._same_dim(other)
        return OperatorMatrix(self.entries - other.entries)

    def __mul__(self, scalar):
        return OperatorMatrix(self.entries * complex(scalar))

    __rmul__ = __mul__

    def frobenius(self) -> float:
        return float(np.linalg.norm(self.entries))

    def _same_dim(self, other: OperatorMatrix):
        if other.dim != self.dim:
            raise DimensionError(f'Operators of dimension {self.dim} and {other.dim}.')


@dataclass(frozen=True, eq=False)
class RepSpec:
    kind: str
    pvs: PoissonVectorSpace
    spec: GridSpec
    weight: np.ndarray | None = None
    decomposition: RankDecomposition | None = field(default=None, init=False, repr=False)
    darboux: np.ndarray | None = field(default=None, init=False, repr=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DimensionError(f'Unknown representation kind {self.kind!r}.')
        if self.kind == IRREP:
            dec = rank_decomposition(self.pvs)
            r = dec.rank // 2
            if r and self.spec.n != r:
                raise DimensionError(f'Irrep carrier must be a grid over R^{r}, got dimension {self.spec.n}.')
            weight = np.zeros(self.pvs.n) if self.weight is None else np.asarray(self.weight, dtype=float)
            if weight.shape != (self.pvs.n,):
                raise DimensionError(f'Weight must have {self.pvs.n} components.')
            object.__setattr__(self, 'weight', weight)
            object.__setattr__(self, 'decomposition', dec)
            object.__setattr__(self, 'darboux', darboux_basis(dec.omega))
        elif self.spec.n != self.pvs.n:
            raise DimensionError(f'Carrier grid dimension {self.spec.n} does not match n={self.pvs.n}.')

    @classmethod
    def regular(cls, pvs: PoissonVectorSpace, spec: GridSpec) -> RepSpec:
        return cls(REGULAR, pvs, spec)

    @classmethod
    def doubled(cls, pvs: PoissonVectorSpace, spec: GridSpec) -> RepSpec:
        return cls(DOUBLED, pvs, spec)

    @classmethod
    def irrep(cls, pvs: PoissonVectorSpace, spec: GridSpec, weight=None) -> RepSpec:
        return cls(IRREP, pvs, spec, weight)

    @property
    def half_rank(self) -> int:
        return self.decomposition.rank // 2 if self.decomposition is not None else self.pvs.rank() // 2

    @property
    def carrier_dim(self) -> int:
        if self.kind == IRREP and self.half_rank == 0:
            return 1
        return self.spec.size

    def star_context(self) -> StarContext:
        return StarContext(self.pvs, GRID, self.spec)


def _check_dense(dim: int):
    cap = int(get_setting('MAX_CARRIER_DIM'))
    if dim > cap:
        raise GridSizeError(f'Dense carrier of dimension {dim} exceeds MAX_CARRIER_DIM={cap}.')


def _axis_shift_matrix(spec: GridSpec, a: float) -> np.ndarray:
    """N×N matrix of ψ ↦ ψ(· − a) along one axis, via a Fourier phase ramp."""
    ramp = np.exp(-1j * spec.fft_frequencies() * a)
    return np.fft.ifft(ramp[:, None] * np.fft.fft(np.eye(spec.N), axis=0), axis=0)


def _shift_matrix(spec: GridSpec, shift) -> np.ndarray:
    out = np.ones((1, 1), dtype=complex)
    for a in shift:
        out = np.kron(out, _axis_shift_matrix(spec, float(a)))
    return out


def _roll_matrix(spec: GridSpec, steps) -> np.ndarray:
    """Permutation matrix with (Pψ)[i] = ψ[i − steps] (cyclic)."""
    eye = np.eye(spec.size, dtype=complex).reshape(spec.shape + (spec.size,))
    return np.roll(eye, shift=tuple(int(s) for s in steps), axis=tuple(range(spec.n))).reshape(spec.size, spec.size)


def regular_rep(rep: RepSpec, xi) -> OperatorMatrix:
    """(π^reg(ξ)ψ)(x) = e^{i⟨ξ,x⟩} ψ(x − ½σ♯ξ)."""
    if rep.kind != REGULAR:
        raise UnsupportedRepresentationError(f'regular_rep needs a {REGULAR!r} RepSpec, got {rep.kind!r}.')
    spec = rep.spec
    _check_dense(spec.size)
    xi = np.asarray(xi, dtype=float).reshape(-1)
    spec.lattice_index(xi)
    shift = 0.5 * musical_sharp(rep.pvs, xi)
    phase = np.exp(1j * (spec.points() @ xi)).reshape(-1)
    return OperatorMatrix(phase[:, None] * _shift_matrix(spec, shift), unitary=True)


def apply_regular(rep: RepSpec, xi, psi):
    """π^reg(ξ)ψ without assembling the matrix; ``psi`` is a GridFunction or sample array."""
    spec = rep.spec
    xi = np.asarray(xi, dtype=float).reshape(-1)
    spec.lattice_index(xi)
    samples = psi.samples if isinstance(psi, GridFunction) else np.asarray(psi, dtype=complex)
    flat_input = samples.ndim == 1
    samples = samples.reshape(spec.shape)
    shift = 0.5 * musical_sharp(rep.pvs, xi)
    out = np.exp(1j * (spec.points() @ xi)) * translate_samples(samples, spec, shift[None, :])[0]
    if isinstance(psi, GridFunction):
        return GridFunction(spec, out)
    return out.reshape(-1) if flat_input else out


def _quantize_grid(rep: RepSpec, f: GridFunction, floor: float | None = None) -> OperatorMatrix:
    """Σ_k f̌_k (π/L)^n π^reg(ξ_k), assembled in the plane-wave basis.

    In that basis π^reg(ξ_k) sends e_{ξ_m} to e^{−(i/2)σ(ξ_k, ξ_m)} e_{ξ_k+ξ_m}; the
    grid matrix is recovered with one inverse FFT over rows and one FFT over columns.
    """
    spec, sigma = rep.spec, rep.pvs.sigma
    if f.spec != spec:
        raise DimensionError('Grid function does not live on the carrier grid.')
    dim = spec.size
    _check_dense(dim)
    if floor is None:
        floor = float(get_setting('SPECTRAL_FLOOR'))
    coeffs = np.fft.fftn(f.samples).reshape(-1) / dim
    peak = float(np.max(np.abs(coeffs)))
    if peak == 0.0:
        return OperatorMatrix.zeros(dim)
    coeffs = np.where(np.abs(coeffs) > floor * peak, coeffs, 0.0)

    half = spec.N // 2
    m_idx = np.array(np.unravel_index(np.arange(dim), spec.shape)).T
    centered = np.where(m_idx >= half, m_idx - spec.N, m_idx)
    xi_m = centered * spec.dual_cell
    plane = np.empty((dim, dim), dtype=complex)
    for col in range(dim):
        diff = (m_idx - m_idx[col]) % spec.N
        k_vec = np.where(diff >= half, diff - spec.N, diff) * spec.dual_cell
        pairing = k_vec @ (sigma @ xi_m[col])
        plane[:, col] = coeffs[np.ravel_multi_index(diff.T, spec.shape)] * np.exp(-0.5j * pairing)

    n = spec.n
    grid = plane.reshape(spec.shape + spec.shape)
    grid = np.fft.ifftn(grid, axes=tuple(range(n)))
    grid = np.fft.fftn(grid, axes=tuple(range(n, 2 * n)))
    return OperatorMatrix(grid.reshape(dim, dim))


def weyl_quantize(rep: RepSpec, f) -> OperatorMatrix:
    """W_π f = ∫ f̌(ξ) π(ξ) dξ; a finite sum Σ c_j π(ξ_j) for plane-wave sums."""
    if isinstance(f, PlaneWaveSum):
        if f.n != rep.pvs.n:
            raise DimensionError(f'Plane-wave sum of dimension {f.n} for n={rep.pvs.n}.')
        if rep.kind == REGULAR:
            single = partial(regular_rep, rep)
        elif rep.kind == IRREP:
            single = partial(irrep_from_covector, rep)
        else:
            raise UnsupportedRepresentationError('Weyl quantization is defined for the regular rep and irreps.')
        total = OperatorMatrix.zeros(rep.carrier_dim)
        for c, xi in f.terms:
            total = total + single(xi) * c
        return total
    if isinstance(f, GridFunction):
        if rep.kind != REGULAR:
            raise UnsupportedRepresentationError('Grid functions are quantized in the regular representation.')
        return _quantize_grid(rep, f)
    raise UnsupportedRepresentationError(f'Cannot quantize {type(f).__name__}.')


def quantization_map(rep: RepSpec):
    return partial(weyl_quantize, rep)


def rep_from_quantization(wmap, xi) -> OperatorMatrix:
    """π_W(ξ) = W(e_ξ)."""
    return wmap(PlaneWaveSum.phase(xi))


def left_translation(ctx: StarContext, f) -> OperatorMatrix:
    """Matrix of h ↦ f ⋆ h; column j is f ⋆ δ_j."""
    spec = ctx.spec
    if spec is None:
        raise DimensionError('left_translation needs a context with a GridSpec.')
    if isinstance(f, PlaneWaveSum):
        return weyl_quantize(RepSpec.regular(ctx.pvs, spec), f)
    if f.spec != spec:
        raise DimensionError('Grid function does not live on the context grid.')
    dim = spec.size
    _check_dense(dim)
    deltas = np.eye(dim, dtype=complex).reshape((dim,) + spec.shape)
    columns = star_samples(ctx.sigma, spec, fourier_inverse(f).samples, deltas)
    return OperatorMatrix(columns.reshape(dim, dim).T)


def right_translation(ctx: StarContext, g) -> OperatorMatrix:
    """Matrix of h ↦ h ⋆_σ g = g ⋆_{−σ} h."""
    return left_translation(ctx.negated(), g)


@dataclass(frozen=True)
class NormEstimate:
    value: float
    lower: float
    upper: float
    iterations: int
    residual: float


def operator_norm_estimate(A, tol: float | None = None, max_iter: int | None = None,
                           seed: int | None = None) -> NormEstimate:
    """Largest singular value by power iteration on A*A.

    ``lower`` is the square root of the final Rayleigh quotient (a certified lower
    bound); ``upper`` is min(√(‖A‖₁‖A‖_∞), ‖A‖_F), a certified upper bound.
    """
    entries = A.entries if isinstance(A, OperatorMatrix) else np.asarray(A, dtype=complex)
    if tol is None:
        tol = float(get_setting('POWER_ITER_TOL'))
    if max_iter is None:
        max_iter = int(get_setting('POWER_ITER_MAX'))
    if seed is None:
        seed = int(get_setting('DEFAULT_SEED'))
    if not entries.any():
        return NormEstimate(0.0, 0.0, 0.0, 0, 0.0)
    upper = min(
        math.sqrt(np.linalg.norm(entries, 1) * np.linalg.norm(entries, np.inf)),
        float(np.linalg.norm(entries)),
    )
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(entries.shape[1]) + 1j * rng.standard_normal(entries.shape[1])
    v /= np.linalg.norm(v)
    adj = entries.conj().T
    rho, res = 0.0, math.inf
    for it in range(1, max_iter + 1):
        w = adj @ (entries @ v)
        rho = float(np.vdot(v, w).real)
        res = float(np.linalg.norm(w - rho * v))
        if res <= tol * rho:
            lower = math.sqrt(max(rho, 0.0))
            return NormEstimate(lower, lower, max(upper, lower), it, res)
        norm_w = np.linalg.norm(w)
        if norm_w == 0.0:
            break
        v = w / norm_w
    lower = math.sqrt(max(rho, 0.0))
    raise ConvergenceError(
        f'Power iteration did not reach relative residual {tol:.1e} in {max_iter} iterations.',
        lower=lower, upper=upper, iterations=max_iter,
    )


def operator_norm(A, tol: float | None = None, max_iter: int | None = None, seed: int | None = None) -> float:
    return operator_norm_estimate(A, tol, max_iter, seed).value


def norm_bound_l1(ctx: StarContext, f) -> float:
    """Discrete ‖f̌‖₁, which dominates ‖L_σ f‖."""
    if isinstance(f, PlaneWaveSum):
        return f.coefficient_l1()
    return l1_norm_freq(fourier_inverse(f))


def norm_chain(ctx: StarContext, f: GridFunction) -> dict:
    """operator_norm(L f) ≤ ‖f̌‖₁ ≤ (2π)^n s_{2n,2n}(f) + ε_disc, with slacks.

    L f is assembled as W(f) in the regular representation, which is the same matrix.
    """
    op = operator_norm(_quantize_grid(RepSpec.regular(ctx.pvs, ctx.spec), f))
    est = l1_estimate(f)
    l1_slack = est['l1'] - op
    return {
        'operator_norm': op,
        'l1': est['l1'],
        'seminorm_bound': est['seminorm_bound'],
        'eps_disc': est['eps_disc'],
        'l1_slack': l1_slack,
        'seminorm_slack': est['slack'],
        'slack': min(l1_slack, est['slack']),
    }


def doubled_pairing(x, xi, y, eta) -> float:
    """Ω((x,ξ),(y,η)) = ξ(y) − η(x)."""
    return float(np.dot(xi, y) - np.dot(eta, x))


def doubled_rep(rep: RepSpec, x, xi, lam: float = 0.0) -> OperatorMatrix:
    """(W_Ω(x,ξ,λ)ψ)(z) = e^{−i⟨ξ, z − ½x⟩ + iλ} ψ(z − x)."""
    if rep.kind not in (DOUBLED, REGULAR):
        raise UnsupportedRepresentationError('doubled_rep acts on L²(V); use a doubled or regular RepSpec.')
    spec = rep.spec
    _check_dense(spec.size)
    x = np.asarray(x, dtype=float).reshape(-1)
    xi = np.asarray(xi, dtype=float).reshape(-1)
    steps = spec.spatial_index(x)
    spec.lattice_index(xi)
    phase = np.exp(-1j * ((spec.points() - 0.5 * x) @ xi) + 1j * lam).reshape(-1)
    return OperatorMatrix(phase[:, None] * _roll_matrix(spec, steps), unitary=True)


def conjugation_translation(rep: RepSpec, x, xi) -> np.ndarray:
    """Vector a with W_Ω(x,ξ) R_σ(g) W_Ω(x,ξ)⁻¹ = R_σ(T_a g): a = x + ½σ♯ξ."""
    return np.asarray(x, dtype=float) + 0.5 * musical_sharp(rep.pvs, xi)


def conjugation_residual(rep: RepSpec, x, xi, g: GridFunction) -> float:
    """Frobenius norm of W R_σ(g) W⁻¹ − R_σ(T_a g)."""
    ctx = rep.star_context()
    w = doubled_rep(rep, x, xi)
    lhs = w @ right_translation(ctx, g) @ w.adjoint()
    rhs = right_translation(ctx, translate(g, conjugation_translation(rep, x, xi)))
    return (lhs - rhs).frobenius()


def schrodinger_op(rep: RepSpec, p, q, lam: float = 0.0) -> OperatorMatrix:
    """(π_ω(p,q,λ)ψ)(s) = e^{iλ} e^{i⟨p,s⟩ + (i/2)⟨p,q⟩} ψ(s + q) on the Lagrangian grid."""
    if rep.kind != IRREP:
        raise UnsupportedRepresentationError('schrodinger_op needs an irrep RepSpec.')
    r = rep.half_rank
    if r == 0:
        return OperatorMatrix(np.array([[np.exp(1j * lam)]]), unitary=True)
    spec = rep.spec
    _check_dense(spec.size)
    p = np.asarray(p, dtype=float).reshape(-1)
    q = np.asarray(q, dtype=float).reshape(-1)
    spec.lattice_index(p)
    steps = spec.spatial_index(q)
    phase = np.exp(1j * lam + 1j * (spec.points() @ p) + 0.5j * float(p @ q)).reshape(-1)
    return OperatorMatrix(phase[:, None] * _roll_matrix(spec, -steps), unitary=True)


def darboux_coordinates(rep: RepSpec, zeta) -> tuple[np.ndarray, np.ndarray]:
    """(p, q) of a covector ζ in the annihilator of V₀: Bᵀ W_basisᵀ ζ split in halves."""
    r = rep.half_rank
    coords = rep.darboux.T @ (rep.decomposition.W_basis.T @ np.asarray(zeta, dtype=float))
    return coords[:r], coords[r:]


def irrep_op(rep: RepSpec, xi_ker, eta: HeisenbergElement) -> OperatorMatrix:
    """π_[v](κ, η) = e^{i⟨κ,v⟩} π_ω(η), with η given in Darboux coordinates (p, q)."""
    if rep.kind != IRREP:
        raise UnsupportedRepresentationError('irrep_op needs an irrep RepSpec.')
    xi_ker = np.asarray(xi_ker, dtype=float).reshape(-1)
    if xi_ker.shape[0] != rep.pvs.n:
        raise DimensionError(f'Kernel covector has {xi_ker.shape[0]} components, expected {rep.pvs.n}.')
    scale = max(1.0, float(np.max(np.abs(rep.pvs.sigma), initial=0.0)) * float(np.linalg.norm(xi_ker)))
    defect = float(np.linalg.norm(musical_sharp(rep.pvs, xi_ker)))
    if defect > 1e-10 * scale:
        raise RankError(f'Covector is not in ker sigma (|sigma# xi| = {defect:.3e}).')
    r = rep.half_rank
    if eta.xi.shape[0] != 2 * r:
        raise DimensionError(f'H_omega element has {eta.xi.shape[0]} components, expected {2 * r}.')
    character = np.exp(1j * float(xi_ker @ rep.weight))
    op = schrodinger_op(rep, eta.xi[:r], eta.xi[r:], eta.lam)
    return OperatorMatrix(character * op.entries, unitary=True)


def irrep_from_covector(rep: RepSpec, xi, lam: float = 0.0) -> OperatorMatrix:
    """π_[v](ξ, λ) after splitting ξ = κ + ζ with κ ∈ ker σ."""
    kappa, zeta = rep.decomposition.split_covector(xi)
    p, q = darboux_coordinates(rep, zeta)
    return irrep_op(rep, kappa, HeisenbergElement(np.concatenate([p, q]), lam))


def strong_continuity_table(pvs: PoissonVectorSpace, spec: GridSpec, levels: int = 4, width: float = 1.0) -> list[dict]:
    """‖(π(ξ) − I)ψ‖₂ for one dual cell ξ along axis 0, on grids with doubled box and point count.

    The cell spacing h stays fixed, so the smallest lattice frequency π/L halves per level.
    """
    rows = []
    for level in range(levels):
        grid = GridSpec(spec.n, spec.L * 2 ** level, spec.N * 2 ** level)
        xi = np.zeros(spec.n)
        xi[0] = grid.dual_cell
        psi = make_gaussian(grid, widths=width)
        moved = apply_regular(RepSpec.regular(pvs, grid), xi, psi)
        rows.append({'level': level, 'L': grid.L, 'xi': float(xi[0]), 'residual': (moved - psi).l2_norm()})
    return rows


def faithfulness_witness(ctx: StarContext, f: GridFunction, width: float = 1.0) -> float:
    """‖f ⋆ g‖₂ for a Gaussian g centered where |f| peaks."""
    idx = np.unravel_index(int(np.argmax(np.abs(f.samples))), f.spec.shape)
    center = ctx.spec.points()[idx]
    g = make_gaussian(ctx.spec, center=center, widths=width)
    return star_grid(ctx, f, g).l2_norm()


def nondegeneracy_residuals(ctx: StarContext, psi: GridFunction, ks) -> list[float]:
    """‖W(χ_k)ψ − ψ‖₂ in the regular representation, i.e. ‖χ_k ⋆ ψ − ψ‖₂."""
    return [(star_grid(ctx, approx_identity(ctx.spec, k), psi) - psi).l2_norm() for k in ks]
