"""Weyl–Moyal star products on plane-wave sums and grid functions.

    (f ⋆_σ g)(x) = ∫ f̌(ξ) g(x − ½σ♯ξ) e^{i⟨ξ,x⟩} dξ,     e_ξ ⋆ e_η = e^{−(i/2)σ(ξ,η)} e_{ξ+η}

On a grid the integral becomes a sum over the dual lattice and every translate of g
is a Fourier phase ramp, so the result is exact for band-limited periodic data.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from math import comb

import numpy as np

from weylmoyal.errors import DimensionError, UnsupportedRepresentationError
from weylmoyal.functions import (
    FREQUENCY,
    SPACE,
    GridFunction,
    GridSpec,
    PlaneWaveSum,
    fourier_inverse,
    seminorm,
    spectral_derivative,
    translate_samples,
)
from weylmoyal.poisson import PoissonVectorSpace, musical_sharp
from weylmoyal.settings import get_setting

logger = logging.getLogger(__name__)

EXACT = 'exact-planewave'
GRID = 'grid'
MIXED = 'mixed'
BACKENDS = (EXACT, GRID, MIXED)


@dataclass(frozen=True, eq=False)
class StarContext:
    pvs: PoissonVectorSpace
    backend: str = EXACT
    spec: GridSpec | None = None

    def __post_init__(self):
        if self.backend not in BACKENDS:
            raise DimensionError(f'Unknown star backend {self.backend!r}; expected one of {BACKENDS}.')
        if self.backend in (GRID, MIXED):
            if self.spec is None:
                raise DimensionError(f'The {self.backend} backend needs a GridSpec.')
            if self.spec.n != self.pvs.n:
                raise DimensionError(f'Grid dimension {self.spec.n} does not match n={self.pvs.n}.')
            if not self.spec.is_commensurate(self.pvs.sigma):
                logger.warning(
                    'Grid L=%.6g N=%d is not commensurate with sigma; discrete associativity and '
                    'matrix-level CCR hold only approximately.',
                    self.spec.L, self.spec.N,
                )

    @property
    def sigma(self) -> np.ndarray:
        return self.pvs.sigma

    @property
    def commensurate(self) -> bool:
        return self.spec is not None and self.spec.is_commensurate(self.pvs.sigma)

    def negated(self) -> StarContext:
        return StarContext(self.pvs.negated(), self.backend, self.spec)


def half_shifts(sigma: np.ndarray, xis: np.ndarray) -> np.ndarray:
    """Rows ½σ♯ξ for a stack of covectors ξ of shape (K, n)."""
    return 0.5 * (np.asarray(xis, dtype=float) @ sigma)


def star_exact(ctx: StarContext, f: PlaneWaveSum, g: PlaneWaveSum) -> PlaneWaveSum:
    n = ctx.pvs.n
    if f.n != n or g.n != n:
        raise DimensionError(f'Plane-wave sums of dimension {f.n}, {g.n} with n={n}.')
    if f.is_zero() or g.is_zero():
        return PlaneWaveSum.zero(n)
    pairing = f.freqs @ ctx.sigma @ g.freqs.T
    coeffs = np.multiply.outer(f.coeffs, g.coeffs) * np.exp(-0.5j * pairing)
    freqs = f.freqs[:, None, :] + g.freqs[None, :, :]
    return PlaneWaveSum(n, coeffs.reshape(-1), freqs.reshape(-1, n), min(f.tol, g.tol))


def _retained(fcheck: np.ndarray, floor: float | None) -> np.ndarray:
    if floor is None:
        floor = float(get_setting('SPECTRAL_FLOOR'))
    mag = np.abs(fcheck)
    peak = float(mag.max()) if mag.size else 0.0
    if peak == 0.0:
        return np.zeros(0, dtype=int)
    return np.flatnonzero(mag.reshape(-1) > floor * peak)


def _batch_size(spec: GridSpec, batch: int) -> int:
    per = spec.size * max(batch, 1)
    return max(1, int(get_setting('STAR_BATCH_ELEMENTS')) // per)


def star_samples(sigma: np.ndarray, spec: GridSpec, fcheck: np.ndarray, g_batch: np.ndarray,
                 floor: float | None = None) -> np.ndarray:
    """Σ_k f̌_k (π/L)^n e^{i⟨ξ_k,x⟩} g(x − ½σ♯ξ_k) for a batch of g samples.

    ``g_batch`` has shape ``(B,) + spec.shape``; frequencies are accumulated in
    fixed-size chunks, in index order.
    """
    idx = _retained(fcheck, floor)
    out = np.zeros(g_batch.shape, dtype=complex)
    if idx.size == 0:
        return out
    axes = tuple(range(-spec.n, 0))
    xis = spec.dual_points().reshape(-1, spec.n)[idx]
    weights = fcheck.reshape(-1)[idx] * spec.dual_cell ** spec.n
    points = spec.points()
    ghat = np.fft.fftn(g_batch, axes=axes)
    freqs = np.meshgrid(*([spec.fft_frequencies()] * spec.n), indexing='ij')
    chunk = _batch_size(spec, g_batch.shape[0])
    for start in range(0, idx.size, chunk):
        sl = slice(start, start + chunk)
        shifts = half_shifts(sigma, xis[sl])
        ramp_arg = sum(shifts[:, a].reshape((-1,) + (1,) * spec.n) * freqs[a] for a in range(spec.n))
        shifted = np.fft.ifftn(ghat[None, ...] * np.exp(-1j * ramp_arg)[:, None, ...], axes=axes)
        carrier = np.exp(1j * np.tensordot(xis[sl], points, axes=([1], [spec.n])))
        out += np.einsum('k,k...,kb...->b...', weights[sl], carrier, shifted)
    return out


def star_grid(ctx: StarContext, f: GridFunction, g: GridFunction, floor: float | None = None) -> GridFunction:
    if ctx.spec is None:
        raise DimensionError('star_grid needs a context with a GridSpec.')
    if f.spec != ctx.spec or g.spec != ctx.spec:
        raise DimensionError('star_grid inputs must share the context grid.')
    if f.domain != SPACE or g.domain != SPACE:
        raise DimensionError('star_grid takes space-domain samples.')
    fcheck = fourier_inverse(f).samples
    out = star_samples(ctx.sigma, ctx.spec, fcheck, g.samples[None, ...], floor)[0]
    return GridFunction(ctx.spec, out)


def twisted_convolution(ctx: StarContext, fcheck: GridFunction, gcheck: GridFunction,
                        floor: float | None = None) -> GridFunction:
    """h̃_p = Σ_k f̌_k ǧ_{p−k} e^{−(i/2)σ(ξ_k, ξ_{p−k})} (π/L)^n, indices wrapped mod N."""
    spec = ctx.spec
    if spec is None or fcheck.spec != spec or gcheck.spec != spec:
        raise DimensionError('twisted_convolution inputs must share the context grid.')
    if fcheck.domain != FREQUENCY or gcheck.domain != FREQUENCY:
        raise DimensionError('twisted_convolution takes frequency-domain samples.')
    idx = _retained(fcheck.samples, floor)
    out = np.zeros(spec.shape, dtype=complex)
    ks = spec.dual_indices().reshape(-1, spec.n)
    dual = spec.dual_points()
    axes = tuple(range(spec.n))
    cell = spec.dual_cell ** spec.n
    for i in idx:
        k = ks[i]
        xi = k * spec.dual_cell
        rolled_g = np.roll(gcheck.samples, shift=tuple(k), axis=axes)
        rolled_eta = np.roll(dual, shift=tuple(k), axis=axes)
        phase = np.exp(-0.5j * (rolled_eta @ (xi @ ctx.sigma)))
        out += fcheck.samples.reshape(-1)[i] * cell * rolled_g * phase
    return GridFunction(spec, out, FREQUENCY)


def star_mixed(ctx: StarContext, f, g) -> GridFunction:
    """Star product with one plane-wave factor; either order is accepted.

    (e_ξ ⋆ g)(x) = e^{i⟨ξ,x⟩} g(x − ½σ♯ξ); the order g ⋆ e_ξ uses g ⋆_σ f = f ⋆_{−σ} g.
    """
    if isinstance(f, GridFunction) and isinstance(g, PlaneWaveSum):
        return star_mixed(ctx.negated(), g, f)
    if not (isinstance(f, PlaneWaveSum) and isinstance(g, GridFunction)):
        raise UnsupportedRepresentationError('star_mixed needs one PlaneWaveSum and one GridFunction.')
    spec = ctx.spec
    if spec is None or g.spec != spec:
        raise DimensionError('star_mixed grid factor must live on the context grid.')
    if f.n != spec.n:
        raise DimensionError(f'Plane-wave sum of dimension {f.n} on a grid of dimension {spec.n}.')
    if f.is_zero():
        return GridFunction.zeros(spec)
    for xi in f.freqs:
        spec.lattice_index(xi)
    shifted = translate_samples(g.samples, spec, half_shifts(ctx.sigma, f.freqs))
    carrier = np.exp(1j * np.tensordot(f.freqs, spec.points(), axes=([1], [spec.n])))
    return GridFunction(spec, np.einsum('k,k...,k...->...', f.coeffs, carrier, shifted))


def star(ctx: StarContext, f, g):
    """Dispatch on the representations of the two factors."""
    if isinstance(f, PlaneWaveSum) and isinstance(g, PlaneWaveSum):
        return star_exact(ctx, f, g)
    if isinstance(f, GridFunction) and isinstance(g, GridFunction):
        return star_grid(ctx, f, g)
    return star_mixed(ctx, f, g)


def partial_deriv(f, j: int):
    """∂_j along axis ``j`` (0-based)."""
    if isinstance(f, PlaneWaveSum):
        _check_axis(f.n, j)
        return f.partial(j)
    if isinstance(f, GridFunction):
        _check_axis(f.spec.n, j)
        beta = [0] * f.spec.n
        beta[j] = 1
        return spectral_derivative(f, beta)
    raise UnsupportedRepresentationError(f'Cannot differentiate {type(f).__name__}.')


def x_multiply(f, j: int):
    if isinstance(f, PlaneWaveSum):
        raise UnsupportedRepresentationError('x-multiplication leaves the plane-wave algebra.')
    if not isinstance(f, GridFunction):
        raise UnsupportedRepresentationError(f'Cannot multiply {type(f).__name__} by a coordinate.')
    _check_axis(f.spec.n, j)
    return GridFunction(f.spec, f.spec.points()[..., j] * f.samples)


def symplectic_gradient(ctx: StarContext, f, j: int):
    """∇_σ^j f = (i/2) Σ_k σ^{jk} ∂_k f."""
    n = ctx.pvs.n
    _check_axis(n, j)
    total = None
    for k in range(n):
        weight = 0.5j * ctx.sigma[j, k]
        if weight == 0:
            continue
        term = partial_deriv(f, k) * weight
        total = term if total is None else total + term
    if total is None:
        return PlaneWaveSum.zero(n) if isinstance(f, PlaneWaveSum) else GridFunction.zeros(f.spec)
    return total


def _check_axis(n: int, j: int):
    if not 0 <= j < n:
        raise DimensionError(f'Axis {j} out of range for dimension {n}.')


def _apply_multi(op, f, alpha):
    for axis, order in enumerate(alpha):
        for _ in range(order):
            f = op(f, axis)
    return f


def combined_expansion(ctx: StarContext, f, g, alpha, beta):
    """Σ_{γ≤α, δ≤β} C(α,γ) C(β,δ) (∇_σ^{α−γ} ∂_δ f) ⋆ (x^γ ∂_{β−δ} g).

    Equals x^α ∂_β (f ⋆ g); with α = 0 this is the higher Leibniz rule and with
    β = 0 the iterated x-multiplication rule.
    """
    n = ctx.pvs.n
    alpha = tuple(int(a) for a in alpha)
    beta = tuple(int(b) for b in beta)
    if len(alpha) != n or len(beta) != n:
        raise DimensionError(f'Multi-indices must have {n} entries.')
    total = None
    for gamma in np.ndindex(*[a + 1 for a in alpha]):
        for delta in np.ndindex(*[b + 1 for b in beta]):
            weight = 1
            for a, c in zip(alpha, gamma):
                weight *= comb(a, c)
            for b, d in zip(beta, delta):
                weight *= comb(b, d)
            left = _apply_multi(partial_deriv, f, delta)
            left = _apply_multi(lambda h, axis: symplectic_gradient(ctx, h, axis), left,
                                tuple(a - c for a, c in zip(alpha, gamma)))
            right = _apply_multi(partial_deriv, g, tuple(b - d for b, d in zip(beta, delta)))
            right = _apply_multi(x_multiply, right, gamma)
            term = star(ctx, left, right) * weight
            total = term if total is None else total + term
    return total


def leibniz_expansion(ctx: StarContext, f, g, beta):
    return combined_expansion(ctx, f, g, (0,) * ctx.pvs.n, beta)


def x_multiplication_expansion(ctx: StarContext, f, g, alpha):
    return combined_expansion(ctx, f, g, alpha, (0,) * ctx.pvs.n)


def combined_direct(ctx: StarContext, f, g, alpha, beta) -> GridFunction:
    """x^α ∂_β (f ⋆ g) evaluated directly on the grid."""
    product = star(ctx, f, g)
    return _apply_multi(x_multiply, _apply_multi(partial_deriv, product, beta), alpha)


def smoothstep7(t):
    """35t⁴ − 84t⁵ + 70t⁶ − 20t⁷: 0 at t=0, 1 at t=1, three vanishing derivatives at both ends."""
    t = np.clip(t, 0.0, 1.0)
    return t ** 4 * (35.0 - 84.0 * t + 70.0 * t ** 2 - 20.0 * t ** 3)


def approx_identity(spec: GridSpec, k: int, shell_width: float | None = None) -> GridFunction:
    """Radial bump χ_k: 1 on |x| ≤ k·L/8, decaying to 0 across a shell of fixed width."""
    if shell_width is None:
        shell_width = float(get_setting('APPROX_ID_SHELL_WIDTH'))
    if k < 0:
        raise DimensionError('Approximate-identity index must be nonnegative.')
    radius = k * spec.L / 8.0
    if not radius < spec.L - 2.0 * shell_width:
        raise DimensionError(
            f'Plateau radius {radius:.4g} plus two shells of width {shell_width:.4g} does not fit in L={spec.L:.4g}.'
        )
    r = np.linalg.norm(spec.points(), axis=-1)
    return GridFunction(spec, 1.0 - smoothstep7((r - radius) / shell_width))


def approx_identity_errors(ctx: StarContext, f: GridFunction, ks) -> list[float]:
    """s_{0,0}(χ_k ⋆ f − f) for each k."""
    ks = list(ks)
    if not ks:
        return []
    # χ_k ⋆_σ f = f ⋆_{−σ} χ_k, batched over k
    bumps = np.stack([approx_identity(ctx.spec, k).samples for k in ks])
    products = star_samples(-ctx.sigma, ctx.spec, fourier_inverse(f).samples, bumps)
    return [seminorm(GridFunction(ctx.spec, p) - f, 0, 0) for p in products]


def sup_estimate(ctx: StarContext, f: GridFunction, g: GridFunction) -> dict:
    """s₀₀(f⋆g) against ‖ǧ‖₁·s₀₀(f) ≤ (2π)^n s₀₀(f)·s_{2n,2n}(g).

    The middle term is the discrete triangle-inequality bound for g ⋆_{−σ} f; the
    right-hand side adds the L¹ estimate for ǧ.
    """
    n = ctx.pvs.n
    lhs = seminorm(star_grid(ctx, f, g), 0, 0)
    s_f = seminorm(f, 0, 0)
    l1_g = float(np.sum(np.abs(fourier_inverse(g).samples)) * ctx.spec.dual_cell ** n)
    return {
        'lhs': lhs,
        'l1_bound': l1_g * s_f,
        'seminorm_bound': (2.0 * math.pi) ** n * s_f * seminorm(g, 2 * n, 2 * n),
    }


def seminorm_ratio(ctx: StarContext, f: GridFunction, g: GridFunction, p: int, q: int,
                   product: GridFunction | None = None) -> float:
    """s_{p,q}(f⋆g) / (s_{0,p+q}(f) · s_{p+2n,q+2n}(g)); pass ``product`` to reuse f⋆g."""
    n = ctx.pvs.n
    denom = seminorm(f, 0, p + q) * seminorm(g, p + 2 * n, q + 2 * n)
    if denom == 0.0:
        return 0.0
    if product is None:
        product = star_grid(ctx, f, g)
    return seminorm(product, p, q) / denom


def fit_seminorm_constant(ctx: StarContext, pairs, p: int, q: int, products=None) -> float:
    """Smallest C with s_{p,q}(f⋆g) ≤ C s_{0,p+q}(f) s_{p+2n,q+2n}(g) over the given pairs."""
    pairs = list(pairs)
    if products is None:
        products = [None] * len(pairs)
    ratios = [seminorm_ratio(ctx, f, g, p, q, fg) for (f, g), fg in zip(pairs, products)]
    # rounded up so that C·denominator ≥ numerator still holds after the division
    constant = max(ratios, default=0.0) * (1.0 + 8.0 * np.finfo(float).eps)
    logger.debug('Fitted seminorm constant p=%d q=%d over %d pairs: %.6g', p, q, len(ratios), constant)
    return constant


def tensor_factor_check(pvs0: PoissonVectorSpace, pvs_w: PoissonVectorSpace,
                        f0: PlaneWaveSum, fw: PlaneWaveSum, g0: PlaneWaveSum, gw: PlaneWaveSum) -> float:
    """Distance between (f₀⊗f_W) ⋆ (g₀⊗g_W) and (f₀g₀) ⊗ (f_W ⋆ g_W) on V₀ ⊕ W.

    ``pvs0`` carries the (zero) Poisson tensor of V₀; the block-diagonal total tensor is
    assembled from both.
    """
    n0, nw = pvs0.n, pvs_w.n
    total = np.zeros((n0 + nw, n0 + nw))
    total[:n0, :n0] = pvs0.sigma
    total[n0:, n0:] = pvs_w.sigma
    ctx = StarContext(PoissonVectorSpace(n0 + nw, total))
    lhs = star_exact(ctx, f0.tensor(fw), g0.tensor(gw))
    rhs = star_exact(StarContext(pvs0), f0, g0).tensor(star_exact(StarContext(pvs_w), fw, gw))
    return lhs.distance(rhs)


def planewave_shift_check(pvs: PoissonVectorSpace, xi, g: PlaneWaveSum, x) -> complex:
    """(e_ξ ⋆ g)(x) − e^{i⟨ξ,x⟩} g(x − ½σ♯ξ) at one point."""
    ctx = StarContext(pvs)
    x = np.asarray(x, dtype=float)
    lhs = star_exact(ctx, PlaneWaveSum.phase(xi), g).evaluate(x)
    rhs = np.exp(1j * float(np.dot(xi, x))) * g.evaluate(x - 0.5 * musical_sharp(pvs, xi))
    return lhs - rhs
