"""Function representations on V: plane-wave sums, periodic grid samples, Fourier pair.

Grid convention (per axis): x_j = -L + j*h with h = 2L/N, dual lattice
xi_k = (pi/L)*k for k in [-N/2, N/2), dual cell volume (pi/L)^n. Frequency
arrays are stored centered, index k + N/2.

    fcheck_k = (h/2pi)^n (-1)^{sum k} DFT(f)_k          (Riemann sum of the inverse transform)
    f_j      = sum_k fcheck_k e^{i xi_k . x_j} (pi/L)^n  (exact inverse of the above)
"""
from __future__ import annotations

import itertools
import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from weylmoyal.errors import CommensurabilityError, DimensionError, GridSizeError
from weylmoyal.settings import get_setting

logger = logging.getLogger(__name__)

SPACE = 'space'
FREQUENCY = 'frequency'


@dataclass(frozen=True)
class GridSpec:
    n: int
    L: float
    N: int

    def __post_init__(self):
        if self.n <= 0:
            raise DimensionError('Grid dimension must be positive.')
        if self.N <= 0 or self.N % 2:
            raise DimensionError(f'N must be a positive even integer, got {self.N}.')
        if not self.L > 0:
            raise DimensionError(f'L must be positive, got {self.L}.')
        cap = int(get_setting('MAX_GRID_SAMPLES'))
        if self.N ** self.n > cap:
            raise GridSizeError(f'{self.N}^{self.n} samples exceed the configured cap {cap}.')
        object.__setattr__(self, 'L', float(self.L))

    @classmethod
    def default(cls) -> GridSpec:
        return cls(
            n=int(get_setting('GRID_DIM')),
            L=float(get_setting('GRID_HALF_WIDTH')),
            N=int(get_setting('GRID_POINTS')),
        )

    @classmethod
    def commensurate(cls, n: int, N: int, sigma, L_target: float | None = None) -> GridSpec:
        """Grid whose half-width makes every shift ½σ♯ξ_k a whole number of cells.

        Requires N·π·σ^{kl}/(4L²) ∈ ℤ for all entries; L is chosen as close to
        ``L_target`` as the admissible values allow.
        """
        sigma = np.asarray(sigma, dtype=float)
        if L_target is None:
            L_target = float(get_setting('GRID_HALF_WIDTH'))
        s = float(np.max(np.abs(sigma))) if sigma.size else 0.0
        if s == 0.0:
            return cls(n=n, L=L_target, N=N)
        unit = N * math.pi * s / 4.0
        m0 = max(1, round(unit / L_target ** 2))
        candidates = sorted(range(1, 4 * m0 + 2), key=lambda m: (abs(math.sqrt(unit / m) - L_target), m))
        for m in candidates:
            spec = cls(n=n, L=math.sqrt(unit / m), N=N)
            if spec.is_commensurate(sigma):
                return spec
        raise CommensurabilityError(f'No half-width makes N={N} commensurate with sigma.')

    @property
    def h(self) -> float:
        return 2.0 * self.L / self.N

    @property
    def dual_cell(self) -> float:
        return math.pi / self.L

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.N,) * self.n

    @property
    def size(self) -> int:
        return self.N ** self.n

    def axis(self) -> np.ndarray:
        return -self.L + self.h * np.arange(self.N)

    def dual_axis(self) -> np.ndarray:
        return self.dual_cell * np.arange(-self.N // 2, self.N // 2)

    def points(self) -> np.ndarray:
        """Lattice points, shape ``shape + (n,)``."""
        return np.stack(np.meshgrid(*([self.axis()] * self.n), indexing='ij'), axis=-1)

    def dual_points(self) -> np.ndarray:
        return np.stack(np.meshgrid(*([self.dual_axis()] * self.n), indexing='ij'), axis=-1)

    def dual_indices(self) -> np.ndarray:
        """Integer k-vectors of the centered dual lattice, shape ``shape + (n,)``."""
        k = np.arange(-self.N // 2, self.N // 2)
        return np.stack(np.meshgrid(*([k] * self.n), indexing='ij'), axis=-1)

    def fft_frequencies(self) -> np.ndarray:
        """Dual-lattice frequencies along one axis in FFT order."""
        return self.dual_cell * np.fft.fftfreq(self.N, d=1.0 / self.N)

    def checkerboard(self) -> np.ndarray:
        """(-1)^{k_1 + ... + k_n} over the centered dual lattice."""
        return np.where(self.dual_indices().sum(axis=-1) % 2 == 0, 1.0, -1.0)

    def lattice_index(self, xi, tol: float | None = None) -> np.ndarray:
        """Integer k with ξ = (π/L)k; raises when ξ is off the dual lattice."""
        if tol is None:
            tol = float(get_setting('COMMENSURABILITY_TOL'))
        xi = np.asarray(xi, dtype=float).reshape(-1)
        if xi.shape[0] != self.n:
            raise DimensionError(f'Frequency has {xi.shape[0]} components, expected {self.n}.')
        k = xi / self.dual_cell
        k_int = np.rint(k)
        if np.any(np.abs(k - k_int) > tol * np.maximum(1.0, np.abs(k))):
            raise CommensurabilityError(f'Frequency {xi.tolist()} is not on the dual lattice (cell {self.dual_cell:.6g}).')
        return k_int.astype(int)

    def spatial_index(self, x, tol: float | None = None) -> np.ndarray:
        """Integer j with x = j·h; raises when x is not a whole number of cells."""
        if tol is None:
            tol = float(get_setting('COMMENSURABILITY_TOL'))
        x = np.asarray(x, dtype=float).reshape(-1)
        if x.shape[0] != self.n:
            raise DimensionError(f'Vector has {x.shape[0]} components, expected {self.n}.')
        j = x / self.h
        j_int = np.rint(j)
        if np.any(np.abs(j - j_int) > tol * np.maximum(1.0, np.abs(j))):
            raise CommensurabilityError(f'Vector {x.tolist()} is not a multiple of the cell h={self.h:.6g}.')
        return j_int.astype(int)

    def is_commensurate(self, sigma, tol: float | None = None) -> bool:
        if tol is None:
            tol = float(get_setting('COMMENSURABILITY_TOL'))
        ratio = self.N * math.pi * np.asarray(sigma, dtype=float) / (4.0 * self.L ** 2)
        return bool(np.all(np.abs(ratio - np.rint(ratio)) <= tol * np.maximum(1.0, np.abs(ratio))))

    def to_json(self) -> dict:
        return {'n': self.n, 'L': self.L, 'N': self.N}


@dataclass(frozen=True, eq=False)
class GridFunction:
    spec: GridSpec
    samples: np.ndarray
    domain: str = SPACE

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=complex)
        if samples.shape != self.spec.shape:
            raise DimensionError(f'samples have shape {samples.shape}, expected {self.spec.shape}.')
        if self.domain not in (SPACE, FREQUENCY):
            raise DimensionError(f'Unknown domain {self.domain!r}.')
        object.__setattr__(self, 'samples', samples)

    @classmethod
    def zeros(cls, spec: GridSpec, domain: str = SPACE) -> GridFunction:
        return cls(spec, np.zeros(spec.shape, dtype=complex), domain)

    def _check_peer(self, other: GridFunction):
        if not isinstance(other, GridFunction):
            return NotImplemented
        if other.spec != self.spec or other.domain != self.domain:
            raise DimensionError('Grid functions live on different grids or domains.')
        return None

    def __add__(self, other):
        if (bad := self._check_peer(other)) is not None:
            return bad
        return GridFunction(self.spec, self.samples + other.samples, self.domain)

    def __sub__(self, other):
        if (bad := self._check_peer(other)) is not None:
            return bad
        return GridFunction(self.spec, self.samples - other.samples, self.domain)

    def __mul__(self, scalar):
        if isinstance(scalar, GridFunction):
            self._check_peer(scalar)
            return GridFunction(self.spec, self.samples * scalar.samples, self.domain)
        return GridFunction(self.spec, self.samples * complex(scalar), self.domain)

    __rmul__ = __mul__

    def __neg__(self):
        return GridFunction(self.spec, -self.samples, self.domain)

    def conj(self) -> GridFunction:
        """Involution f*(x) = conj f(x) (space domain)."""
        if self.domain != SPACE:
            raise DimensionError('Involution is defined on space-domain samples.')
        return GridFunction(self.spec, np.conj(self.samples), self.domain)

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.samples)))

    def l2_norm(self) -> float:
        cell = self.spec.h if self.domain == SPACE else self.spec.dual_cell
        return float(np.sqrt(np.sum(np.abs(self.samples) ** 2) * cell ** self.spec.n))

    def flat(self) -> np.ndarray:
        return self.samples.reshape(-1)


def fourier_inverse(f: GridFunction) -> GridFunction:
    """f̌(ξ_k) = (2π)^{-n} Σ_j f(x_j) e^{-i⟨ξ_k, x_j⟩} h^n, on the centered dual lattice."""
    spec = f.spec
    scale = (spec.h / (2.0 * math.pi)) ** spec.n
    fcheck = scale * spec.checkerboard() * np.fft.fftshift(np.fft.fftn(f.samples))
    return GridFunction(spec, fcheck, FREQUENCY)


def fourier_forward(fcheck: GridFunction) -> GridFunction:
    spec = fcheck.spec
    scale = (2.0 * math.pi / spec.h) ** spec.n
    samples = scale * np.fft.ifftn(np.fft.ifftshift(fcheck.samples * spec.checkerboard()))
    return GridFunction(spec, samples, SPACE)


def translate_samples(samples: np.ndarray, spec: GridSpec, shifts: np.ndarray) -> np.ndarray:
    """Band-limited translates g(x - a) for a batch of shift vectors.

    ``samples`` has shape ``spec.shape``; ``shifts`` has shape ``(K, n)``.
    Returns shape ``(K,) + spec.shape``.
    """
    shifts = np.atleast_2d(np.asarray(shifts, dtype=float))
    ghat = np.fft.fftn(samples)
    freqs = np.meshgrid(*([spec.fft_frequencies()] * spec.n), indexing='ij')
    phase_arg = np.zeros((shifts.shape[0],) + spec.shape)
    for axis in range(spec.n):
        phase_arg += shifts[:, axis].reshape((-1,) + (1,) * spec.n) * freqs[axis]
    batch = ghat[None, ...] * np.exp(-1j * phase_arg)
    return np.fft.ifftn(batch, axes=tuple(range(1, spec.n + 1)))


def translate(f: GridFunction, shift) -> GridFunction:
    """(T_a f)(x) = f(x - a) via a Fourier phase ramp."""
    shift = np.asarray(shift, dtype=float).reshape(1, -1)
    if shift.shape[1] != f.spec.n:
        raise DimensionError(f'Shift has {shift.shape[1]} components, expected {f.spec.n}.')
    return GridFunction(f.spec, translate_samples(f.samples, f.spec, shift)[0])


def spectral_derivative(f: GridFunction, beta) -> GridFunction:
    """∂_β f computed by multiplying f̌ by (iξ)^β."""
    beta = tuple(int(b) for b in beta)
    if len(beta) != f.spec.n:
        raise DimensionError(f'Multi-index {beta} does not match dimension {f.spec.n}.')
    if not any(beta):
        return f
    ghat = np.fft.fftn(f.samples)
    freqs = np.meshgrid(*([f.spec.fft_frequencies()] * f.spec.n), indexing='ij')
    factor = np.ones(f.spec.shape, dtype=complex)
    for axis, order in enumerate(beta):
        if order:
            factor = factor * (1j * freqs[axis]) ** order
    return GridFunction(f.spec, np.fft.ifftn(ghat * factor))


def multi_indices(n: int, order: int):
    """All α ∈ ℕⁿ with |α| ≤ order, in lexicographic order."""
    return [a for a in itertools.product(range(order + 1), repeat=n) if sum(a) <= order]


def seminorm(f: GridFunction, p: int, q: int) -> float:
    """s_{p,q}(f) = Σ_{|α|≤p, |β|≤q} max_grid |x^α ∂_β f|."""
    spec = f.spec
    if not f.samples.any():
        return 0.0
    points = spec.points()
    powers = {}
    for alpha in multi_indices(spec.n, p):
        weight = np.ones(spec.shape)
        for axis, order in enumerate(alpha):
            if order:
                weight = weight * points[..., axis] ** order
        powers[alpha] = weight
    total = 0.0
    for beta in multi_indices(spec.n, q):
        deriv = np.abs(spectral_derivative(f, beta).samples)
        for alpha in multi_indices(spec.n, p):
            total += float(np.max(np.abs(powers[alpha]) * deriv))
    return total


def l1_norm_freq(fcheck: GridFunction) -> float:
    """Σ_k |f̌(ξ_k)| (π/L)^n."""
    return float(np.sum(np.abs(fcheck.samples)) * fcheck.spec.dual_cell ** fcheck.spec.n)


def l1_estimate(f: GridFunction) -> dict:
    """Both sides of ‖f̌‖₁ ≤ (2π)^n s_{2n,2n}(f), with the discretization slack ε_disc.

    ε_disc charges ‖f̌‖₁ with the relative mass left on the outer cells of the box
    and of the dual box, plus accumulated rounding.
    """
    spec = f.spec
    fcheck = fourier_inverse(f)
    l1 = l1_norm_freq(fcheck)
    bound = (2.0 * math.pi) ** spec.n * seminorm(f, 2 * spec.n, 2 * spec.n)
    eps_disc = l1 * (_edge_ratio(f.samples) + _edge_ratio(fcheck.samples)) + spec.size * np.finfo(float).eps * l1
    return {'l1': l1, 'seminorm_bound': bound, 'eps_disc': float(eps_disc), 'slack': bound + float(eps_disc) - l1}


def _edge_ratio(samples: np.ndarray) -> float:
    peak = float(np.max(np.abs(samples)))
    if peak == 0.0:
        return 0.0
    edge = 0.0
    for axis in range(samples.ndim):
        for idx in (0, -1):
            edge = max(edge, float(np.max(np.abs(np.take(samples, idx, axis=axis)))))
    return edge / peak


def make_gaussian(spec: GridSpec, center=None, widths=None, amplitude: complex = 1.0) -> GridFunction:
    """amplitude · exp(-Σ_j (x_j - c_j)² / (2 w_j²))."""
    center = np.zeros(spec.n) if center is None else np.asarray(center, dtype=float).reshape(-1)
    widths = np.ones(spec.n) if widths is None else np.broadcast_to(np.asarray(widths, dtype=float), (spec.n,))
    if center.shape[0] != spec.n:
        raise DimensionError(f'Center has {center.shape[0]} components, expected {spec.n}.')
    if np.any(widths <= 0):
        raise DimensionError('Gaussian widths must be positive.')
    z = (spec.points() - center) / widths
    return GridFunction(spec, amplitude * np.exp(-0.5 * np.sum(z ** 2, axis=-1)))


class PlaneWaveSum:
    """Finite combination Σ c_j e_{ξ_j} of phase functions e_ξ(x) = e^{i⟨ξ,x⟩}.

    Terms with frequencies within ``tol`` (max-norm) are merged, exact zeros dropped,
    and the remaining terms kept in lexicographic order of frequency.
    """

    __hash__ = None

    def __init__(self, n: int, coeffs=(), freqs=(), tol: float | None = None):
        if n <= 0:
            raise DimensionError('Dimension must be positive.')
        self.n = int(n)
        self.tol = float(get_setting('FREQ_DEDUP_TOL')) if tol is None else float(tol)
        coeffs = np.asarray(coeffs, dtype=complex).reshape(-1)
        freqs = np.asarray(freqs, dtype=float).reshape(-1, self.n) if coeffs.size else np.zeros((0, self.n))
        if freqs.shape[0] != coeffs.shape[0]:
            raise DimensionError('Coefficient and frequency counts differ.')
        self.coeffs, self.freqs = self._merge(coeffs, freqs)

    def _merge(self, coeffs: np.ndarray, freqs: np.ndarray):
        if coeffs.size == 0:
            return np.zeros(0, dtype=complex), np.zeros((0, self.n))
        m = coeffs.shape[0]
        pairs = cKDTree(freqs).query_pairs(self.tol, p=np.inf, output_type='ndarray')
        graph = coo_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(m, m))
        count, labels = connected_components(graph, directed=False)
        # representative frequency: first occurrence in input order
        first = np.full(count, m)
        np.minimum.at(first, labels, np.arange(m))
        sums = np.zeros(count, dtype=complex)
        np.add.at(sums, labels, coeffs)
        keep = sums != 0
        out_c = sums[keep]
        out_f = freqs[first[keep]]
        order = np.lexsort(out_f.T[::-1])
        return out_c[order], out_f[order]

    @classmethod
    def phase(cls, xi, coeff: complex = 1.0, tol: float | None = None) -> PlaneWaveSum:
        xi = np.asarray(xi, dtype=float).reshape(-1)
        return cls(xi.shape[0], [coeff], [xi], tol)

    @classmethod
    def unit(cls, n: int) -> PlaneWaveSum:
        return cls.phase(np.zeros(n))

    @classmethod
    def zero(cls, n: int) -> PlaneWaveSum:
        return cls(n)

    @property
    def terms(self) -> list[tuple[complex, np.ndarray]]:
        return list(zip(self.coeffs, self.freqs))

    def __len__(self):
        return self.coeffs.shape[0]

    def __repr__(self):
        return f'PlaneWaveSum(n={self.n}, terms={len(self)})'

    def __eq__(self, other):
        if not isinstance(other, PlaneWaveSum):
            return NotImplemented
        return (
            self.n == other.n
            and np.array_equal(self.coeffs, other.coeffs)
            and np.array_equal(self.freqs, other.freqs)
        )

    def _same_dim(self, other: PlaneWaveSum):
        if other.n != self.n:
            raise DimensionError(f'Plane-wave sums of dimension {self.n} and {other.n}.')

    def __add__(self, other):
        if not isinstance(other, PlaneWaveSum):
            return NotImplemented
        self._same_dim(other)
        return PlaneWaveSum(
            self.n,
            np.concatenate([self.coeffs, other.coeffs]),
            np.concatenate([self.freqs, other.freqs]),
            self.tol,
        )

    def __neg__(self):
        return PlaneWaveSum(self.n, -self.coeffs, self.freqs, self.tol)

    def __sub__(self, other):
        if not isinstance(other, PlaneWaveSum):
            return NotImplemented
        return self + (-other)

    def __mul__(self, scalar):
        if isinstance(scalar, PlaneWaveSum):
            return self.pointwise(scalar)
        return PlaneWaveSum(self.n, self.coeffs * complex(scalar), self.freqs, self.tol)

    __rmul__ = __mul__

    def involution(self) -> PlaneWaveSum:
        """(Σ c e_ξ)* = Σ conj(c) e_{-ξ}."""
        return PlaneWaveSum(self.n, np.conj(self.coeffs), -self.freqs, self.tol)

    def pointwise(self, other: PlaneWaveSum) -> PlaneWaveSum:
        self._same_dim(other)
        coeffs = np.multiply.outer(self.coeffs, other.coeffs).reshape(-1)
        freqs = (self.freqs[:, None, :] + other.freqs[None, :, :]).reshape(-1, self.n)
        return PlaneWaveSum(self.n, coeffs, freqs, self.tol)

    def tensor(self, other: PlaneWaveSum) -> PlaneWaveSum:
        """f ⊗ g on V₁ ⊕ V₂: frequencies concatenated."""
        coeffs = np.multiply.outer(self.coeffs, other.coeffs).reshape(-1)
        freqs = np.concatenate(
            [
                np.repeat(self.freqs, len(other), axis=0),
                np.tile(other.freqs, (len(self), 1)),
            ],
            axis=1,
        ) if len(self) and len(other) else np.zeros((0, self.n + other.n))
        return PlaneWaveSum(self.n + other.n, coeffs, freqs, min(self.tol, other.tol))

    def partial(self, j: int) -> PlaneWaveSum:
        """∂_j e_ξ = iξ_j e_ξ."""
        return PlaneWaveSum(self.n, 1j * self.freqs[:, j] * self.coeffs, self.freqs, self.tol)

    def evaluate(self, x) -> np.ndarray | complex:
        """Values at points of shape ``(..., n)``."""
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.n:
            raise DimensionError(f'Points have {x.shape[-1]} components, expected {self.n}.')
        if not len(self):
            out = np.zeros(x.shape[:-1], dtype=complex)
        else:
            out = np.exp(1j * (x @ self.freqs.T)) @ self.coeffs
        return complex(out) if np.ndim(out) == 0 else out

    def coefficient_l1(self) -> float:
        """Σ |c_j|, the L¹ norm of the (atomic) Fourier transform."""
        return float(np.sum(np.abs(self.coeffs)))

    def distance(self, other: PlaneWaveSum) -> float:
        """Σ |c_j - d_j| after matching frequencies; bounds the sup-norm distance."""
        return (self - other).coefficient_l1()

    def is_zero(self) -> bool:
        return len(self) == 0

    def to_json(self) -> list:
        return [
            {'re': float(c.real), 'im': float(c.imag), 'freq': [float(v) for v in xi]}
            for c, xi in zip(self.coeffs, self.freqs)
        ]

    @classmethod
    def from_json(cls, data: list, n: int | None = None) -> PlaneWaveSum:
        if not data:
            if n is None:
                raise DimensionError('Empty plane-wave list needs an explicit dimension.')
            return cls(n)
        freqs = np.array([item['freq'] for item in data], dtype=float)
        coeffs = np.array([complex(item.get('re', 0.0), item.get('im', 0.0)) for item in data])
        return cls(freqs.shape[1] if n is None else n, coeffs, freqs)


def eval_planewave(pw: PlaneWaveSum, x):
    return pw.evaluate(x)


def sample_planewave(pw: PlaneWaveSum, spec: GridSpec) -> GridFunction:
    if pw.n != spec.n:
        raise DimensionError(f'Plane-wave sum of dimension {pw.n} on a grid of dimension {spec.n}.')
    for xi in pw.freqs:
        spec.lattice_index(xi)
    if pw.is_zero():
        return GridFunction.zeros(spec)
    return GridFunction(spec, pw.evaluate(spec.points()))


def save_grid_function(f: GridFunction, path) -> None:
    """JSON header line, then little-endian complex64 samples (row-major)."""
    header = f.spec.to_json()
    if f.domain != SPACE:
        header['domain'] = f.domain
    with open(path, 'wb') as fh:
        fh.write(json.dumps(header).encode('utf-8') + b'\n')
        fh.write(np.ascontiguousarray(f.samples, dtype='<c8').tobytes())


def load_grid_function(path) -> GridFunction:
    raw = Path(path).read_bytes()
    head, sep, body = raw.partition(b'\n')
    if not sep:
        raise DimensionError(f'{path}: missing JSON header line.')
    header = json.loads(head.decode('utf-8'))
    spec = GridSpec(n=int(header['n']), L=float(header['L']), N=int(header['N']))
    samples = np.frombuffer(body, dtype='<c8')
    if samples.size != spec.size:
        raise DimensionError(f'{path}: expected {spec.size} samples, found {samples.size}.')
    return GridFunction(spec, samples.reshape(spec.shape).astype(complex), header.get('domain', SPACE))


def save_planewave(pw: PlaneWaveSum, path) -> None:
    Path(path).write_text(json.dumps(pw.to_json()))


def load_planewave(path, n: int | None = None) -> PlaneWaveSum:
    return PlaneWaveSum.from_json(json.loads(Path(path).read_text()), n=n)
