"""Poisson vector spaces, the musical map, rank decomposition and Heisenberg laws.

Coordinates: a Poisson tensor is stored as the matrix ``sigma[k, l] = σ^{kl}``,
so that ``σ(ξ, η) = ξ @ sigma @ η`` and ``(σ♯ξ)^j = σ^{kj} ξ_k``, i.e.
``σ♯ξ = sigma.T @ ξ``.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from weylmoyal.errors import AntisymmetryError, DimensionError, RankError
from weylmoyal.settings import get_setting

logger = logging.getLogger(__name__)

ANTISYMMETRY_LOAD_TOL = 1e-12


def standard_symplectic(r: int) -> np.ndarray:
    """The 2r×2r matrix (0 1_r; −1_r 0)."""
    j = np.zeros((2 * r, 2 * r))
    j[:r, r:] = np.eye(r)
    j[r:, :r] = -np.eye(r)
    return j


def _as_vector(values, n: int, what: str) -> np.ndarray:
    arr = np.asarray(values, dtype=float).reshape(-1)
    if arr.shape[0] != n:
        raise DimensionError(f'{what} has {arr.shape[0]} components, expected {n}.')
    return arr


@dataclass(frozen=True, eq=False)
class PoissonVectorSpace:
    n: int
    sigma: np.ndarray

    def __post_init__(self):
        sigma = np.array(self.sigma, dtype=float)
        if self.n <= 0:
            raise DimensionError('Dimension must be positive.')
        if sigma.shape != (self.n, self.n):
            raise DimensionError(f'sigma has shape {sigma.shape}, expected {(self.n, self.n)}.')
        if not np.array_equal(sigma, -sigma.T):
            raise AntisymmetryError('sigma must be exactly antisymmetric as stored.')
        sigma.setflags(write=False)
        object.__setattr__(self, 'sigma', sigma)

    @classmethod
    def from_matrix(cls, sigma, tol: float = ANTISYMMETRY_LOAD_TOL) -> PoissonVectorSpace:
        """Validate antisymmetry up to ``tol`` and store the antisymmetrized matrix."""
        m = np.asarray(sigma, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise DimensionError('sigma must be a square matrix.')
        defect = float(np.max(np.abs(m + m.T))) if m.size else 0.0
        if defect > tol:
            raise AntisymmetryError(f'sigma violates antisymmetry by {defect:.3e} (> {tol:.1e}).')
        return cls(n=m.shape[0], sigma=0.5 * (m - m.T))

    @classmethod
    def canonical(cls, n: int, theta: float = 1.0) -> PoissonVectorSpace:
        """σ^{12} = θ in dimension n (zero elsewhere)."""
        m = np.zeros((n, n))
        if n >= 2:
            m[0, 1] = theta
            m[1, 0] = -theta
        return cls(n=n, sigma=m)

    def pairing(self, xi, eta) -> float:
        """σ(ξ, η) = Σ σ^{kl} ξ_k η_l."""
        xi = _as_vector(xi, self.n, 'xi')
        eta = _as_vector(eta, self.n, 'eta')
        return float(xi @ self.sigma @ eta)

    def negated(self) -> PoissonVectorSpace:
        return PoissonVectorSpace(n=self.n, sigma=-self.sigma)

    def singular_values(self) -> np.ndarray:
        return np.linalg.svd(self.sigma, compute_uv=False)

    def rank(self, rtol: float | None = None) -> int:
        return _numerical_rank(self.singular_values(), rtol)

    def to_json(self) -> dict:
        return {'n': self.n, 'sigma': self.sigma.tolist()}


def load_poisson(path) -> PoissonVectorSpace:
    data = json.loads(Path(path).read_text())
    if 'sigma' not in data:
        raise DimensionError(f'{path}: missing "sigma".')
    pvs = PoissonVectorSpace.from_matrix(data['sigma'])
    if 'n' in data and int(data['n']) != pvs.n:
        raise DimensionError(f'{path}: n={data["n"]} does not match sigma of size {pvs.n}.')
    return pvs


def _numerical_rank(singular_values: np.ndarray, rtol: float | None = None) -> int:
    if rtol is None:
        rtol = float(get_setting('RANK_RTOL'))
    if singular_values.size == 0 or singular_values[0] == 0.0:
        return 0
    return int(np.sum(singular_values > rtol * singular_values[0]))


def musical_sharp(pvs: PoissonVectorSpace, xi) -> np.ndarray:
    xi = _as_vector(xi, pvs.n, 'xi')
    return pvs.sigma.T @ xi


@dataclass(frozen=True, eq=False)
class HeisenbergElement:
    xi: np.ndarray
    lam: float = 0.0

    def __post_init__(self):
        xi = np.array(self.xi, dtype=float).reshape(-1)
        xi.setflags(write=False)
        object.__setattr__(self, 'xi', xi)
        object.__setattr__(self, 'lam', float(self.lam))

    @classmethod
    def identity(cls, n: int) -> HeisenbergElement:
        return cls(np.zeros(n), 0.0)


def _check_pair(pvs: PoissonVectorSpace, a: HeisenbergElement, b: HeisenbergElement | None = None):
    for elem in (a, b):
        if elem is not None and elem.xi.shape[0] != pvs.n:
            raise DimensionError(f'Heisenberg element of dimension {elem.xi.shape[0]}, expected {pvs.n}.')


def heisenberg_commutator(pvs: PoissonVectorSpace, a: HeisenbergElement, b: HeisenbergElement) -> HeisenbergElement:
    _check_pair(pvs, a, b)
    return HeisenbergElement(np.zeros(pvs.n), pvs.pairing(a.xi, b.xi))


def heisenberg_product(pvs: PoissonVectorSpace, a: HeisenbergElement, b: HeisenbergElement) -> HeisenbergElement:
    _check_pair(pvs, a, b)
    return HeisenbergElement(a.xi + b.xi, a.lam + b.lam - 0.5 * pvs.pairing(a.xi, b.xi))


def heisenberg_inverse(pvs: PoissonVectorSpace, a: HeisenbergElement) -> HeisenbergElement:
    _check_pair(pvs, a)
    return HeisenbergElement(-a.xi, -a.lam)


@dataclass(frozen=True, eq=False)
class RankDecomposition:
    rank: int
    W_basis: np.ndarray  # n × 2r, orthonormal columns spanning W = im σ♯
    V0_basis: np.ndarray  # n × (n − 2r), orthonormal complement of W
    ker_basis: np.ndarray  # n × (n − 2r), covectors spanning ker σ
    omega: np.ndarray  # 2r × 2r symplectic form on W in W_basis coordinates
    sigma_W: np.ndarray = field(repr=False, default=None)  # W_basisᵀ σ W_basis

    def to_w_coordinates(self, v) -> np.ndarray:
        return self.W_basis.T @ np.asarray(v, dtype=float)

    def omega_pairing(self, v, w) -> float:
        """ω(v, w) for vectors v, w ∈ W given in ambient coordinates."""
        return float(self.to_w_coordinates(v) @ self.omega @ self.to_w_coordinates(w))

    def split_covector(self, xi) -> tuple[np.ndarray, np.ndarray]:
        """ξ = κ + ζ with κ ∈ ker σ and ζ in the annihilator of V₀."""
        xi = np.asarray(xi, dtype=float)
        kappa = self.ker_basis @ (self.ker_basis.T @ xi)
        return kappa, xi - kappa


def rank_decomposition(pvs: PoissonVectorSpace, rtol: float | None = None) -> RankDecomposition:
    u, s, vt = np.linalg.svd(pvs.sigma)
    rank = _numerical_rank(s, rtol)
    if rank % 2:
        logger.warning('Numerical rank %d of sigma is odd; singular values %s', rank, s)
    w_basis = u[:, :rank]
    v0_basis = u[:, rank:]
    ker_basis = vt[rank:, :].T
    sigma_w = w_basis.T @ pvs.sigma @ w_basis
    sigma_w = 0.5 * (sigma_w - sigma_w.T)
    if rank:
        omega = -np.linalg.inv(sigma_w)
        omega = 0.5 * (omega - omega.T)
    else:
        omega = np.zeros((0, 0))
    return RankDecomposition(
        rank=rank,
        W_basis=w_basis,
        V0_basis=v0_basis,
        ker_basis=ker_basis,
        omega=omega,
        sigma_W=sigma_w,
    )


def darboux_basis(omega, tol: float = 1e-12) -> np.ndarray:
    """Symplectic Gram–Schmidt with pivoting on the largest remaining |ω_ij|.

    Returns B with Bᵀ ω B equal to the standard symplectic matrix; the columns are
    ordered (e_1..e_r, f_1..f_r).
    """
    omega = np.asarray(omega, dtype=float)
    dim = omega.shape[0]
    if omega.shape != (dim, dim):
        raise DimensionError('omega must be square.')
    if dim % 2:
        raise RankError(f'omega has odd size {dim}; it cannot be invertible.')
    if not np.allclose(omega, -omega.T, atol=tol * max(1.0, np.max(np.abs(omega), initial=0.0))):
        raise DimensionError('omega must be antisymmetric.')
    if dim == 0:
        return np.zeros((0, 0))

    scale = float(np.max(np.abs(omega)))
    remaining = [np.eye(dim)[:, i] for i in range(dim)]
    es, fs = [], []
    while remaining:
        r_mat = np.column_stack(remaining)
        gram = r_mat.T @ omega @ r_mat
        upper = np.triu(np.abs(gram), k=1)
        i, j = np.unravel_index(int(np.argmax(upper)), upper.shape)
        g = gram[i, j]
        if abs(g) <= tol * max(scale, 1.0) or len(remaining) == 1:
            raise RankError('omega is singular (no nondegenerate pair left).')
        root = np.sqrt(abs(g))
        e = remaining[i] / root
        f = np.sign(g) * remaining[j] / root
        es.append(e)
        fs.append(f)
        rest = []
        for k, w in enumerate(remaining):
            if k in (i, j):
                continue
            rest.append(w - (w @ omega @ f) * e + (w @ omega @ e) * f)
        remaining = rest
    return np.column_stack(es + fs)
