"""Lorentz orbits of a reference Poisson tensor and the tautological bundle over them."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm, null_space

from weylmoyal.bundles import BaseSpace, PoissonBundle
from weylmoyal.errors import DimensionError, LorentzError, RankError, SignatureError, StabilizerError
from weylmoyal.poisson import PoissonVectorSpace
from weylmoyal.settings import get_setting

logger = logging.getLogger(__name__)


def dfr_sigma0() -> np.ndarray:
    """The standard reference tensor (0 1₂; −1₂ 0)."""
    eye = np.eye(2)
    zero = np.zeros((2, 2))
    return np.block([[zero, eye], [-eye, zero]])


def minkowski_metric(n: int = 4) -> np.ndarray:
    if n < 2:
        raise DimensionError('A Lorentzian metric needs at least two dimensions.')
    return np.diag([1.0] + [-1.0] * (n - 1))


def lorentz_algebra_basis(n: int = 4) -> list[np.ndarray]:
    """η(E_ab − E_ba) for a < b, a basis of o(1, n−1)."""
    eta = minkowski_metric(n)
    basis = []
    for a in range(n):
        for b in range(a + 1, n):
            m = np.zeros((n, n))
            m[a, b], m[b, a] = 1.0, -1.0
            basis.append(eta @ m)
    return basis


def lorentz_residual(matrix, metric=None) -> float:
    """‖ΛᵀgΛ − g‖ relative to max(1, ‖Λ‖²)."""
    matrix = np.asarray(matrix, dtype=float)
    g = minkowski_metric(matrix.shape[0]) if metric is None else np.asarray(metric, dtype=float)
    scale = max(1.0, float(np.linalg.norm(matrix, 2)) ** 2)
    return float(np.abs(matrix.T @ g @ matrix - g).max()) / scale


def is_lorentz(matrix, tol: float | None = None) -> bool:
    matrix = np.asarray(matrix, dtype=float)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        return False
    tol = float(get_setting('LORENTZ_TOL')) if tol is None else tol
    return lorentz_residual(matrix) <= tol


@dataclass(frozen=True, eq=False)
class LorentzElement:
    matrix: np.ndarray

    def __post_init__(self):
        m = np.array(self.matrix, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise DimensionError(f'Lorentz elements are square matrices, got shape {m.shape}.')
        if not is_lorentz(m):
            raise LorentzError(f'Matrix does not preserve the Minkowski metric (residual {lorentz_residual(m):.3g}).')
        m.setflags(write=False)
        object.__setattr__(self, 'matrix', m)

    @classmethod
    def identity(cls, n: int = 4) -> LorentzElement:
        return cls(np.eye(n))

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    def __matmul__(self, other: LorentzElement) -> LorentzElement:
        return LorentzElement(self.matrix @ other.matrix)

    def inverse(self) -> LorentzElement:
        eta = minkowski_metric(self.n)
        return LorentzElement(eta @ self.matrix.T @ eta)

    def act(self, u) -> np.ndarray:
        return self.matrix @ np.asarray(u, dtype=float)


def _as_lorentz(g) -> LorentzElement:
    return g if isinstance(g, LorentzElement) else LorentzElement(g)


def _algebra_element(basis: list[np.ndarray], rng: np.random.Generator, scale: float) -> np.ndarray:
    coeffs = rng.standard_normal(len(basis)) * scale
    return sum(c * b for c, b in zip(coeffs, basis))


def random_lorentz(rng: np.random.Generator, n: int = 4, scale: float = 1.0) -> LorentzElement:
    """exp of a random o(1, n−1) element; lands in the identity component."""
    return LorentzElement(expm(_algebra_element(lorentz_algebra_basis(n), rng, scale)))


def _check_sigma(sigma0) -> np.ndarray:
    sigma0 = np.asarray(sigma0, dtype=float)
    if sigma0.ndim != 2 or sigma0.shape[0] != sigma0.shape[1]:
        raise DimensionError(f'sigma0 must be square, got shape {sigma0.shape}.')
    return sigma0


def orbit_point(g, sigma0) -> np.ndarray:
    """Λσ₀Λᵀ, antisymmetrized so the result is exactly antisymmetric."""
    g = _as_lorentz(g)
    sigma0 = _check_sigma(sigma0)
    if sigma0.shape[0] != g.n:
        raise DimensionError(f'sigma0 is {sigma0.shape[0]}-dimensional, Lorentz element is {g.n}-dimensional.')
    moved = g.matrix @ sigma0 @ g.matrix.T
    return 0.5 * (moved - moved.T)


def _linearized_action(sigma0: np.ndarray) -> tuple[np.ndarray, list[np.ndarray]]:
    basis = lorentz_algebra_basis(sigma0.shape[0])
    columns = [(a @ sigma0 + sigma0 @ a.T).reshape(-1) for a in basis]
    return np.stack(columns, axis=1), basis


def stabilizer_algebra_basis(sigma0, rcond: float = 1e-10) -> list[np.ndarray]:
    """Basis of {A ∈ o(1, n−1) : Aσ₀ + σ₀Aᵀ = 0}."""
    constraint, basis = _linearized_action(_check_sigma(sigma0))
    kernel = null_space(constraint, rcond=rcond)
    return [sum(c * b for c, b in zip(col, basis)) for col in kernel.T]


def stabilizer_algebra_dim(sigma0) -> int:
    return len(stabilizer_algebra_basis(sigma0))


def random_stabilizer_element(sigma0, rng: np.random.Generator, scale: float = 1.0) -> LorentzElement:
    basis = stabilizer_algebra_basis(sigma0)
    n = np.asarray(sigma0).shape[0]
    if not basis:
        return LorentzElement.identity(n)
    return LorentzElement(expm(_algebra_element(basis, rng, scale)))


def stabilizer_residual(h, sigma0) -> float:
    sigma0 = _check_sigma(sigma0)
    h = np.asarray(h.matrix if isinstance(h, LorentzElement) else h, dtype=float)
    scale = max(1.0, float(np.linalg.norm(sigma0, 2))) * max(1.0, float(np.linalg.norm(h, 2)) ** 2)
    return float(np.abs(h @ sigma0 @ h.T - sigma0).max()) / scale


def orbit_tangent_rank(sigma0, at=None, step: float = 1e-6, rtol: float = 1e-4) -> int:
    """Local dimension of the orbit through Λσ₀Λᵀ, from finite differences of the orbit map.

    Independent of the null-space computation in :func:`stabilizer_algebra_basis`;
    the two add up to dim o(1, n−1).
    """
    sigma0 = _check_sigma(sigma0)
    n = sigma0.shape[0]
    at = LorentzElement.identity(n) if at is None else _as_lorentz(at)
    center = orbit_point(at, sigma0)
    columns = []
    for a in lorentz_algebra_basis(n):
        moved = orbit_point(LorentzElement(expm(step * a) @ at.matrix), sigma0)
        columns.append(((moved - center) / step)[np.triu_indices(n, 1)])
    sv = np.linalg.svd(np.stack(columns, axis=1), compute_uv=False)
    if sv.size == 0 or sv[0] == 0.0:
        return 0
    return int(np.sum(sv > rtol * sv[0]))


def lorentz_scalar(sigma) -> float:
    """½σ^{μν}σ_{μν}, indices lowered with η."""
    sigma = _check_sigma(sigma)
    eta = minkowski_metric(sigma.shape[0])
    return 0.5 * float(np.sum(sigma * (eta @ sigma @ eta)))


def pfaffian(a) -> float:
    a = np.asarray(a, dtype=float)
    n = a.shape[0]
    if n % 2:
        return 0.0
    if n == 0:
        return 1.0
    total = 0.0
    for j in range(1, n):
        if a[0, j] == 0.0:
            continue
        keep = [k for k in range(n) if k not in (0, j)]
        sign = 1.0 if j % 2 == 1 else -1.0
        total += sign * a[0, j] * pfaffian(a[np.ix_(keep, keep)])
    return total


@dataclass
class OrbitSample:
    sigma0: np.ndarray
    elements: list = field(default_factory=list)
    points: list = field(default_factory=list)

    def ranks(self, rtol: float | None = None) -> list[int]:
        return [PoissonVectorSpace(p.shape[0], p).rank(rtol) for p in self.points]

    def invariant_rows(self) -> list[dict]:
        rows = []
        ranks = self.ranks()
        for i, (g, p) in enumerate(zip(self.elements, self.points)):
            rows.append({
                'index': i,
                'rank': ranks[i],
                'lorentz_scalar': lorentz_scalar(p),
                'pfaffian_abs': abs(pfaffian(p)),
                'lorentz_residual': lorentz_residual(g.matrix),
            })
        return rows


def sample_orbit(sigma0, k: int, seed: int = 0, scale: float = 1.0) -> OrbitSample:
    """k orbit points; point 0 is σ₀ itself, point i uses the i-th spawned RNG stream."""
    sigma0 = _check_sigma(sigma0)
    if k < 1:
        raise DimensionError('An orbit sample needs at least one point.')
    n = sigma0.shape[0]
    streams = np.random.SeedSequence(seed).spawn(k)
    elements = [LorentzElement.identity(n)]
    for i in range(1, k):
        elements.append(random_lorentz(np.random.default_rng(streams[i]), n, scale))
    sample = OrbitSample(sigma0, elements, [orbit_point(g, sigma0) for g in elements])
    logger.debug('Sampled %d orbit points of a %d-dimensional sigma0', k, n)
    return sample


def _bundle_over(points: list[np.ndarray], neighbors: int) -> PoissonBundle:
    n = points[0].shape[0]
    iu = np.triu_indices(n, 1)
    ids = [f'o{i}' for i in range(len(points))]
    base = BaseSpace.sampled(np.array([p[iu] for p in points]), ids, k=neighbors)
    bundle = PoissonBundle(base, n, dict(zip(ids, points)))
    ranks = set(bundle.ranks().values())
    if len(ranks) > 1:
        logger.warning('Orbit bundle has non-constant fiber rank: %s', sorted(ranks))
        raise RankError(f'Fiber ranks along the orbit are not constant: {sorted(ranks)}.')
    return bundle


def orbit_bundle(sigma0, k: int, seed: int = 0, scale: float = 1.0, neighbors: int = 2) -> PoissonBundle:
    """Tautological bundle: the fiber over the orbit point σ carries σ itself."""
    return _bundle_over(sample_orbit(sigma0, k, seed, scale).points, neighbors)


def trivialization(g, u0, sigma0) -> tuple[np.ndarray, np.ndarray]:
    """[g, u₀] ↦ (gσ₀gᵀ, g·u₀)."""
    g = _as_lorentz(g)
    return orbit_point(g, sigma0), g.act(u0)


def trivialization_consistency(g, h, u0, sigma0=None, tol: float = 1e-10) -> bool:
    """Whether [g, u₀] and [gh, h⁻¹u₀] have the same image under :func:`trivialization`."""
    sigma0 = dfr_sigma0() if sigma0 is None else _check_sigma(sigma0)
    g, h = _as_lorentz(g), _as_lorentz(h)
    residual = stabilizer_residual(h, sigma0)
    if residual > tol:
        raise StabilizerError(f'h does not stabilize sigma0 (residual {residual:.3g}).')
    u0 = np.asarray(u0, dtype=float)
    s1, v1 = trivialization(g, u0, sigma0)
    s2, v2 = trivialization(g @ h, h.inverse().act(u0), sigma0)
    scale = max(1.0, float(np.linalg.norm(g.matrix, 2)) ** 2, float(np.abs(s1).max()))
    same_coset = float(np.abs(s1 - s2).max()) <= tol * scale
    same_vector = float(np.abs(v1 - v2).max()) <= tol * max(1.0, float(np.abs(v1).max()))
    return bool(same_coset and same_vector)


@dataclass(frozen=True, eq=False)
class TangentDfrData:
    metric: np.ndarray
    frame: np.ndarray  # columns e_μ with Eᵀ g E = η
    sigma: np.ndarray

    def pvs(self) -> PoissonVectorSpace:
        return PoissonVectorSpace(self.sigma.shape[0], self.sigma)


def _metric_signature(metric: np.ndarray) -> tuple[int, int]:
    eig = np.linalg.eigvalsh(metric)
    scale = max(1.0, float(np.abs(eig).max()))
    return int(np.sum(eig > 1e-12 * scale)), int(np.sum(eig < -1e-12 * scale))


def _gram_schmidt(metric: np.ndarray, candidates: np.ndarray, eta: np.ndarray) -> np.ndarray | None:
    n = metric.shape[0]
    frame = np.zeros((n, n))
    scale = max(1.0, float(np.abs(metric).max()))
    for i in range(n):
        v = candidates[:, i].copy()
        for j in range(i):
            v -= eta[j, j] * (frame[:, j] @ metric @ v) * frame[:, j]
        norm = float(v @ metric @ v)
        if abs(norm) <= 1e-10 * scale * float(v @ v) or np.sign(norm) != eta[i, i]:
            return None
        frame[:, i] = v / np.sqrt(abs(norm))
    return frame


def lorentz_frame(metric) -> np.ndarray:
    """E with Eᵀ g E = η, by Gram–Schmidt against g."""
    metric = np.asarray(metric, dtype=float)
    n = metric.shape[0]
    if metric.ndim != 2 or metric.shape != (n, n):
        raise DimensionError(f'Metric must be square, got shape {metric.shape}.')
    if not np.allclose(metric, metric.T, rtol=0.0, atol=1e-12 * max(1.0, float(np.abs(metric).max()))):
        raise DimensionError('Metric must be symmetric.')
    pos, neg = _metric_signature(metric)
    if (pos, neg) != (1, n - 1):
        raise SignatureError(f'Metric has signature ({pos},{neg}), expected (1,{n - 1}).')
    eta = minkowski_metric(n)
    frame = _gram_schmidt(metric, np.eye(n), eta)
    if frame is None:
        eig, vecs = np.linalg.eigh(metric)
        order = np.argsort(-eig)
        frame = _gram_schmidt(metric, vecs[:, order], eta)
    return frame


def tangent_dfr_data(metric, sigma0=None) -> TangentDfrData:
    """σ₀ written in a g-orthonormal frame of one tangent space."""
    metric = np.asarray(metric, dtype=float)
    sigma0 = dfr_sigma0() if sigma0 is None else _check_sigma(sigma0)
    if sigma0.shape != metric.shape:
        raise DimensionError(f'sigma0 shape {sigma0.shape} does not match metric shape {metric.shape}.')
    frame = lorentz_frame(metric)
    moved = frame @ sigma0 @ frame.T
    return TangentDfrData(metric, frame, 0.5 * (moved - moved.T))


def tangent_orbit_bundle(metric, sigma0=None, k: int = 8, seed: int = 0, scale: float = 1.0,
                         neighbors: int = 2) -> PoissonBundle:
    """Sampled fiber of the tangent-space DFR construction at one point of spacetime."""
    data = tangent_dfr_data(metric, sigma0)
    sigma0 = dfr_sigma0() if sigma0 is None else _check_sigma(sigma0)
    sample = sample_orbit(sigma0, k, seed, scale)
    points = []
    for p in sample.points:
        moved = data.frame @ p @ data.frame.T
        points.append(0.5 * (moved - moved.T))
    return _bundle_over(points, neighbors)
