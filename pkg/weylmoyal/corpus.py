"""Seeded test functions shared by the experiment commands and the test suite."""
from __future__ import annotations

import numpy as np

from weylmoyal.errors import DimensionError
from weylmoyal.functions import GridFunction, GridSpec, PlaneWaveSum, make_gaussian

GAUSSIAN = 'gaussian'
PLANEWAVE = 'planewave'
CORPORA = (GAUSSIAN, PLANEWAVE)


def gaussian_corpus(spec: GridSpec, count: int = 10, seed: int = 0, max_offset: float | None = None,
                    widths=(0.8, 1.25)) -> list[GridFunction]:
    """Gaussians with unit-modulus amplitudes, centers within ``max_offset`` of the origin.

    The first member is always the centered unit Gaussian.
    """
    if count < 1:
        raise DimensionError('A corpus needs at least one function.')
    rng = np.random.default_rng(seed)
    if max_offset is None:
        max_offset = spec.L / 8.0
    out = [make_gaussian(spec)]
    for _ in range(count - 1):
        center = rng.uniform(-max_offset, max_offset, spec.n)
        w = rng.uniform(widths[0], widths[1], spec.n)
        phase = np.exp(2j * np.pi * rng.uniform())
        out.append(make_gaussian(spec, center, w, phase))
    return out


def lattice_frequency(spec: GridSpec, rng: np.random.Generator, kmax: int = 3) -> np.ndarray:
    return rng.integers(-kmax, kmax + 1, spec.n) * spec.dual_cell


def planewave_corpus(spec: GridSpec, count: int = 10, seed: int = 0, kmax: int = 3) -> list[PlaneWaveSum]:
    """Single phase functions e_ξ with ξ on the dual lattice of ``spec``; e_0 comes first."""
    rng = np.random.default_rng(seed)
    out = [PlaneWaveSum.unit(spec.n)]
    for _ in range(count - 1):
        out.append(PlaneWaveSum.phase(lattice_frequency(spec, rng, kmax)))
    return out


def random_planewave_sum(rng: np.random.Generator, n: int, terms: int = 3, kmax: int = 3,
                         cell: float = 1.0) -> PlaneWaveSum:
    """Σ c_j e_{ξ_j} with integer frequencies scaled by ``cell`` and complex normal coefficients."""
    freqs = rng.integers(-kmax, kmax + 1, (terms, n)) * cell
    coeffs = rng.standard_normal(terms) + 1j * rng.standard_normal(terms)
    return PlaneWaveSum(n, coeffs, freqs)


def mixed_cases(spec: GridSpec, count: int = 20, seed: int = 0, kmax: int = 2) -> list[tuple[PlaneWaveSum, GridFunction]]:
    """(plane-wave sum, Gaussian) pairs with lattice frequencies, for the grid calculus identities."""
    rng = np.random.default_rng(seed)
    gaussians = gaussian_corpus(spec, count, seed, widths=(0.9, 1.2))
    out = []
    for g in gaussians:
        terms = int(rng.integers(1, 3))
        pw = PlaneWaveSum(
            spec.n,
            rng.standard_normal(terms) + 1j * rng.standard_normal(terms),
            rng.integers(-kmax, kmax + 1, (terms, spec.n)) * spec.dual_cell,
        )
        out.append((pw, g))
    return out


def load_corpus(name: str, spec: GridSpec, count: int, seed: int):
    if name == GAUSSIAN:
        return gaussian_corpus(spec, count, seed)
    if name == PLANEWAVE:
        return planewave_corpus(spec, count, seed)
    raise DimensionError(f'Unknown corpus {name!r}; expected one of {CORPORA}.')
