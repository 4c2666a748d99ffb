"""Observables evaluated on states of the restricted basis.

All populations are bare excited-state expectations per atom. The memory
parameter and the half-chain imbalance are the normalized transport
diagnostics; the half-chain entropy is the Schmidt entropy of a pure
state across a site cut, computed blockwise per left-excitation sector
(the cut splits each fixed-excitation sector into disjoint blocks, so a
full SVD is never needed for single-sector states).
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np

from . import _kernels
from .basis import DensityMatrix, RestrictedBasis, StateVector, build_basis
from .errors import DomainError

# Squared singular values below this are treated as exact zeros
# (the 0 * log 0 = 0 limit).
_SCHMIDT_CUTOFF = 1e-12
# Population below which the imbalance denominator is declared undefined.
IMBALANCE_FLOOR = 1e-12


def site_populations(state: StateVector | DensityMatrix) -> np.ndarray:
    """Per-atom excited population; sums to the total excitation number."""
    basis = state.basis
    out = np.zeros(basis.n_atoms)
    if isinstance(state, StateVector):
        _kernels.populations_accum(
            basis.patterns, state.amplitudes, np.int64(basis.n_atoms), out
        )
    else:
        diag = np.ascontiguousarray(np.diag(state.matrix).real)
        _kernels.populations_diag_accum(
            basis.patterns, diag, np.int64(basis.n_atoms), out
        )
    return out


def total_population(populations: np.ndarray) -> float:
    return float(np.sum(populations))


def memory_parameter(
    populations: np.ndarray, initial_sites: set[int] | list[int], n_atoms: int
) -> float:
    """Normalized retention of the initial excitation pattern.

    1 when the initial site populations are fully conserved, 0 when the
    excitation is shared equally by all atoms.
    """
    sites = sorted(int(s) for s in initial_sites)
    n_exc = len(sites)
    if n_exc == 0:
        raise DomainError("memory parameter needs a nonempty initial site set")
    if n_exc >= n_atoms:
        raise DomainError("memory parameter is undefined when every atom starts excited")
    retained = float(np.sum(populations[sites])) / n_exc
    density = n_exc / n_atoms
    return (retained - density) / (1.0 - density)


def left_half_sites(n_atoms: int) -> list[int]:
    """Sites of the left half; the extra site goes left for odd chains."""
    return list(range((n_atoms + 1) // 2))


def half_imbalance(populations: np.ndarray) -> float | None:
    """Left-right population imbalance normalized by the total population.

    Returns None when the total population is below the defined floor;
    file writers translate that into an explicit sentinel column.
    """
    n = populations.shape[0]
    total = float(np.sum(populations))
    if total < IMBALANCE_FLOOR:
        return None
    left = left_half_sites(n)
    right = [i for i in range(n) if i not in left]
    return float((np.sum(populations[left]) - np.sum(populations[right])) / total)


def ancilla_population(state: StateVector | DensityMatrix, ancilla_index: int) -> float:
    """Excited population of the ancilla atom."""
    return float(site_populations(state)[ancilla_index])


@lru_cache(maxsize=32)
def _side_basis(n_sites: int, n_max: int) -> RestrictedBasis:
    return build_basis(n_sites, min(n_max, n_sites))


def half_chain_entropy(state: StateVector, cut: int | None = None) -> float:
    """Von Neumann entropy (natural log) of the first ``cut`` atoms.

    The state must be pure and normalized. For states confined to a
    single excitation sector the Schmidt matrix is block diagonal over
    the left-excitation count, and singular values are collected per
    block; otherwise a dense Schmidt matrix is built.
    """
    basis = state.basis
    n = basis.n_atoms
    if cut is None:
        cut = (n + 1) // 2
    if not 1 <= cut <= n - 1:
        raise DomainError(f"cut {cut} outside 1..{n - 1}")
    norm = state.norm()
    if abs(norm - 1.0) > 1e-6:
        raise DomainError(f"state norm {norm} too far from 1 for an entropy")

    left = _side_basis(cut, basis.n_max)
    right = _side_basis(n - cut, basis.n_max)

    weights = np.abs(state.amplitudes) ** 2
    sector_weight = np.array(
        [
            weights[basis.sector_offsets[k] : basis.sector_offsets[k + 1]].sum()
            for k in range(basis.n_max + 1)
        ]
    )
    populated = np.nonzero(sector_weight > 1e-28)[0]
    if populated.size == 1:
        schmidt_sq = _single_sector_schmidt_sq(state, int(populated[0]), cut, left, right)
    else:
        schmidt_sq = _dense_schmidt_sq(state, cut, left, right)
    schmidt_sq = schmidt_sq[schmidt_sq > _SCHMIDT_CUTOFF]
    if schmidt_sq.size == 0:
        return 0.0
    return float(-np.sum(schmidt_sq * np.log(schmidt_sq)))


def _single_sector_schmidt_sq(
    state: StateVector, k: int, cut: int, left: RestrictedBasis, right: RestrictedBasis
) -> np.ndarray:
    basis = state.basis
    a, b = basis.sector_range(k)
    patterns = basis.patterns[a:b]
    amps = state.amplitudes[a:b]
    left_idx = np.empty(patterns.shape[0], dtype=np.int64)
    right_idx = np.empty(patterns.shape[0], dtype=np.int64)
    left_k = np.empty(patterns.shape[0], dtype=np.int64)
    _kernels.split_ranks(
        patterns, np.int64(cut), left.comb, left.sector_offsets,
        right.comb, right.sector_offsets, left_idx, right_idx, left_k,
    )
    schmidt_sq = []
    for kl in range(max(0, k - (basis.n_atoms - cut)), min(k, cut) + 1):
        sel = left_k == kl
        if not np.any(sel):
            continue
        la, lb = left.sector_range(kl)
        ra, rb = right.sector_range(k - kl)
        block = np.zeros((lb - la, rb - ra), dtype=np.complex128)
        block[left_idx[sel] - la, right_idx[sel] - ra] = amps[sel]
        s = np.linalg.svd(block, compute_uv=False)
        schmidt_sq.append(s**2)
    return np.concatenate(schmidt_sq) if schmidt_sq else np.zeros(0)


def _dense_schmidt_sq(
    state: StateVector, cut: int, left: RestrictedBasis, right: RestrictedBasis
) -> np.ndarray:
    basis = state.basis
    left_idx = np.empty(basis.dim, dtype=np.int64)
    right_idx = np.empty(basis.dim, dtype=np.int64)
    left_k = np.empty(basis.dim, dtype=np.int64)
    _kernels.split_ranks(
        basis.patterns, np.int64(cut), left.comb, left.sector_offsets,
        right.comb, right.sector_offsets, left_idx, right_idx, left_k,
    )
    matrix = np.zeros((left.dim, right.dim), dtype=np.complex128)
    matrix[left_idx, right_idx] = state.amplitudes
    s = np.linalg.svd(matrix, compute_uv=False)
    return s**2


def max_entropy_bound(basis: RestrictedBasis, cut: int) -> float:
    """ln of the smaller split dimension; upper bound for the entropy."""
    left = _side_basis(cut, basis.n_max)
    right = _side_basis(basis.n_atoms - cut, basis.n_max)
    return math.log(min(left.dim, right.dim))
