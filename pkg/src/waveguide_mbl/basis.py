"""Excitation-restricted Fock space for chains of two-level atoms.

A :class:`RestrictedBasis` enumerates every occupation pattern of
``n_atoms`` two-level atoms with at most ``n_max`` excitations, ordered by
excitation number and then by pattern value. Each fixed-excitation sector
therefore occupies one contiguous index range, which makes sector-block
algorithms (partial traces, jump bookkeeping, block propagation) plain
index arithmetic.

Patterns are plain ints used as bitsets: bit ``i`` set means atom ``i``
is excited. Ranking uses the combinatorial number system with precomputed
binomial tables, so rank/unrank are O(n_atoms) without hash maps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from . import _kernels
from .errors import CapacityError, DomainError

MAX_ATOMS = 34
# One complex state vector of this length is ~1.6 GB; anything bigger is
# out of reach for the dense/Krylov machinery used here.
DEFAULT_MAX_DIM = 100_000_000


def binomial_table(n: int) -> np.ndarray:
    """Pascal triangle C(p, k) for 0 <= p, k <= n as int64."""
    comb = np.zeros((n + 1, n + 1), dtype=np.int64)
    for p in range(n + 1):
        comb[p, 0] = 1
        for k in range(1, p + 1):
            comb[p, k] = comb[p - 1, k - 1] + comb[p - 1, k]
    return comb


class RestrictedBasis:
    """Occupation basis with at most ``n_max`` excitations.

    Attributes
    ----------
    n_atoms, n_max : int
    dim : int
        Sum of C(n_atoms, k) for k = 0..n_max.
    patterns : int64 array of shape (dim,)
        Pattern of every basis index, in basis order.
    sector_offsets : int64 array of shape (n_max + 2,)
        ``sector_offsets[k]`` is the first index of the k-excitation
        sector; the last entry equals ``dim``.
    """

    def __init__(self, n_atoms: int, n_max: int, max_dim: int = DEFAULT_MAX_DIM):
        if not (1 <= n_max <= n_atoms <= MAX_ATOMS):
            raise DomainError(
                f"need 1 <= n_max <= n_atoms <= {MAX_ATOMS}, got n_atoms={n_atoms}, n_max={n_max}"
            )
        dim = sum(math.comb(n_atoms, k) for k in range(n_max + 1))
        if dim > max_dim:
            raise CapacityError(
                f"basis dimension {dim} exceeds the budget of {max_dim} states"
            )
        self.n_atoms = int(n_atoms)
        self.n_max = int(n_max)
        self.dim = int(dim)
        self.comb = binomial_table(n_atoms)
        offsets = np.zeros(n_max + 2, dtype=np.int64)
        for k in range(n_max + 1):
            offsets[k + 1] = offsets[k] + math.comb(n_atoms, k)
        self.sector_offsets = offsets
        self.patterns = np.empty(dim, dtype=np.int64)
        filled = _kernels.fill_patterns(np.int64(n_atoms), np.int64(n_max), self.patterns)
        assert filled == dim

    def __repr__(self):
        return f"RestrictedBasis(n_atoms={self.n_atoms}, n_max={self.n_max}, dim={self.dim})"

    def rank(self, pattern: int) -> int:
        """Basis index of an occupation pattern."""
        p = int(pattern)
        if p < 0 or p >> self.n_atoms:
            raise DomainError(f"pattern {p:#x} has bits outside {self.n_atoms} atoms")
        if p.bit_count() > self.n_max:
            raise DomainError(
                f"pattern has {p.bit_count()} excitations, basis allows {self.n_max}"
            )
        return int(_kernels.rank_pattern(np.int64(p), self.comb, self.sector_offsets))

    def unrank(self, index: int) -> int:
        """Occupation pattern of a basis index."""
        if not 0 <= index < self.dim:
            raise DomainError(f"index {index} outside basis of dimension {self.dim}")
        return int(self.patterns[index])

    def sector_range(self, k: int) -> tuple[int, int]:
        """Half-open index interval [start, stop) of the k-excitation sector."""
        if not 0 <= k <= self.n_max:
            raise DomainError(f"sector {k} outside 0..{self.n_max}")
        return int(self.sector_offsets[k]), int(self.sector_offsets[k + 1])

    def sector_of_index(self, index: int) -> int:
        return int(np.searchsorted(self.sector_offsets, index, side="right") - 1)

    def sector_dim(self, k: int) -> int:
        a, b = self.sector_range(k)
        return b - a


def build_basis(n_atoms: int, n_max: int, max_dim: int = DEFAULT_MAX_DIM) -> RestrictedBasis:
    """Construct the restricted basis; see :class:`RestrictedBasis`."""
    return RestrictedBasis(n_atoms, n_max, max_dim=max_dim)


@dataclass
class StateVector:
    """Complex amplitudes over a :class:`RestrictedBasis`."""

    basis: RestrictedBasis
    amplitudes: np.ndarray

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def normalized(self) -> "StateVector":
        n = self.norm()
        if n == 0.0:
            raise DomainError("cannot normalize the zero vector")
        return StateVector(self.basis, self.amplitudes / n)

    def copy(self) -> "StateVector":
        return StateVector(self.basis, self.amplitudes.copy())


@dataclass
class DensityMatrix:
    """Dense density matrix over a :class:`RestrictedBasis`."""

    basis: RestrictedBasis
    matrix: np.ndarray

    def trace(self) -> float:
        return float(np.trace(self.matrix).real)

    def copy(self) -> "DensityMatrix":
        return DensityMatrix(self.basis, self.matrix.copy())


def zero_state(basis: RestrictedBasis) -> StateVector:
    return StateVector(basis, np.zeros(basis.dim, dtype=np.complex128))


def pattern_of_sites(sites: Iterable[int]) -> int:
    p = 0
    for s in sites:
        p |= 1 << int(s)
    return p


def prepare_product(excited_sites: Iterable[int], basis: RestrictedBasis) -> StateVector:
    """Unit basis state with the given atoms excited."""
    sites = sorted(int(s) for s in excited_sites)
    if len(sites) != len(set(sites)):
        raise DomainError(f"duplicate sites in {sites}")
    if sites and (sites[0] < 0 or sites[-1] >= basis.n_atoms):
        raise DomainError(f"sites {sites} outside 0..{basis.n_atoms - 1}")
    if len(sites) > basis.n_max:
        raise DomainError(
            f"{len(sites)} excitations exceed the basis cap of {basis.n_max}"
        )
    state = zero_state(basis)
    state.amplitudes[basis.rank(pattern_of_sites(sites))] = 1.0
    return state


def prepare_random_phase_superposition(
    allowed_sites: Iterable[int],
    k: int,
    rng: np.random.Generator,
    basis: RestrictedBasis,
) -> StateVector:
    """Equal-weight superposition with i.i.d. uniform phases.

    Every pattern placing exactly ``k`` excitations within
    ``allowed_sites`` receives amplitude exp(i phi)/sqrt(M), with M the
    number of such patterns; all other amplitudes are zero.
    """
    sites = sorted(int(s) for s in allowed_sites)
    if len(sites) != len(set(sites)):
        raise DomainError(f"duplicate sites in {sites}")
    if sites and (sites[0] < 0 or sites[-1] >= basis.n_atoms):
        raise DomainError(f"sites {sites} outside 0..{basis.n_atoms - 1}")
    if k < 0 or k > min(len(sites), basis.n_max):
        raise DomainError(
            f"cannot place {k} excitations on {len(sites)} sites with n_max={basis.n_max}"
        )
    state = zero_state(basis)
    if k == 0:
        state.amplitudes[0] = 1.0
        return state
    indices = [basis.rank(pattern_of_sites(c)) for c in _combinations(sites, k)]
    m = len(indices)
    phases = rng.uniform(0.0, 2.0 * np.pi, size=m)
    state.amplitudes[np.array(indices)] = np.exp(1j * phases) / math.sqrt(m)
    return state


def _combinations(items, k):
    import itertools

    return itertools.combinations(items, k)


def apply_transfer(i: int, j: int, state: StateVector) -> StateVector:
    """Apply the hop operator sigma_eg^i sigma_ge^j (number operator if i == j)."""
    basis = state.basis
    for s in (i, j):
        if not 0 <= s < basis.n_atoms:
            raise DomainError(f"site {s} outside 0..{basis.n_atoms - 1}")
    out = np.zeros_like(state.amplitudes)
    _kernels.transfer_apply(
        np.int64(i), np.int64(j), basis.patterns, basis.comb, basis.sector_offsets,
        state.amplitudes, out,
    )
    return StateVector(basis, out)


def apply_lowering(weights: np.ndarray, state: StateVector) -> StateVector:
    """Apply the weighted collective lowering operator sum_i w_i sigma_ge^i."""
    basis = state.basis
    w = np.asarray(weights, dtype=np.complex128)
    if w.shape != (basis.n_atoms,):
        raise DomainError(f"weights shape {w.shape} does not match {basis.n_atoms} atoms")
    out = np.zeros_like(state.amplitudes)
    _kernels.lowering_apply(
        w, np.int64(basis.n_atoms), basis.patterns, basis.comb, basis.sector_offsets,
        state.amplitudes, out,
    )
    return StateVector(basis, out)


def lowering_matrix(weights: np.ndarray, basis: RestrictedBasis):
    """Sparse CSR matrix of the weighted lowering operator.

    Used where explicit matrices are required (Liouvillian assembly);
    trajectory code applies jumps matrix-free via :func:`apply_lowering`.
    """
    import scipy.sparse as sp

    w = np.asarray(weights, dtype=np.complex128)
    if w.shape != (basis.n_atoms,):
        raise DomainError(f"weights shape {w.shape} does not match {basis.n_atoms} atoms")
    rows, cols, vals = _kernels.lowering_coo(
        w, np.int64(basis.n_atoms), basis.patterns, basis.comb, basis.sector_offsets
    )
    return sp.coo_matrix((vals, (rows, cols)), shape=(basis.dim, basis.dim)).tocsr()
