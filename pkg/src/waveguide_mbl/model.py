"""Geometry sampling and effective spin-model construction.

Internal units throughout: the single-atom waveguide decay rate and the
guided-mode wavenumber are both 1, so times are measured in inverse decay
rates and lengths in inverse wavenumbers.

Four model variants are supported. The open variants carry a complex
symmetric coupling kernel ``K = H_herm - (i/2) Gamma`` whose Hermitian
part mediates coherent excitation exchange and whose decay matrix
``Gamma`` factorizes over the waveguide propagation directions (rank 2
for the bi-directional waveguide, rank 1 once a mirror closes one end).
The Hermitian variants keep only the coherent part.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
import scipy.sparse as sp

from . import _kernels
from .basis import RestrictedBasis
from .errors import CapacityError, DomainError, NumericalError
from .rng import STREAM_GEOMETRY, substream

GAMMA_1D = 1.0
K_1D = 1.0
DEFAULT_SPACING = 2.7 * math.pi
EIGENVALUE_CLAMP = 1e-10

# Default nonzero budget for sector Hamiltonians (~3.2 GB of complex data).
DEFAULT_MAX_NNZ = 200_000_000


class WaveguideVariant(str, Enum):
    FULL_OPEN = "full-open"
    HALF_OPEN = "half-open"
    FULL_HERMITIAN = "full-hermitian"
    HALF_HERMITIAN = "half-hermitian"

    @property
    def is_open(self) -> bool:
        return self in (WaveguideVariant.FULL_OPEN, WaveguideVariant.HALF_OPEN)

    @property
    def is_half(self) -> bool:
        return self in (WaveguideVariant.HALF_OPEN, WaveguideVariant.HALF_HERMITIAN)

    @property
    def hermitian_counterpart(self) -> "WaveguideVariant":
        if self.is_half:
            return WaveguideVariant.HALF_HERMITIAN
        return WaveguideVariant.FULL_HERMITIAN


@dataclass(frozen=True)
class DisorderSpec:
    """Position disorder: offsets drawn uniformly from [-width/2, width/2].

    ``width = 1`` is full disorder, ``width = 0`` an ordered chain. The
    (seed, realization) pair addresses one reproducible offset stream.
    """

    width: float = 1.0
    seed: int = 0
    realization: int = 0

    def __post_init__(self):
        if not 0.0 <= self.width <= 1.0:
            raise DomainError(f"disorder width {self.width} outside [0, 1]")

    @classmethod
    def full(cls, seed: int, realization: int = 0) -> "DisorderSpec":
        return cls(width=1.0, seed=seed, realization=realization)

    @classmethod
    def ordered(cls) -> "DisorderSpec":
        return cls(width=0.0, seed=0, realization=0)


@dataclass(frozen=True)
class Geometry:
    """Atom positions along the waveguide, in units of 1/k_1D."""

    n_atoms: int
    spacing: float
    positions: np.ndarray

    def __post_init__(self):
        z = np.asarray(self.positions, dtype=np.float64)
        if z.shape != (self.n_atoms,):
            raise DomainError(f"expected {self.n_atoms} positions, got shape {z.shape}")
        if np.any(np.diff(z) < 0):
            raise DomainError("positions must be sorted ascending")
        object.__setattr__(self, "positions", z)


def sample_positions(n_atoms: int, spacing: float, disorder: DisorderSpec) -> Geometry:
    """Positions z_i = (i + eps_i) * spacing for i = 1..n_atoms.

    Indexing starts at 1 so every atom sits strictly to the right of the
    mirror plane of the half-waveguide variants.
    """
    if n_atoms < 1:
        raise DomainError(f"n_atoms must be >= 1, got {n_atoms}")
    idx = np.arange(1, n_atoms + 1, dtype=np.float64)
    if disorder.width > 0.0:
        rng = substream(disorder.seed, STREAM_GEOMETRY, disorder.realization)
        eps = rng.uniform(-0.5 * disorder.width, 0.5 * disorder.width, size=n_atoms)
    else:
        eps = np.zeros(n_atoms)
    # |eps| <= 1/2 keeps (i + eps_i) monotone up to exact ties; sorting is
    # a no-op almost surely but guarantees the Geometry invariant.
    z = np.sort((idx + eps) * spacing)
    return Geometry(n_atoms=n_atoms, spacing=spacing, positions=z)


@dataclass(frozen=True)
class JumpChannel:
    rate: float
    weights: np.ndarray  # complex per site


@dataclass(frozen=True)
class ModelMatrices:
    """Coupling kernel, decay matrix and canonical jump channels."""

    kernel: np.ndarray  # complex symmetric (N, N)
    gamma: np.ndarray  # real symmetric PSD (N, N)
    jump_ops: tuple[JumpChannel, ...]
    variant: WaveguideVariant
    gamma_1d: float = GAMMA_1D

    @property
    def n_atoms(self) -> int:
        return self.kernel.shape[0]

    def hermitian_part(self) -> np.ndarray:
        return 0.5 * (self.kernel + self.kernel.conj().T)


def jump_decomposition(gamma: np.ndarray, clamp: float = EIGENVALUE_CLAMP) -> tuple[JumpChannel, ...]:
    """Canonical Lindblad channels from the eigendecomposition of Gamma.

    Eigenvalues below ``clamp * Gamma_1D`` are dropped; anything more
    negative than the clamp signals a construction bug and raises.
    """
    g = np.asarray(gamma, dtype=np.float64)
    if g.ndim != 2 or g.shape[0] != g.shape[1]:
        raise DomainError(f"gamma must be square, got shape {g.shape}")
    if not np.allclose(g, g.T, atol=1e-12):
        raise DomainError("gamma must be symmetric")
    vals, vecs = np.linalg.eigh(g)
    threshold = clamp * GAMMA_1D
    if vals[0] < -threshold:
        raise NumericalError(
            f"decay matrix has negative eigenvalue {vals[0]:.3e}; model construction bug"
        )
    channels = []
    for lam, v in zip(vals[::-1], vecs.T[::-1]):
        if lam > threshold:
            channels.append(JumpChannel(rate=float(lam), weights=v.astype(np.complex128)))
    return tuple(channels)


def build_model(geom: Geometry, variant: WaveguideVariant) -> ModelMatrices:
    """Effective kernel, decay matrix and jump channels for a geometry."""
    z = geom.positions
    if variant.is_half and np.any(z <= 0.0):
        raise DomainError("half-waveguide variants require strictly positive positions")
    dz = K_1D * np.abs(z[:, None] - z[None, :])
    if variant is WaveguideVariant.FULL_OPEN:
        kernel = -0.5j * GAMMA_1D * np.exp(1j * dz)
        gamma = GAMMA_1D * np.cos(dz)
    elif variant is WaveguideVariant.HALF_OPEN:
        zs = K_1D * (z[:, None] + z[None, :])
        kernel = -0.5j * GAMMA_1D * (np.exp(1j * dz) - np.exp(1j * zs))
        gamma = GAMMA_1D * (np.cos(dz) - np.cos(zs))
    elif variant is WaveguideVariant.FULL_HERMITIAN:
        kernel = (0.5 * GAMMA_1D * np.sin(dz)).astype(np.complex128)
        gamma = np.zeros_like(dz)
    elif variant is WaveguideVariant.HALF_HERMITIAN:
        zs = K_1D * (z[:, None] + z[None, :])
        kernel = (0.5 * GAMMA_1D * (np.sin(dz) - np.sin(zs))).astype(np.complex128)
        gamma = np.zeros_like(dz)
    else:  # pragma: no cover
        raise DomainError(f"unknown variant {variant}")
    jump_ops = jump_decomposition(gamma) if variant.is_open else ()
    return ModelMatrices(kernel=kernel, gamma=gamma, jump_ops=jump_ops, variant=variant)


@dataclass(frozen=True)
class AncillaSpec:
    """A non-radiating ancilla exchanging excitations with one chain atom.

    The ancilla is appended as the last atom index of the combined system;
    ``attach_site`` is the 0-indexed chain atom it couples to (default the
    third atom from the mirror).
    """

    coupling: float = 0.5 * GAMMA_1D
    attach_site: int = 2


def attach_ancilla(model: ModelMatrices, spec: AncillaSpec) -> ModelMatrices:
    """Extend a chain model by one ancilla atom decoupled from the waveguide."""
    n = model.n_atoms
    if not 0 <= spec.attach_site < n:
        raise DomainError(f"attach_site {spec.attach_site} outside 0..{n - 1}")
    kernel = np.zeros((n + 1, n + 1), dtype=np.complex128)
    kernel[:n, :n] = model.kernel
    kernel[n, spec.attach_site] = spec.coupling
    kernel[spec.attach_site, n] = spec.coupling
    gamma = np.zeros((n + 1, n + 1), dtype=np.float64)
    gamma[:n, :n] = model.gamma
    jump_ops = tuple(
        JumpChannel(rate=ch.rate, weights=np.concatenate([ch.weights, [0.0 + 0.0j]]))
        for ch in model.jump_ops
    )
    return ModelMatrices(kernel=kernel, gamma=gamma, jump_ops=jump_ops, variant=model.variant)


@dataclass(frozen=True)
class SectorOperator:
    """Sparse many-body operator lifted from an N x N kernel onto a basis."""

    matrix: sp.csr_matrix
    basis: RestrictedBasis

    def sector_block(self, k: int) -> sp.csr_matrix:
        a, b = self.basis.sector_range(k)
        return self.matrix[a:b, a:b]


def estimate_hamiltonian_nnz(basis: RestrictedBasis) -> int:
    n = basis.n_atoms
    total = 0
    for k in range(basis.n_max + 1):
        if k == 0:
            continue
        total += basis.sector_dim(k) * (1 + k * (n - k))
    return total


def sector_hamiltonian(
    model: ModelMatrices, basis: RestrictedBasis, max_nnz: int = DEFAULT_MAX_NNZ
) -> SectorOperator:
    """Lift the kernel to sum_ij K[i,j] sigma_eg^i sigma_ge^j on the basis.

    The result is block diagonal over excitation sectors; the k = 1 block
    is the kernel itself.
    """
    if basis.n_atoms != model.n_atoms:
        raise DomainError(
            f"basis has {basis.n_atoms} atoms but model has {model.n_atoms}"
        )
    nnz = estimate_hamiltonian_nnz(basis)
    if nnz > max_nnz:
        raise CapacityError(
            f"sector Hamiltonian needs {nnz} nonzeros, budget is {max_nnz}"
        )
    kernel = np.ascontiguousarray(model.kernel, dtype=np.complex128)
    rows, cols, vals = _kernels.hamiltonian_coo(
        basis.patterns, basis.comb, basis.sector_offsets, kernel, np.int64(basis.n_atoms)
    )
    mat = sp.coo_matrix((vals, (rows, cols)), shape=(basis.dim, basis.dim)).tocsr()
    return SectorOperator(matrix=mat, basis=basis)


# -- JSON serialization (debugging / cross-implementation comparison) --------


def geometry_to_dict(geom: Geometry) -> dict:
    return {
        "n_atoms": geom.n_atoms,
        "spacing": geom.spacing,
        "positions": geom.positions.tolist(),
    }


def geometry_from_dict(d: dict) -> Geometry:
    return Geometry(
        n_atoms=int(d["n_atoms"]),
        spacing=float(d["spacing"]),
        positions=np.asarray(d["positions"], dtype=np.float64),
    )


def model_to_dict(model: ModelMatrices) -> dict:
    return {
        "variant": model.variant.value,
        "gamma_1d": model.gamma_1d,
        "kernel_real": model.kernel.real.tolist(),
        "kernel_imag": model.kernel.imag.tolist(),
        "gamma": model.gamma.tolist(),
        "jump_ops": [
            {
                "rate": ch.rate,
                "weights_real": ch.weights.real.tolist(),
                "weights_imag": ch.weights.imag.tolist(),
            }
            for ch in model.jump_ops
        ],
    }


def model_from_dict(d: dict) -> ModelMatrices:
    kernel = np.asarray(d["kernel_real"], dtype=np.float64) + 1j * np.asarray(
        d["kernel_imag"], dtype=np.float64
    )
    jump_ops = tuple(
        JumpChannel(
            rate=float(ch["rate"]),
            weights=np.asarray(ch["weights_real"], dtype=np.float64)
            + 1j * np.asarray(ch["weights_imag"], dtype=np.float64),
        )
        for ch in d["jump_ops"]
    )
    return ModelMatrices(
        kernel=kernel.astype(np.complex128),
        gamma=np.asarray(d["gamma"], dtype=np.float64),
        jump_ops=jump_ops,
        variant=WaveguideVariant(d["variant"]),
        gamma_1d=float(d["gamma_1d"]),
    )


def model_to_json(model: ModelMatrices) -> str:
    return json.dumps(model_to_dict(model), sort_keys=True)


def model_from_json(text: str) -> ModelMatrices:
    return model_from_dict(json.loads(text))
