"""Single-excitation eigenmode analysis of the effective spin models.

The coupling kernel is the single-excitation block of the many-body
Hamiltonian, so its eigendecomposition gives the collective modes
directly: the real part of each eigenvalue is the collective frequency
shift, minus twice the imaginary part is the collective decay rate.
Under position disorder the mid-spectrum modes localize (and turn dark),
while band-edge modes stay extended and bright.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, NumericalError
from .model import GAMMA_1D, DisorderSpec, ModelMatrices, WaveguideVariant, build_model, sample_positions

_RESIDUAL_TOL = 1e-10


@dataclass(frozen=True)
class ModeSet:
    """Eigenmodes sorted by collective frequency (ties by decay rate)."""

    eigenvalues: np.ndarray  # complex (N,)
    vectors: np.ndarray  # complex (N, N); column xi is mode xi, l2-normalized

    @property
    def n_modes(self) -> int:
        return self.eigenvalues.shape[0]

    @property
    def omega(self) -> np.ndarray:
        return self.eigenvalues.real

    @property
    def gamma(self) -> np.ndarray:
        return -2.0 * self.eigenvalues.imag


def single_excitation_modes(model: ModelMatrices) -> ModeSet:
    """Diagonalize the kernel and sort modes by frequency.

    Eigenvectors are l2-normalized (not biorthogonally), matching the
    amplitude maps and overlap matrices computed from them.
    """
    kernel = model.kernel
    hermitian = not model.variant.is_open
    if hermitian:
        vals, vecs = np.linalg.eigh(kernel.real)
        vals = vals.astype(np.complex128)
        vecs = vecs.astype(np.complex128)
    else:
        vals, vecs = np.linalg.eig(kernel)
        vecs = vecs / np.linalg.norm(vecs, axis=0, keepdims=True)
    gamma = -2.0 * vals.imag
    order = np.lexsort((np.arange(vals.size), gamma, vals.real))
    vals = vals[order]
    vecs = vecs[:, order]
    residual = np.linalg.norm(kernel @ vecs - vecs * vals[None, :], axis=0)
    if np.max(residual) > _RESIDUAL_TOL * max(1.0, np.linalg.norm(kernel)):
        raise NumericalError(
            f"eigenmode residual {np.max(residual):.3e} exceeds tolerance"
        )
    if np.min(-2.0 * vals.imag) < -1e-8 * GAMMA_1D:
        raise NumericalError("negative collective decay rate beyond tolerance")
    return ModeSet(eigenvalues=vals, vectors=vecs)


def mode_profile_map(modes: ModeSet) -> np.ndarray:
    """|c_j^xi| amplitude map; rows are atoms, columns are modes."""
    return np.abs(modes.vectors)


def participation_ratio(modes: ModeSet) -> np.ndarray:
    """Spatial extent proxy 1 / sum_j |c_j|^4 per mode, in [1, N]."""
    prof2 = np.abs(modes.vectors) ** 2
    return 1.0 / np.sum(prof2**2, axis=0)


def delocalized_fraction(modes: ModeSet, threshold: float = 0.5 * GAMMA_1D) -> float:
    """Fraction of modes with collective decay rate above ``threshold``."""
    return float(np.count_nonzero(modes.gamma > threshold) / modes.n_modes)


@dataclass(frozen=True)
class SpectrumCurves:
    """Disorder-averaged eigenvalue curves vs mode index."""

    omega_mean: np.ndarray
    omega_stderr: np.ndarray
    gamma_mean: np.ndarray
    gamma_stderr: np.ndarray
    n_realizations: int


def disorder_averaged_spectrum(
    n_atoms: int,
    spacing: float,
    disorder_width: float,
    n_realizations: int,
    seed: int,
    variant: WaveguideVariant = WaveguideVariant.FULL_OPEN,
) -> SpectrumCurves:
    """Average omega_xi and gamma_xi over disorder realizations."""
    if n_realizations < 1:
        raise DomainError("need at least one realization")
    omegas = np.empty((n_realizations, n_atoms))
    gammas = np.empty((n_realizations, n_atoms))
    for r in range(n_realizations):
        spec = DisorderSpec(width=disorder_width, seed=seed, realization=r)
        geom = sample_positions(n_atoms, spacing, spec)
        modes = single_excitation_modes(build_model(geom, variant))
        omegas[r] = modes.omega
        gammas[r] = modes.gamma
    denom = np.sqrt(max(n_realizations - 1, 1) * n_realizations)
    return SpectrumCurves(
        omega_mean=omegas.mean(axis=0),
        omega_stderr=omegas.std(axis=0, ddof=1) / np.sqrt(n_realizations)
        if n_realizations > 1
        else np.zeros(n_atoms),
        gamma_mean=gammas.mean(axis=0),
        gamma_stderr=gammas.std(axis=0, ddof=1) / np.sqrt(n_realizations)
        if n_realizations > 1
        else np.zeros(n_atoms),
        n_realizations=n_realizations,
    )


def mean_delocalized_fraction(
    n_atoms: int,
    spacing: float,
    disorder_width: float,
    n_realizations: int,
    seed: int,
    variant: WaveguideVariant = WaveguideVariant.FULL_OPEN,
) -> tuple[float, float]:
    """Disorder-averaged delocalized fraction and its standard error."""
    fractions = np.empty(n_realizations)
    for r in range(n_realizations):
        spec = DisorderSpec(width=disorder_width, seed=seed, realization=r)
        geom = sample_positions(n_atoms, spacing, spec)
        fractions[r] = delocalized_fraction(single_excitation_modes(build_model(geom, variant)))
    stderr = fractions.std(ddof=1) / np.sqrt(n_realizations) if n_realizations > 1 else 0.0
    return float(fractions.mean()), float(stderr)


def delocalized_fraction_scaling(
    n_atoms_list: list[int],
    spacing: float,
    disorder_width: float,
    n_realizations: int,
    seed: int,
) -> dict:
    """Power-law fit of the delocalized fraction vs atom number.

    Returns the per-size fractions and the slope of log(fraction) vs
    log(N); extended modes thin out roughly like 1/sqrt(N).
    """
    fractions = []
    stderrs = []
    for i, n in enumerate(n_atoms_list):
        mean, stderr = mean_delocalized_fraction(
            n, spacing, disorder_width, n_realizations, seed + i
        )
        fractions.append(mean)
        stderrs.append(stderr)
    log_n = np.log(np.asarray(n_atoms_list, dtype=float))
    log_f = np.log(np.asarray(fractions))
    slope, intercept = np.polyfit(log_n, log_f, 1)
    return {
        "n_atoms": list(n_atoms_list),
        "fractions": fractions,
        "stderrs": stderrs,
        "exponent": float(slope),
        "prefactor": float(np.exp(intercept)),
        "n_realizations": n_realizations,
    }


def overlap_matrix(model_open: ModelMatrices, model_hermitian: ModelMatrices) -> np.ndarray:
    """|<open mode xi | Hermitian mode xi'>| for one shared geometry.

    Rows follow the sorted open-model spectrum, columns the sorted
    Hermitian spectrum. Each row has unit sum of squares because the
    Hermitian eigenbasis is complete and orthonormal.
    """
    if model_open.n_atoms != model_hermitian.n_atoms:
        raise DomainError("models must share one geometry")
    open_modes = single_excitation_modes(model_open)
    herm_modes = single_excitation_modes(model_hermitian)
    return np.abs(open_modes.vectors.conj().T @ herm_modes.vectors)
