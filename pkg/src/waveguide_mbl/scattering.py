"""Single-photon scattering, transfer-matrix chains and localization lengths.

A single resonant two-level atom is a perfect mirror for guided light;
off resonance it is a partial scatterer with amplitudes r, t. Chains of
atoms multiply 2x2 transfer matrices interleaved with free-propagation
phases, and under position disorder the transmittance self-averages in
the log: mean log T = -N / N_loc with var(log T) = 2 N / N_loc.

The drive-dependent (saturated) localization length comes from the
steady-state optical Bloch equations: a strongly driven atom saturates,
stops reflecting, and the localization length diverges as the excited
population approaches 1/2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .model import GAMMA_1D, K_1D, DisorderSpec, Geometry, sample_positions

# Rescale transfer products when entries exceed this magnitude.
_RESCALE_LIMIT = 1e100


@dataclass(frozen=True)
class ScatterPoint:
    """Single-atom reflection/transmission at detuning ``delta``."""

    delta: float
    r: complex
    t: complex


def single_atom_rt(delta: float) -> ScatterPoint:
    """Lorentzian single-atom amplitudes r = -1/(1 - 2 i delta), t = 1 + r."""
    r = -GAMMA_1D / (GAMMA_1D - 2j * delta)
    return ScatterPoint(delta=float(delta), r=r, t=1.0 + r)


@dataclass(frozen=True)
class TransmittanceResult:
    """Chain transmittance; ``log_T`` stays finite deep in the localized regime."""

    T: float
    log_T: float
    rescaled: bool


def _atom_transfer(r: complex, t: complex) -> np.ndarray:
    return np.array([[(t * t - r * r) / t, r / t], [-r / t, 1.0 / t]], dtype=np.complex128)


def chain_transmittance(geom: Geometry, delta: float) -> TransmittanceResult:
    """Transmittance of the atom chain at detuning ``delta``.

    The product of per-atom transfer matrices and propagation phases is
    accumulated in rescaled form: whenever entries grow past ~1e100 the
    matrix is renormalized and the log magnitude tracked separately, so
    log T is finite for chains far longer than the localization length.
    """
    point = single_atom_rt(delta)
    if point.t == 0.0:
        # Resonant atoms are perfect mirrors; any chain blocks completely.
        return TransmittanceResult(T=0.0, log_T=-math.inf, rescaled=False)
    atom = _atom_transfer(point.r, point.t)
    z = geom.positions
    m = atom.copy()
    log_scale = 0.0
    rescaled = False
    for i in range(1, geom.n_atoms):
        phase = K_1D * (z[i] - z[i - 1])
        prop = np.array([[np.exp(1j * phase), 0.0], [0.0, np.exp(-1j * phase)]])
        m = atom @ prop @ m
        peak = np.max(np.abs(m))
        if peak > _RESCALE_LIMIT:
            m /= peak
            log_scale += math.log(peak)
            rescaled = True
    log_t = -2.0 * (math.log(abs(m[1, 1])) + log_scale)
    t_lin = math.exp(log_t) if log_t > -745.0 else 0.0
    return TransmittanceResult(T=t_lin, log_T=log_t, rescaled=rescaled)


def _batched_log_transmittance(positions: np.ndarray, delta: float) -> np.ndarray:
    """log T for a batch of chains; positions has shape (batch, n_atoms)."""
    point = single_atom_rt(delta)
    if point.t == 0.0:
        return np.full(positions.shape[0], -math.inf)
    atom = _atom_transfer(point.r, point.t)
    batch, n = positions.shape
    m = np.broadcast_to(atom, (batch, 2, 2)).copy()
    log_scale = np.zeros(batch)
    for i in range(1, n):
        phase = K_1D * (positions[:, i] - positions[:, i - 1])
        e = np.exp(1j * phase)
        # Left-multiply by diag(e, 1/e), then by the atom matrix.
        m[:, 0, :] *= e[:, None]
        m[:, 1, :] *= (1.0 / e)[:, None]
        m = atom[None, :, :] @ m
        peak = np.abs(m).max(axis=(1, 2))
        hot = peak > _RESCALE_LIMIT
        if np.any(hot):
            m[hot] /= peak[hot, None, None]
            log_scale[hot] += np.log(peak[hot])
    return -2.0 * (np.log(np.abs(m[:, 1, 1])) + log_scale)


@dataclass(frozen=True)
class AndersonStats:
    """Disorder statistics of log T with standard errors."""

    mean_log_t: float
    var_log_t: float
    stderr_mean: float
    stderr_var: float
    n_realizations: int


def anderson_statistics(
    n_atoms: int,
    spacing: float,
    disorder_width: float,
    delta: float,
    n_realizations: int,
    seed: int,
) -> AndersonStats:
    """Ensemble mean and variance of log T over position disorder."""
    if n_realizations < 1:
        raise DomainError("need at least one realization")
    positions = np.empty((n_realizations, n_atoms))
    for r in range(n_realizations):
        spec = DisorderSpec(width=disorder_width, seed=seed, realization=r)
        positions[r] = sample_positions(n_atoms, spacing, spec).positions
    log_t = _batched_log_transmittance(positions, delta)
    mean = float(np.mean(log_t))
    var = float(np.var(log_t, ddof=1)) if n_realizations > 1 else 0.0
    stderr_mean = math.sqrt(var / n_realizations) if n_realizations > 1 else 0.0
    if n_realizations > 1:
        centered = log_t - mean
        fourth = float(np.mean(centered**4))
        stderr_var = math.sqrt(max(fourth - var**2, 0.0) / n_realizations)
    else:
        stderr_var = 0.0
    return AndersonStats(
        mean_log_t=mean,
        var_log_t=var,
        stderr_mean=stderr_mean,
        stderr_var=stderr_var,
        n_realizations=n_realizations,
    )


@dataclass(frozen=True)
class LocalizationEstimate:
    """Localization length in units of atoms; inf marks delocalization."""

    n_loc: float
    regime: str  # "linear" or "saturated"


def n_loc_linear(delta: float) -> LocalizationEstimate:
    """Localization length 1/|log T(delta)| of the undriven chain."""
    if delta == 0.0:
        return LocalizationEstimate(n_loc=0.0, regime="linear")
    t = 4.0 * delta**2 / (GAMMA_1D**2 + 4.0 * delta**2)
    return LocalizationEstimate(n_loc=1.0 / abs(math.log(t)), regime="linear")


@dataclass(frozen=True)
class SaturationPoint:
    """Driven-atom steady state and saturated transmittance."""

    delta: float
    omega: float
    rho_ee: float
    rho_eg: complex
    T: float


def steady_state_bloch(delta: float, omega: float) -> SaturationPoint:
    """Steady state of one driven atom and its transmittance.

    rho_ee = omega^2 / (4 delta^2 + 1 + 2 omega^2) and
    T = (4 delta^2 + 8 omega^2) / (1 + 4 delta^2 + 8 omega^2)
    in units of the waveguide decay rate.
    """
    if omega < 0.0:
        raise DomainError(f"Rabi amplitude must be >= 0, got {omega}")
    denom = 4.0 * delta**2 + GAMMA_1D**2 + 2.0 * omega**2
    rho_ee = omega**2 / denom
    rho_eg = 1j * omega * (GAMMA_1D + 2j * delta) / denom
    t = (4.0 * delta**2 + 8.0 * omega**2) / (GAMMA_1D**2 + 4.0 * delta**2 + 8.0 * omega**2)
    return SaturationPoint(delta=float(delta), omega=float(omega), rho_ee=rho_ee, rho_eg=rho_eg, T=t)


def n_loc_saturated(delta: float, rho_ee: float) -> LocalizationEstimate:
    """Excitation-density-dependent localization length.

    Inverts the steady-state relation for omega^2 at the requested
    excited population, evaluates the saturated transmittance, and apply
    1/|log T|. Populations at or above 1/2 are unreachable steady states
    and map to an infinite (delocalized) length.
    """
    if rho_ee < 0.0:
        raise DomainError(f"rho_ee must be >= 0, got {rho_ee}")
    if rho_ee >= 0.5:
        return LocalizationEstimate(n_loc=math.inf, regime="saturated")
    omega_sq = rho_ee * (4.0 * delta**2 + GAMMA_1D**2) / (1.0 - 2.0 * rho_ee)
    t = (4.0 * delta**2 + 8.0 * omega_sq) / (GAMMA_1D**2 + 4.0 * delta**2 + 8.0 * omega_sq)
    if t >= 1.0:
        return LocalizationEstimate(n_loc=math.inf, regime="saturated")
    if t == 0.0:
        return LocalizationEstimate(n_loc=0.0, regime="saturated")
    return LocalizationEstimate(n_loc=1.0 / abs(math.log(t)), regime="saturated")
