"""Time evolution engines: closed, effective non-Hermitian, Lindblad, jumps.

Three contracts are offered:

* ``evolve_closed`` propagates under a Hermitian sector operator and must
  conserve norm, energy and excitation number.
* ``evolve_effective`` propagates under the non-Hermitian effective
  Hamiltonian; the norm is monotonically non-increasing and its square is
  the no-jump survival probability.
* ``master_equation_evolve`` integrates the full Lindblad equation for a
  dense density matrix (intended for small excitation caps) and must
  preserve trace, Hermiticity and positivity.
* ``quantum_jump_trajectory`` unravels the master equation into pure-state
  trajectories: deterministic non-Hermitian drift plus collapse events
  located by root-finding on the survival norm.

Propagation is exact to solver precision: small sector blocks use a dense
eigendecomposition, large ones Krylov-style ``expm_multiply`` stepping.
Both satisfy the same contracts, so the engine choice is a performance
knob, not a physics one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.optimize import brentq

from . import _kernels
from .basis import DensityMatrix, RestrictedBasis, StateVector, apply_lowering, lowering_matrix
from .errors import DomainError, NumericalError
from .model import ModelMatrices, SectorOperator, sector_hamiltonian
from .observables import site_populations

_NORM_TOL = 1e-8
_HERMITICITY_TOL = 1e-10
_POSITIVITY_TOL = 1e-6
# Per-chunk buffer cap for interval propagation.
_CHUNK_BYTES = 64 * 2**20


@dataclass
class PropagationConfig:
    """Sampling grid and solver knobs for one evolution run."""

    t_max: float = 100.0
    n_samples: int = 400
    sample_times: np.ndarray | None = None
    rtol: float = 1e-8
    engine: str = "auto"  # auto | dense | expm
    # Crossover sized for this stack: LAPACK eigh beats repeated
    # expm_multiply calls only for small blocks.
    dense_threshold: int = 1024
    check_every: int = 10  # positivity-check stride for master-equation runs

    def times(self) -> np.ndarray:
        if self.sample_times is not None:
            t = np.asarray(self.sample_times, dtype=np.float64)
            if t.ndim != 1 or t.size < 1 or np.any(np.diff(t) <= 0) or t[0] < 0:
                raise DomainError("sample_times must be strictly increasing, t >= 0")
            return t
        return np.linspace(0.0, self.t_max, self.n_samples)


# -- sector-block propagators -------------------------------------------------


def _is_uniform(times: np.ndarray) -> bool:
    if times.size < 3:
        return True
    d = np.diff(times)
    return bool(np.allclose(d, d[0], rtol=1e-9, atol=1e-12))


class _DensePropagator:
    """exp(-i H dt) through an eigendecomposition of a dense block."""

    def __init__(self, block: np.ndarray, hermitian: bool):
        self.dim = block.shape[0]
        if hermitian:
            vals, vecs = np.linalg.eigh(block)
            self.vals = vals.astype(np.complex128)
            self.vecs = vecs.astype(np.complex128)
            self._solve = lambda v: self.vecs.conj().T @ v
        else:
            vals, vecs = np.linalg.eig(block)
            self.vals = vals
            self.vecs = vecs
            lu = scipy.linalg.lu_factor(vecs)
            self._solve = lambda v: scipy.linalg.lu_solve(lu, v)
            # A nearly defective eigenbasis would silently lose accuracy.
            probe = np.random.default_rng(0).normal(size=self.dim)
            probe = probe / np.linalg.norm(probe)
            err = np.linalg.norm(self.vecs @ self._solve(probe) - probe)
            if not np.isfinite(err) or err > 1e-9:
                raise NumericalError(f"ill-conditioned eigenbasis (round-trip error {err:.2e})")

    def apply(self, amps: np.ndarray, dt: float) -> np.ndarray:
        if dt == 0.0:
            return amps.copy()
        c = self._solve(amps)
        return self.vecs @ (np.exp(-1j * self.vals * dt) * c)

    def iter_samples(self, amps: np.ndarray, times: np.ndarray):
        """Yield the state at each time offset in order, chunked matmuls."""
        c = self._solve(amps)
        chunk = max(1, _CHUNK_BYTES // (16 * max(self.dim, 1)))
        for start in range(0, times.size, chunk):
            seg = times[start : start + chunk]
            phases = np.exp(-1j * np.outer(self.vals, seg))
            block = self.vecs @ (phases * c[:, None])
            for i in range(seg.size):
                yield block[:, i]


class _ExpmPropagator:
    """exp(generator * dt) via sparse matrix exponentials.

    ``generator`` already includes the -i factor for Schroedinger blocks;
    the same class drives Liouvillian propagation. One-shot applications
    go through scipy's expm_multiply; uniform sample grids reuse a cached
    shifted-Taylor stepper whose substep count is chosen once from the
    exact matrix 1-norm, which beats re-running scipy's parameter
    selection thousands of times.
    """

    _TAYLOR_THETA = 2.0
    _TAYLOR_MAX_TERMS = 64

    def __init__(self, generator: sp.csr_matrix):
        self.a = generator.tocsr()
        self.dim = generator.shape[0]
        self.trace = complex(self.a.diagonal().sum())
        self._mu = self.trace / max(self.dim, 1)
        shifted = self.a - self._mu * sp.identity(self.dim, dtype=np.complex128, format="csr")
        self._shifted = shifted.tocsr()
        self._rho = self._spectral_radius_estimate()
        self._steppers: dict[float, tuple] = {}

    def _spectral_radius_estimate(self) -> float:
        if self.dim == 0:
            return 0.0
        v = np.random.default_rng(1).normal(size=self.dim).astype(np.complex128)
        v /= np.linalg.norm(v)
        rho = 0.0
        for _ in range(20):
            w = self._shifted @ v
            nw = np.linalg.norm(w)
            if nw == 0.0:
                return 0.0
            rho = nw
            v = w / nw
        # Power iteration underestimates; the adaptive term cutoff absorbs
        # the slack, this only sets the substep count.
        return 1.2 * rho

    @classmethod
    def from_hamiltonian(cls, block: sp.spmatrix) -> "_ExpmPropagator":
        return cls((-1j * block).tocsr())

    def apply(self, amps: np.ndarray, dt: float) -> np.ndarray:
        if dt == 0.0:
            return amps.copy()
        return spla.expm_multiply(self.a * dt, amps, traceA=self.trace * dt)

    def _stepper(self, dt: float) -> tuple:
        key = float(dt)
        if key not in self._steppers:
            substeps = max(1, int(math.ceil(self._rho * abs(dt) / self._TAYLOR_THETA)))
            b = (self._shifted * (dt / substeps)).tocsr()
            scale = np.exp(self._mu * dt / substeps)
            self._steppers[key] = (b, scale, substeps)
        return self._steppers[key]

    def _apply_step(self, amps: np.ndarray, dt: float) -> np.ndarray:
        b, scale, substeps = self._stepper(dt)
        v = amps
        for _ in range(substeps):
            term = v
            acc = v.copy()
            for k in range(1, self._TAYLOR_MAX_TERMS + 1):
                term = b @ term
                term /= k
                acc += term
                if np.linalg.norm(term, 1) <= 1e-16 * np.linalg.norm(acc, 1):
                    break
            else:  # give the hard case to scipy rather than lose digits
                return self.apply(amps, dt)
            v = acc * scale
        return v

    def iter_samples(self, amps: np.ndarray, times: np.ndarray):
        state = amps
        t0 = 0.0
        start = 0
        if times.size and times[0] == 0.0:
            yield state.copy()
            start = 1
        rest = times[start:]
        if rest.size and _is_uniform(np.concatenate(([t0], rest))):
            dt = float(rest[0] - t0)
            for _ in range(rest.size):
                state = self._apply_step(state, dt)
                yield state
            return
        for t in rest:
            state = self._apply_step(state, float(t - t0)) if t != t0 else state.copy()
            t0 = float(t)
            yield state


def _make_propagator(block: sp.spmatrix, hermitian: bool, cfg: PropagationConfig):
    dim = block.shape[0]
    engine = cfg.engine
    if engine == "auto":
        engine = "dense" if dim <= cfg.dense_threshold else "expm"
    if engine == "dense":
        try:
            return _DensePropagator(np.asarray(block.todense()), hermitian)
        except NumericalError:
            return _ExpmPropagator.from_hamiltonian(block)
    if engine == "expm":
        return _ExpmPropagator.from_hamiltonian(block)
    raise DomainError(f"unknown engine {cfg.engine!r}")


def _support_sector(basis: RestrictedBasis, amps: np.ndarray) -> int | None:
    """Sector index if the state lives in exactly one sector, else None."""
    populated = None
    for k in range(basis.n_max + 1):
        a, b = basis.sector_range(k)
        if np.any(amps[a:b] != 0):
            if populated is not None:
                return None
            populated = k
    return populated


# -- closed and effective evolution -------------------------------------------


@dataclass
class EvolutionResult:
    """Sampled states and/or observables of one deterministic evolution."""

    times: np.ndarray
    states: list[StateVector] | None
    observables: dict[str, np.ndarray]
    norms: np.ndarray


def _evolve_linear(
    op: SectorOperator,
    psi0: StateVector,
    cfg: PropagationConfig,
    hermitian: bool,
    observables,
    keep_states: bool,
) -> EvolutionResult:
    basis = op.basis
    sb = psi0.basis
    if sb is not basis and (sb.n_atoms != basis.n_atoms or sb.n_max != basis.n_max):
        raise DomainError("state and operator bases do not match")
    times = cfg.times()
    sector = _support_sector(basis, psi0.amplitudes)
    if sector is None:
        a, b = 0, basis.dim
        block = op.matrix
    else:
        a, b = basis.sector_range(sector)
        block = op.matrix[a:b, a:b]
    prop = _make_propagator(block, hermitian, cfg)

    states: list[StateVector] | None = [] if keep_states else None
    obs: dict[str, list] = {name: [] for name in (observables or {})}
    norms = np.empty(times.size)
    for i, amps in enumerate(prop.iter_samples(psi0.amplitudes[a:b], times)):
        full = np.zeros(basis.dim, dtype=np.complex128)
        full[a:b] = amps
        state = StateVector(basis, full)
        norms[i] = state.norm()
        if keep_states:
            states.append(state)
        for name, fn in (observables or {}).items():
            obs[name].append(fn(state))
    return EvolutionResult(
        times=times,
        states=states,
        observables={k: np.asarray(v) for k, v in obs.items()},
        norms=norms,
    )


def evolve_closed(
    op: SectorOperator,
    psi0: StateVector,
    cfg: PropagationConfig,
    observables=None,
    keep_states: bool = True,
) -> EvolutionResult:
    """Norm-preserving evolution under a Hermitian sector operator."""
    herm_defect = abs(op.matrix - op.matrix.getH()).max()
    if herm_defect > _HERMITICITY_TOL:
        raise DomainError(f"operator is not Hermitian (defect {herm_defect:.2e})")
    norm0 = psi0.norm()
    result = _evolve_linear(op, psi0, cfg, True, observables, keep_states)
    if np.any(np.abs(result.norms - norm0) > _NORM_TOL * max(1.0, norm0)):
        raise NumericalError("closed evolution failed to preserve the norm")
    if result.states:
        energy0 = float(np.vdot(psi0.amplitudes, op.matrix @ psi0.amplitudes).real)
        exc0 = float(np.sum(site_populations(psi0)))
        last = result.states[-1]
        energy = float(np.vdot(last.amplitudes, op.matrix @ last.amplitudes).real)
        if abs(energy - energy0) > 1e-8 * max(1.0, abs(energy0)):
            raise NumericalError("closed evolution failed to conserve energy")
        exc = float(np.sum(site_populations(last)))
        if abs(exc - exc0) > 1e-8 * max(1.0, exc0):
            raise NumericalError("closed evolution failed to conserve excitation number")
    return result


def evolve_effective(
    op: SectorOperator,
    psi0: StateVector,
    cfg: PropagationConfig,
    observables=None,
    keep_states: bool = True,
) -> EvolutionResult:
    """Norm-decaying evolution under the non-Hermitian effective Hamiltonian."""
    # The anti-Hermitian part must describe decay; a negative entry on the
    # diagonal of Gamma_eff/2 is a cheap certificate of a construction bug.
    anti = (op.matrix - op.matrix.getH()).multiply(0.5j)
    if anti.diagonal().real.min() < -1e-10:
        raise DomainError("anti-Hermitian part must be negative semidefinite (decay only)")
    result = _evolve_linear(op, psi0, cfg, False, observables, keep_states)
    norms = result.norms
    if np.any(norms[1:] > norms[:-1] * (1.0 + 1e-9) + 1e-12):
        raise NumericalError("effective evolution produced a norm increase")
    return result


# -- Lindblad master equation --------------------------------------------------


@dataclass
class MasterEvolution:
    times: np.ndarray
    populations: np.ndarray  # (T, N)
    traces: np.ndarray
    states: list[DensityMatrix] | None
    observables: dict[str, np.ndarray]


def liouvillian(
    model: ModelMatrices, basis: RestrictedBasis, op: SectorOperator | None = None
) -> sp.csr_matrix:
    """Sparse Lindblad generator acting on row-major vectorized densities."""
    if op is None:
        op = sector_hamiltonian(model, basis)
    h = op.matrix
    dim = basis.dim
    eye = sp.identity(dim, dtype=np.complex128, format="csr")
    gen = -1j * sp.kron(h, eye, format="csr") + 1j * sp.kron(eye, h.conj(), format="csr")
    for ch in model.jump_ops:
        low = lowering_matrix(ch.weights, basis)
        gen = gen + ch.rate * sp.kron(low, low.conj(), format="csr")
    return gen.tocsr()


def master_equation_evolve(
    model: ModelMatrices,
    basis: RestrictedBasis,
    rho0: DensityMatrix,
    cfg: PropagationConfig,
    observables=None,
    keep_states: bool = False,
    op: SectorOperator | None = None,
) -> MasterEvolution:
    """Trace-preserving Lindblad evolution of a dense density matrix."""
    dim = basis.dim
    if rho0.matrix.shape != (dim, dim):
        raise DomainError("density matrix does not match the basis")
    prop = _ExpmPropagator(liouvillian(model, basis, op=op))
    times = cfg.times()
    trace0 = float(np.trace(rho0.matrix).real)

    populations = np.empty((times.size, basis.n_atoms))
    traces = np.empty(times.size)
    states: list[DensityMatrix] | None = [] if keep_states else None
    obs: dict[str, list] = {name: [] for name in (observables or {})}
    stride = max(1, int(cfg.check_every))
    for i, vec in enumerate(prop.iter_samples(rho0.matrix.reshape(-1).copy(), times)):
        rho = vec.reshape(dim, dim)
        traces[i] = float(np.trace(rho).real)
        if abs(traces[i] - trace0) > 1e-8 * max(1.0, abs(trace0)):
            raise NumericalError(f"trace drifted to {traces[i]} at t={times[i]}")
        if i % stride == 0 or i == times.size - 1:
            herm_defect = float(np.max(np.abs(rho - rho.conj().T)))
            if herm_defect > 1e-8:
                raise NumericalError(f"Hermiticity defect {herm_defect:.2e} at t={times[i]}")
            min_eig = float(np.linalg.eigvalsh(0.5 * (rho + rho.conj().T)).min())
            if min_eig < -_POSITIVITY_TOL:
                raise NumericalError(f"positivity violated ({min_eig:.2e}) at t={times[i]}")
        dm = DensityMatrix(basis, rho)
        populations[i] = site_populations(dm)
        if keep_states:
            states.append(DensityMatrix(basis, rho.copy()))
        for name, fn in (observables or {}).items():
            obs[name].append(fn(dm))
    return MasterEvolution(
        times=times,
        populations=populations,
        traces=traces,
        states=states,
        observables={k: np.asarray(v) for k, v in obs.items()},
    )


# -- quantum-jump unraveling ---------------------------------------------------


@dataclass
class TrajectoryRecord:
    """One stochastic pure-state unraveling of the master equation."""

    times: np.ndarray
    populations: np.ndarray  # (T, N)
    jumps: list[tuple[float, int]]
    thresholds: list[float]
    final_state: StateVector | None = None


class EffectivePropagators:
    """Per-sector propagators under the effective Hamiltonian, built lazily.

    Immutable once built; share one instance across all trajectories of a
    disorder realization.
    """

    def __init__(self, op: SectorOperator, cfg: PropagationConfig):
        self.op = op
        self.basis = op.basis
        self.cfg = cfg
        self._cache: dict[int, object] = {}

    def get(self, k: int):
        if k not in self._cache:
            a, b = self.basis.sector_range(k)
            self._cache[k] = _make_propagator(self.op.matrix[a:b, a:b], False, self.cfg)
        return self._cache[k]


def quantum_jump_trajectory(
    model: ModelMatrices,
    basis: RestrictedBasis,
    psi0: StateVector,
    cfg: PropagationConfig,
    rng: np.random.Generator,
    propagators: EffectivePropagators | None = None,
    keep_final_state: bool = False,
) -> TrajectoryRecord:
    """First-jump unraveling with norm-threshold root-finding.

    Draw u ~ U(0,1), evolve under the effective Hamiltonian until the
    squared norm hits u (the crossing located by Brent's method, which is
    reliable here because the survival norm is monotone), pick a collapse
    channel with probability proportional to rate * ||L psi||^2,
    renormalize and repeat until the end of the sample grid. Every jump
    lowers the excitation number by one.
    """
    if propagators is None:
        propagators = EffectivePropagators(sector_hamiltonian(model, basis), cfg)
    sector = _support_sector(basis, psi0.amplitudes)
    if sector is None:
        raise DomainError("trajectory initial states must live in one excitation sector")
    times = cfg.times()
    n_exc0 = sector
    populations = np.empty((times.size, basis.n_atoms))
    jumps: list[tuple[float, int]] = []
    thresholds: list[float] = []

    k = sector
    a, b = basis.sector_range(k)
    amps = psi0.amplitudes[a:b].astype(np.complex128)
    norm0 = float(np.linalg.norm(amps))
    if abs(norm0 - 1.0) > 1e-8:
        raise DomainError(f"initial state norm {norm0} is not 1")
    amps = amps / norm0
    t_cur = 0.0
    u = float(rng.uniform())
    t_scale = max(float(times[-1]), 1.0)

    def survival_sq(v: np.ndarray) -> float:
        return float(np.real(np.vdot(v, v)))

    for i, ts in enumerate(times):
        ts = float(ts)
        while True:
            prop = propagators.get(k)
            cand = prop.apply(amps, ts - t_cur) if ts > t_cur else amps
            n2 = survival_sq(cand)
            if n2 >= u or k == 0:
                amps = cand
                t_cur = ts
                break
            # A jump happened in (t_cur, ts]; locate it on the monotone norm.
            f0 = survival_sq(amps) - u
            if f0 <= 0.0:
                dt_jump = 0.0
                psi_gate = amps
            else:

                def crossing(dt):
                    return survival_sq(prop.apply(amps, dt)) - u

                dt_jump = brentq(
                    crossing, 0.0, ts - t_cur,
                    xtol=1e-10 * t_scale, rtol=1e-10, maxiter=200,
                )
                psi_gate = prop.apply(amps, dt_jump)
            if len(jumps) >= n_exc0:
                raise NumericalError("more jumps than initial excitations")
            full = np.zeros(basis.dim, dtype=np.complex128)
            full[a:b] = psi_gate
            gate_state = StateVector(basis, full)
            lowered = [apply_lowering(ch.weights, gate_state) for ch in model.jump_ops]
            weights = np.array(
                [ch.rate * lw.norm() ** 2 for ch, lw in zip(model.jump_ops, lowered)]
            )
            total = weights.sum()
            if total <= 0.0:
                raise NumericalError("norm crossed the jump threshold but no channel has weight")
            channel = int(rng.choice(len(weights), p=weights / total))
            jumps.append((t_cur + dt_jump, channel))
            thresholds.append(u)
            k -= 1
            a, b = basis.sector_range(k)
            post = lowered[channel].amplitudes[a:b]
            amps = post / np.linalg.norm(post)
            t_cur = t_cur + dt_jump
            u = float(rng.uniform())
        norm = math.sqrt(survival_sq(amps))
        pops = np.zeros(basis.n_atoms)
        _kernels.populations_accum(
            basis.patterns[a:b], amps / norm, np.int64(basis.n_atoms), pops
        )
        populations[i] = pops

    final_state = None
    if keep_final_state:
        full = np.zeros(basis.dim, dtype=np.complex128)
        full[a:b] = amps / math.sqrt(survival_sq(amps))
        final_state = StateVector(basis, full)
    return TrajectoryRecord(
        times=times,
        populations=populations,
        jumps=jumps,
        thresholds=thresholds,
        final_state=final_state,
    )
