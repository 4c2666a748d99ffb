"""Ancilla quantum-revival counting and the interacting-degrees observable.

An ancilla that exchanges excitation with one chain atom revives
periodically when it couples to a handful of localized modes; loading the
chain with interacting excitations spreads the coupling over ever more
degrees of freedom and suppresses late revivals. Counting accepted
revivals per trace (never on ensemble-averaged traces, whose incoherent
peaks wash out) gives a rate whose inverse tracks the effective number of
coupled degrees of freedom; referencing an unloaded chain isolates the
interaction contribution.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .basis import (
    DensityMatrix,
    StateVector,
    build_basis,
    pattern_of_sites,
    prepare_product,
    zero_state,
)
from .dynamics import (
    EffectivePropagators,
    PropagationConfig,
    evolve_closed,
    master_equation_evolve,
    quantum_jump_trajectory,
)
from .errors import DomainError
from .model import (
    DEFAULT_SPACING,
    AncillaSpec,
    DisorderSpec,
    ModelMatrices,
    WaveguideVariant,
    attach_ancilla,
    build_model,
    sample_positions,
    sector_hamiltonian,
)
from .observables import ancilla_population
from .rng import STREAM_INITIAL, STREAM_TRAJECTORY, substream

# Stream offset separating reference-run trajectories from loaded ones.
_REFERENCE_STREAM_SHIFT = 1_000_003


@dataclass(frozen=True)
class RevivalConfig:
    """Acceptance rule for counting revivals on a sampled trace.

    A detected local maximum counts as a revival when its visibility
    Q = (peak - running minimum) / running minimum exceeds ``q_min`` and
    the peak population exceeds ``population_threshold``. The running
    minimum is taken since the last accepted revival (from t = 0 before
    the first); ``reset_on_detected`` switches to resetting at every
    detected maximum instead, for sensitivity checks.
    """

    q_min: float = 0.4
    population_threshold: float = 0.25
    sampling_interval: float = 0.05
    reset_on_detected: bool = False

    def __post_init__(self):
        if self.q_min <= 0.0:
            raise DomainError(f"q_min must be > 0, got {self.q_min}")
        if not 0.0 < self.population_threshold < 1.0:
            raise DomainError("population threshold must be in (0, 1)")


@dataclass
class RevivalTrace:
    """Counting result for one ancilla population trace."""

    times: np.ndarray
    population: np.ndarray
    maxima_times: np.ndarray
    accepted_times: np.ndarray
    cumulative: np.ndarray  # N_rev(t) on the sample grid

    @property
    def count(self) -> int:
        return int(self.accepted_times.size)


def _local_maxima(y: np.ndarray) -> list[int]:
    """Indices of interior local maxima; plateaus count once at their start."""
    idx = []
    n = y.size
    i = 1
    while i < n - 1:
        if y[i] > y[i - 1]:
            j = i
            while j + 1 < n and y[j + 1] == y[i]:
                j += 1
            if j + 1 < n and y[j + 1] < y[i]:
                idx.append(i)
            i = j + 1
        else:
            i += 1
    return idx


def count_revivals(times: np.ndarray, population: np.ndarray, cfg: RevivalConfig) -> RevivalTrace:
    """Apply the visibility rule to a uniformly sampled ancilla trace."""
    t = np.asarray(times, dtype=np.float64)
    y = np.asarray(population, dtype=np.float64)
    if t.size != y.size or t.size < 3:
        raise DomainError("need at least 3 aligned samples")
    dt = np.diff(t)
    if np.any(np.abs(dt - dt[0]) > 1e-9 * max(abs(dt[0]), 1e-12)):
        raise DomainError("trace must be uniformly sampled; resample upstream")
    maxima = _local_maxima(y)
    accepted = []
    running_min = y[0]
    next_max = 0
    for i in range(1, t.size):
        running_min = min(running_min, y[i])
        if next_max < len(maxima) and maxima[next_max] == i:
            peak = y[i]
            q = math.inf if running_min == 0.0 else (peak - running_min) / running_min
            if q > cfg.q_min and peak > cfg.population_threshold:
                accepted.append(i)
                running_min = peak
            elif cfg.reset_on_detected:
                running_min = peak
            next_max += 1
    accepted_times = t[accepted]
    cumulative = np.searchsorted(accepted_times, t, side="right").astype(np.float64)
    return RevivalTrace(
        times=t,
        population=y,
        maxima_times=t[maxima],
        accepted_times=accepted_times,
        cumulative=cumulative,
    )


@dataclass
class RateCurve:
    """Trace-averaged cumulative counts and the derived revival rate."""

    times: np.ndarray
    mean_cumulative: np.ndarray
    stderr_cumulative: np.ndarray
    rate: np.ndarray  # mean_cumulative / t, nan at t = 0
    n_traces: int


def revival_rate_ensemble(times: np.ndarray, cumulative_counts: list[np.ndarray]) -> RateCurve:
    """Average per-trace cumulative counts, then divide by time.

    Counting has already happened per trace; averaging the counts (not
    the populations) is what keeps the rate meaningful under disorder.
    """
    if not cumulative_counts:
        raise DomainError("need at least one trace")
    stack = np.vstack(cumulative_counts)
    if stack.shape[1] != times.size:
        raise DomainError("cumulative counts do not match the time grid")
    mean = stack.mean(axis=0)
    stderr = (
        stack.std(axis=0, ddof=1) / math.sqrt(stack.shape[0])
        if stack.shape[0] > 1
        else np.zeros_like(mean)
    )
    with np.errstate(divide="ignore", invalid="ignore"):
        rate = np.where(times > 0, mean / np.where(times > 0, times, 1.0), np.nan)
    return RateCurve(
        times=times, mean_cumulative=mean, stderr_cumulative=stderr, rate=rate,
        n_traces=stack.shape[0],
    )


def interacting_dof(loaded: RateCurve, reference: RateCurve) -> np.ndarray:
    """O(t) = 1/R_loaded - 1/R_reference; nan where either rate vanishes."""
    if loaded.times.shape != reference.times.shape or np.any(
        np.abs(loaded.times - reference.times) > 1e-9
    ):
        raise DomainError("rate curves must share one time grid")
    out = np.full(loaded.times.size, np.nan)
    ok = (
        np.isfinite(loaded.rate)
        & np.isfinite(reference.rate)
        & (loaded.rate > 0)
        & (reference.rate > 0)
    )
    out[ok] = 1.0 / loaded.rate[ok] - 1.0 / reference.rate[ok]
    return out


# -- the revival experiment ----------------------------------------------------


def prepare_ancilla_loaded(
    basis, ancilla_index: int, waveguide_sites, k_waveguide: int, rng
) -> StateVector:
    """|excited ancilla> x equal random-phase superposition of chain patterns."""
    import itertools

    sites = sorted(int(s) for s in waveguide_sites)
    if k_waveguide == 0:
        return prepare_product([ancilla_index], basis)
    patterns = [
        pattern_of_sites(c) | (1 << ancilla_index)
        for c in itertools.combinations(sites, k_waveguide)
    ]
    state = zero_state(basis)
    phases = rng.uniform(0.0, 2.0 * np.pi, size=len(patterns))
    amp = 1.0 / math.sqrt(len(patterns))
    for p, phi in zip(patterns, phases):
        state.amplitudes[basis.rank(p)] = amp * np.exp(1j * phi)
    return state


def _sample_grid(t_max: float, dt: float) -> np.ndarray:
    return np.arange(0.0, t_max + 0.5 * dt, dt)


def _traces_for_state(
    model: ModelMatrices,
    basis,
    psi0: StateVector,
    variant: WaveguideVariant,
    prop_cfg: PropagationConfig,
    revival_cfg: RevivalConfig,
    ancilla_index: int,
    seed: int,
    realization: int,
    n_trajectories: int,
    master_equation_max_exc: int,
    collect: list | None,
) -> tuple[list[np.ndarray], int]:
    """Cumulative revival counts for every trace of one prepared state."""
    times = prop_cfg.times()
    op = sector_hamiltonian(model, basis)
    counts: list[np.ndarray] = []
    total = 0
    if variant is WaveguideVariant.HALF_HERMITIAN:
        res = evolve_closed(
            op, psi0, prop_cfg,
            observables={"pa": lambda s: ancilla_population(s, ancilla_index)},
            keep_states=False,
        )
        traces = [res.observables["pa"]]
    elif basis.n_max <= master_equation_max_exc:
        rho0 = DensityMatrix(basis, np.outer(psi0.amplitudes, psi0.amplitudes.conj()))
        res = master_equation_evolve(
            model, basis, rho0, prop_cfg,
            observables={"pa": lambda dm: ancilla_population(dm, ancilla_index)},
        )
        traces = [res.observables["pa"]]
    else:
        props = EffectivePropagators(op, prop_cfg)
        traces = []
        for t in range(n_trajectories):
            rng = substream(seed, STREAM_TRAJECTORY, realization, t)
            rec = quantum_jump_trajectory(model, basis, psi0, prop_cfg, rng, propagators=props)
            traces.append(rec.populations[:, ancilla_index])
    for pa in traces:
        trace = count_revivals(times, pa, revival_cfg)
        counts.append(trace.cumulative)
        total += trace.count
        if collect is not None:
            collect.append(pa)
    return counts, total


def revival_realization(
    n_total: int,
    n_exc: int,
    variant: WaveguideVariant,
    seed: int,
    realization: int,
    n_trajectories: int = 500,
    t_max: float = 300.0,
    revival_cfg: RevivalConfig | None = None,
    ancilla: AncillaSpec | None = None,
    disorder_width: float = 1.0,
    spacing: float = DEFAULT_SPACING,
    loaded_sites: list[int] | None = None,
    engine: str = "auto",
    master_equation_max_exc: int = 2,
    keep_traces: bool = False,
) -> tuple[list[np.ndarray], list[np.ndarray], int, int, list[np.ndarray]]:
    """Loaded and reference revival counts for one disorder realization.

    Returns (loaded cumulative counts per trace, reference counts per
    trace, total accepted loaded, total accepted reference, kept traces).
    The reference run reuses the same geometry with an empty chain.
    """
    if variant not in (WaveguideVariant.HALF_HERMITIAN, WaveguideVariant.HALF_OPEN):
        raise DomainError("revival experiments run on the half waveguide")
    if not 1 <= n_exc <= n_total:
        raise DomainError(f"n_exc {n_exc} outside 1..{n_total}")
    revival_cfg = revival_cfg or RevivalConfig()
    ancilla = ancilla or AncillaSpec()
    times = _sample_grid(t_max, revival_cfg.sampling_interval)
    prop_cfg = PropagationConfig(
        t_max=float(times[-1]),
        sample_times=times,
        engine=engine,
        check_every=max(1, times.size // 8),
    )
    n_chain = n_total - 1
    ancilla_index = n_total - 1

    geom = sample_positions(n_chain, spacing, DisorderSpec(disorder_width, seed, realization))
    model = attach_ancilla(build_model(geom, variant), ancilla)

    basis_loaded = build_basis(n_total, n_exc)
    if loaded_sites is not None:
        if len(loaded_sites) != n_exc - 1:
            raise DomainError("loaded_sites must list exactly n_exc - 1 chain atoms")
        psi_loaded = prepare_product(list(loaded_sites) + [ancilla_index], basis_loaded)
    else:
        rng_init = substream(seed, STREAM_INITIAL, realization)
        psi_loaded = prepare_ancilla_loaded(
            basis_loaded, ancilla_index, range(n_chain), n_exc - 1, rng_init
        )
    traces: list[np.ndarray] = [] if keep_traces else None
    counts_loaded, total_loaded = _traces_for_state(
        model, basis_loaded, psi_loaded, variant, prop_cfg, revival_cfg,
        ancilla_index, seed, realization, n_trajectories, master_equation_max_exc,
        traces,
    )

    basis_ref = build_basis(n_total, 1)
    psi_ref = prepare_product([ancilla_index], basis_ref)
    counts_ref, total_ref = _traces_for_state(
        model, basis_ref, psi_ref, variant, prop_cfg, revival_cfg,
        ancilla_index, seed + _REFERENCE_STREAM_SHIFT, realization, n_trajectories,
        master_equation_max_exc, None,
    )
    return counts_loaded, counts_ref, total_loaded, total_ref, (traces or [])


@dataclass
class RevivalExperimentResult:
    times: np.ndarray
    loaded: RateCurve
    reference: RateCurve
    o_curve: np.ndarray
    per_realization_counts: list[int]
    per_realization_counts_reference: list[int]
    traces: list[np.ndarray]


def revival_experiment(
    n_total: int,
    n_exc: int,
    variant: WaveguideVariant,
    seed: int,
    n_realizations: int,
    n_trajectories: int = 500,
    t_max: float = 300.0,
    revival_cfg: RevivalConfig | None = None,
    ancilla: AncillaSpec | None = None,
    disorder_width: float = 1.0,
    spacing: float = DEFAULT_SPACING,
    loaded_sites: list[int] | None = None,
    engine: str = "auto",
    master_equation_max_exc: int = 2,
    keep_traces: bool = False,
) -> RevivalExperimentResult:
    """Loaded-vs-unloaded revival rates for an ancilla-probed half waveguide.

    ``n_total`` counts the ancilla, so the chain has ``n_total - 1`` atoms
    and the loaded run places ``n_exc - 1`` excitations in it (a random
    phase superposition of all such patterns, or the explicit
    ``loaded_sites`` product state). Reference and loaded runs share the
    same disorder realizations, which suppresses the variance of their
    rate difference.
    """
    revival_cfg = revival_cfg or RevivalConfig()
    times = _sample_grid(t_max, revival_cfg.sampling_interval)
    counts_loaded: list[np.ndarray] = []
    counts_ref: list[np.ndarray] = []
    per_loaded: list[int] = []
    per_ref: list[int] = []
    traces: list[np.ndarray] = []
    for r in range(n_realizations):
        cl, cr, tl, tr, tk = revival_realization(
            n_total, n_exc, variant, seed, r, n_trajectories, t_max, revival_cfg,
            ancilla, disorder_width, spacing, loaded_sites, engine,
            master_equation_max_exc, keep_traces,
        )
        counts_loaded.extend(cl)
        counts_ref.extend(cr)
        per_loaded.append(tl)
        per_ref.append(tr)
        traces.extend(tk)
    loaded = revival_rate_ensemble(times, counts_loaded)
    reference = revival_rate_ensemble(times, counts_ref)
    return RevivalExperimentResult(
        times=times,
        loaded=loaded,
        reference=reference,
        o_curve=interacting_dof(loaded, reference),
        per_realization_counts=per_loaded,
        per_realization_counts_reference=per_ref,
        traces=traces,
    )
