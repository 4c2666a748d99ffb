"""Experiment pipelines behind the harness: one function per config kind.

Each pipeline returns a dict of named tidy tables (plus JSON-able summary
payloads) and is deterministic under a fixed master seed: disorder,
initial-state phases and trajectories each draw from their own substream
addressed by (seed, stream, realization[, trajectory]), so results do not
depend on execution order or worker count. Realizations are the unit of
parallelism.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from .basis import DensityMatrix, build_basis, prepare_product, prepare_random_phase_superposition
from .config import ExperimentConfig, resolved_variant
from .dynamics import (
    EffectivePropagators,
    PropagationConfig,
    evolve_closed,
    master_equation_evolve,
    quantum_jump_trajectory,
)
from .errors import ConfigError, NumericalError
from .model import (
    AncillaSpec,
    DisorderSpec,
    build_model,
    sample_positions,
    sector_hamiltonian,
)
from .observables import (
    half_chain_entropy,
    half_imbalance,
    left_half_sites,
    memory_parameter,
    site_populations,
)
from .revival import (
    RevivalConfig,
    interacting_dof,
    revival_rate_ensemble,
    revival_realization,
)
from .rng import STREAM_INITIAL, STREAM_TRAJECTORY, substream
from .scattering import anderson_statistics, n_loc_linear, n_loc_saturated, steady_state_bloch
from .spectral import (
    delocalized_fraction_scaling,
    disorder_averaged_spectrum,
    mode_profile_map,
    overlap_matrix,
    single_excitation_modes,
)


def _map_realizations(
    worker, payloads: list, workers: int, checkpoint_dir: str | None = None
) -> list:
    """Run one worker per realization, optionally resuming from checkpoints.

    With a checkpoint directory, each realization's result is pickled as
    soon as it exists and reloaded instead of recomputed on a rerun, so an
    interrupted ensemble resumes at realization granularity. Workers are
    deterministic, which makes the two paths interchangeable.
    """
    if checkpoint_dir is None:
        if workers <= 1 or len(payloads) <= 1:
            return [worker(p) for p in payloads]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(worker, payloads, chunksize=1))

    import os
    import pickle

    os.makedirs(checkpoint_dir, exist_ok=True)

    def path(i: int) -> str:
        return os.path.join(checkpoint_dir, f"realization_{i:06d}.pkl")

    results: dict[int, object] = {}
    pending = []
    for i in range(len(payloads)):
        if os.path.exists(path(i)):
            with open(path(i), "rb") as fh:
                results[i] = pickle.load(fh)
        else:
            pending.append(i)

    def store(i: int, value) -> None:
        tmp = path(i) + ".tmp"
        with open(tmp, "wb") as fh:
            pickle.dump(value, fh)
        os.replace(tmp, path(i))
        results[i] = value

    if workers <= 1 or len(pending) <= 1:
        for i in pending:
            store(i, worker(payloads[i]))
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for i, value in zip(pending, pool.map(worker, [payloads[i] for i in pending], chunksize=1)):
                store(i, value)
    return [results[i] for i in range(len(payloads))]


def _checkpoint_dir(cfg: ExperimentConfig, label: str) -> str | None:
    if cfg.output_dir is None:
        return None
    import os

    return os.path.join(cfg.output_dir, ".checkpoints", label)


def _mean_stderr(stack: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    mean = stack.mean(axis=0)
    if stack.shape[0] > 1:
        stderr = stack.std(axis=0, ddof=1) / math.sqrt(stack.shape[0])
    else:
        stderr = np.zeros_like(mean)
    return mean, stderr


def equidistant_sites(n_atoms: int, n_exc: int) -> list[int]:
    """Roughly equally spaced excitation sites along the chain."""
    return [int((m + 0.5) * n_atoms / n_exc) for m in range(n_exc)]


def _initial_sites(cfg: ExperimentConfig, n_exc: int) -> list[int]:
    spec = cfg.initial_state or {"type": "product-equidistant"}
    kind = spec.get("type", "product-equidistant")
    if kind == "product-equidistant":
        return equidistant_sites(cfg.n_atoms, n_exc)
    if kind == "product":
        sites = [int(s) for s in spec["sites"]]
        if len(sites) != n_exc:
            raise ConfigError([f"initial_state.sites: expected {n_exc} sites, got {len(sites)}"])
        return sites
    raise ConfigError([f"initial_state.type: {kind!r} not supported for product preparation"])


# -- scattering kinds -----------------------------------------------------------


def run_anderson_stats(cfg: ExperimentConfig) -> dict:
    rows = {k: [] for k in (
        "delta", "n_atoms", "mean_log_t", "stderr_mean", "var_log_t", "stderr_var",
        "n_loc", "mean_formula", "var_formula", "n_realizations",
    )}
    for delta in cfg.deltas:
        stats = anderson_statistics(
            cfg.n_atoms, cfg.spacing, cfg.disorder_width, delta, cfg.realizations, cfg.seed
        )
        n_loc = n_loc_linear(delta).n_loc
        rows["delta"].append(delta)
        rows["n_atoms"].append(cfg.n_atoms)
        rows["mean_log_t"].append(stats.mean_log_t)
        rows["stderr_mean"].append(stats.stderr_mean)
        rows["var_log_t"].append(stats.var_log_t)
        rows["stderr_var"].append(stats.stderr_var)
        rows["n_loc"].append(n_loc)
        rows["mean_formula"].append(-cfg.n_atoms / n_loc if n_loc > 0 else -math.inf)
        rows["var_formula"].append(2 * cfg.n_atoms / n_loc if n_loc > 0 else math.inf)
        rows["n_realizations"].append(stats.n_realizations)
    return {"anderson": rows}


def run_saturation_curve(cfg: ExperimentConfig) -> dict:
    sat = {k: [] for k in ("delta", "omega", "rho_ee", "transmittance", "n_loc")}
    for delta in cfg.deltas:
        for omega in cfg.omegas:
            point = steady_state_bloch(delta, omega)
            est = n_loc_saturated(delta, point.rho_ee)
            sat["delta"].append(delta)
            sat["omega"].append(omega)
            sat["rho_ee"].append(point.rho_ee)
            sat["transmittance"].append(point.T)
            sat["n_loc"].append(est.n_loc)
    out = {"saturation": sat}
    if cfg.rho_grid:
        grid = {k: [] for k in ("delta", "rho_ee", "n_loc")}
        for delta in cfg.deltas:
            for rho in cfg.rho_grid:
                grid["delta"].append(delta)
                grid["rho_ee"].append(rho)
                grid["n_loc"].append(n_loc_saturated(delta, rho).n_loc)
        out["nloc_vs_rho"] = grid
    return out


# -- eigenmode kind ---------------------------------------------------------------


def run_eigenmodes(cfg: ExperimentConfig) -> dict:
    variant = resolved_variant(cfg)
    out: dict = {}
    if cfg.n_atoms is not None:
        geom = sample_positions(
            cfg.n_atoms, cfg.spacing, DisorderSpec(cfg.disorder_width, cfg.seed, 0)
        )
        model = build_model(geom, variant)
        modes = single_excitation_modes(model)
        profiles = mode_profile_map(modes)
        # dense layout: one row per atom, one column per sorted mode
        prof_tbl = {"site": list(range(cfg.n_atoms))}
        for xi in range(cfg.n_atoms):
            prof_tbl[f"mode_{xi + 1}"] = profiles[:, xi].tolist()
        out["profiles"] = prof_tbl
        herm = build_model(geom, variant.hermitian_counterpart)
        dmat = overlap_matrix(model, herm) if variant.is_open else overlap_matrix(herm, herm)
        over_tbl = {"mode_open": list(range(1, cfg.n_atoms + 1))}
        for xi in range(cfg.n_atoms):
            over_tbl[f"hermitian_{xi + 1}"] = dmat[:, xi].tolist()
        out["overlap"] = over_tbl
        curves = disorder_averaged_spectrum(
            cfg.n_atoms, cfg.spacing, cfg.disorder_width, cfg.realizations, cfg.seed, variant
        )
        xi = np.arange(1, cfg.n_atoms + 1)
        out["spectrum"] = {
            "mode": xi.tolist(),
            "omega_mean": curves.omega_mean.tolist(),
            "omega_stderr": curves.omega_stderr.tolist(),
            "gamma_mean": curves.gamma_mean.tolist(),
            "gamma_stderr": curves.gamma_stderr.tolist(),
            "n_loc_of_omega": [n_loc_linear(w).n_loc for w in curves.omega_mean],
            "n_realizations": [curves.n_realizations] * cfg.n_atoms,
        }
    if cfg.n_atoms_list:
        out["scaling"] = delocalized_fraction_scaling(
            cfg.n_atoms_list, cfg.spacing, cfg.disorder_width, cfg.realizations, cfg.seed
        )
    return out


# -- closed transport and entropy ------------------------------------------------


def _worker_closed(payload: tuple) -> tuple:
    cfg_dict, n_exc, r, compute_entropy = payload
    cfg = ExperimentConfig(**cfg_dict)
    variant = resolved_variant(cfg)
    basis = build_basis(cfg.n_atoms, n_exc)
    geom = sample_positions(cfg.n_atoms, cfg.spacing, DisorderSpec(cfg.disorder_width, cfg.seed, r))
    op = sector_hamiltonian(build_model(geom, variant), basis)
    sites = _initial_sites(cfg, n_exc)
    psi0 = prepare_product(sites, basis)
    prop_cfg = PropagationConfig(
        t_max=cfg.t_max, n_samples=cfg.n_samples, rtol=cfg.rtol, engine=cfg.engine
    )
    observables = {"populations": site_populations}
    if compute_entropy:
        cut = cfg.entropy_cut or (cfg.n_atoms + 1) // 2
        observables["entropy"] = lambda s: half_chain_entropy(s, cut)
    res = evolve_closed(op, psi0, prop_cfg, observables=observables, keep_states=False)
    entropy = res.observables.get("entropy")
    return res.observables["populations"], entropy, sites


def _run_closed_family(cfg: ExperimentConfig, compute_entropy: bool) -> dict:
    times = PropagationConfig(t_max=cfg.t_max, n_samples=cfg.n_samples).times()
    memory_tbl = {k: [] for k in ("n_exc", "time", "value", "stderr", "n_realizations")}
    entropy_tbl = {k: [] for k in ("n_exc", "time", "value", "stderr", "n_realizations")}
    pop_tbl = {k: [] for k in ("n_exc", "time", "site", "value", "stderr")}
    final_tbl = {k: [] for k in ("n_exc", "site", "value", "stderr")}
    for n_exc in cfg.excitation_numbers():
        payloads = [(cfg.to_dict(), n_exc, r, compute_entropy) for r in range(cfg.realizations)]
        results = _map_realizations(
            _worker_closed, payloads, cfg.workers, _checkpoint_dir(cfg, f"closed-nexc{n_exc}")
        )
        pops = np.stack([res[0] for res in results])  # (R, T, N)
        sites = results[0][2]
        mem = np.stack(
            [
                [memory_parameter(p, sites, cfg.n_atoms) for p in pops[r]]
                for r in range(pops.shape[0])
            ]
        )
        mem_mean, mem_se = _mean_stderr(mem)
        memory_tbl["n_exc"].extend([n_exc] * times.size)
        memory_tbl["time"].extend(times.tolist())
        memory_tbl["value"].extend(mem_mean.tolist())
        memory_tbl["stderr"].extend(mem_se.tolist())
        memory_tbl["n_realizations"].extend([cfg.realizations] * times.size)

        pop_mean, pop_se = _mean_stderr(pops)
        for i, t in enumerate(times):
            pop_tbl["n_exc"].extend([n_exc] * cfg.n_atoms)
            pop_tbl["time"].extend([t] * cfg.n_atoms)
            pop_tbl["site"].extend(range(cfg.n_atoms))
            pop_tbl["value"].extend(pop_mean[i].tolist())
            pop_tbl["stderr"].extend(pop_se[i].tolist())
        final_tbl["n_exc"].extend([n_exc] * cfg.n_atoms)
        final_tbl["site"].extend(range(cfg.n_atoms))
        final_tbl["value"].extend(pop_mean[-1].tolist())
        final_tbl["stderr"].extend(pop_se[-1].tolist())

        if compute_entropy:
            ent = np.stack([res[1] for res in results])
            ent_mean, ent_se = _mean_stderr(ent)
            entropy_tbl["n_exc"].extend([n_exc] * times.size)
            entropy_tbl["time"].extend(times.tolist())
            entropy_tbl["value"].extend(ent_mean.tolist())
            entropy_tbl["stderr"].extend(ent_se.tolist())
            entropy_tbl["n_realizations"].extend([cfg.realizations] * times.size)
    out = {
        "memory": memory_tbl,
        "site_populations": pop_tbl,
        "site_populations_final": final_tbl,
    }
    if compute_entropy:
        out["entropy"] = entropy_tbl
    return out


def run_transport_closed(cfg: ExperimentConfig) -> dict:
    return _run_closed_family(cfg, compute_entropy=False)


def run_entropy(cfg: ExperimentConfig) -> dict:
    return _run_closed_family(cfg, compute_entropy=True)


# -- open transport ----------------------------------------------------------------


def _worker_open(payload: tuple) -> np.ndarray:
    cfg_dict, r = payload
    cfg = ExperimentConfig(**cfg_dict)
    variant = resolved_variant(cfg)
    n_exc = cfg.n_exc
    basis = build_basis(cfg.n_atoms, n_exc)
    geom = sample_positions(cfg.n_atoms, cfg.spacing, DisorderSpec(cfg.disorder_width, cfg.seed, r))
    model = build_model(geom, variant)
    op = sector_hamiltonian(model, basis)
    prop_cfg = PropagationConfig(
        t_max=cfg.t_max, n_samples=cfg.n_samples, rtol=cfg.rtol, engine=cfg.engine,
        check_every=max(1, cfg.n_samples // 20),
    )
    spec = cfg.initial_state or {"type": "left-half-random-phase"}
    if spec.get("type") == "product":
        psi0 = prepare_product([int(s) for s in spec["sites"]], basis)
    else:
        rng = substream(cfg.seed, STREAM_INITIAL, r)
        allowed = left_half_sites(cfg.n_atoms) if cfg.n_atoms > 1 else [0]
        psi0 = prepare_random_phase_superposition(allowed, n_exc, rng, basis)
    if n_exc <= cfg.master_equation_max_exc:
        res = master_equation_evolve(model, basis, _pure_density(basis, psi0), prop_cfg)
        return res.populations, []
    props = EffectivePropagators(op, prop_cfg)
    acc = np.zeros((cfg.n_samples, cfg.n_atoms))
    failures: list[str] = []
    succeeded = 0
    for t in range(cfg.trajectories):
        rng = substream(cfg.seed, STREAM_TRAJECTORY, r, t)
        try:
            rec = quantum_jump_trajectory(model, basis, psi0, prop_cfg, rng, propagators=props)
        except NumericalError as exc:
            failures.append(f"realization {r} trajectory {t}: {exc}")
            continue
        acc += rec.populations
        succeeded += 1
    if succeeded == 0:
        raise NumericalError(f"every trajectory of realization {r} failed")
    return acc / succeeded, failures


def _pure_density(basis, psi) -> DensityMatrix:
    return DensityMatrix(basis, np.outer(psi.amplitudes, psi.amplitudes.conj()))


def run_transport_open(cfg: ExperimentConfig) -> dict:
    times = PropagationConfig(t_max=cfg.t_max, n_samples=cfg.n_samples).times()
    payloads = [(cfg.to_dict(), r) for r in range(cfg.realizations)]
    outputs = _map_realizations(
        _worker_open, payloads, cfg.workers, _checkpoint_dir(cfg, "open")
    )
    pops = np.stack([out[0] for out in outputs])  # (R, T, N)
    failures = [msg for out in outputs for msg in out[1]]
    n_traj = 0 if cfg.n_exc <= cfg.master_equation_max_exc else cfg.trajectories
    if n_traj and len(failures) > 0.01 * n_traj * cfg.realizations:
        raise NumericalError(
            f"{len(failures)} of {n_traj * cfg.realizations} trajectories failed (> 1%): "
            + "; ".join(failures[:5])
        )

    imb = np.stack(
        [
            [_imbalance_or_nan(p) for p in pops[r]]
            for r in range(pops.shape[0])
        ]
    )
    imb_masked = np.ma.masked_invalid(imb)
    imb_mean = imb_masked.mean(axis=0).filled(np.nan)
    if pops.shape[0] > 1:
        imb_se = (imb_masked.std(axis=0, ddof=1) / math.sqrt(pops.shape[0])).filled(np.nan)
    else:
        imb_se = np.zeros_like(imb_mean)
    total = pops.sum(axis=2)
    tot_mean, tot_se = _mean_stderr(total)
    pop_mean, pop_se = _mean_stderr(pops)

    imbalance_tbl = {
        "time": times.tolist(),
        "value": [None if not np.isfinite(v) else float(v) for v in imb_mean],
        "defined": [int(np.isfinite(v)) for v in imb_mean],
        "stderr": [None if not np.isfinite(v) else float(v) for v in imb_se],
        "n_realizations": [cfg.realizations] * times.size,
        "n_trajectories": [n_traj] * times.size,
    }
    total_tbl = {
        "time": times.tolist(),
        "value": tot_mean.tolist(),
        "stderr": tot_se.tolist(),
        "n_realizations": [cfg.realizations] * times.size,
        "n_trajectories": [n_traj] * times.size,
    }
    pop_tbl = {k: [] for k in ("time", "site", "value", "stderr")}
    for i, t in enumerate(times):
        pop_tbl["time"].extend([t] * cfg.n_atoms)
        pop_tbl["site"].extend(range(cfg.n_atoms))
        pop_tbl["value"].extend(pop_mean[i].tolist())
        pop_tbl["stderr"].extend(pop_se[i].tolist())
    out = {
        "imbalance": imbalance_tbl,
        "total_population": total_tbl,
        "site_populations": pop_tbl,
    }
    if failures:
        out["_failures"] = failures
    return out


def _imbalance_or_nan(populations: np.ndarray) -> float:
    value = half_imbalance(populations)
    return np.nan if value is None else value


# -- revivals ------------------------------------------------------------------------


def _worker_revival(payload: tuple) -> tuple:
    cfg_dict, r = payload
    cfg = ExperimentConfig(**cfg_dict)
    return revival_realization(
        n_total=cfg.n_atoms,
        n_exc=cfg.n_exc,
        variant=resolved_variant(cfg),
        seed=cfg.seed,
        realization=r,
        n_trajectories=cfg.trajectories,
        t_max=cfg.t_max,
        revival_cfg=RevivalConfig(
            q_min=cfg.q_min,
            population_threshold=cfg.population_threshold,
            sampling_interval=cfg.sampling_interval,
        ),
        ancilla=AncillaSpec(coupling=cfg.ancilla_coupling, attach_site=cfg.ancilla_site),
        disorder_width=cfg.disorder_width,
        spacing=cfg.spacing,
        loaded_sites=cfg.loaded_sites,
        engine=cfg.engine,
        master_equation_max_exc=cfg.master_equation_max_exc,
        keep_traces=cfg.persist_traces,
    )


def run_revivals(cfg: ExperimentConfig) -> dict:
    payloads = [(cfg.to_dict(), r) for r in range(cfg.realizations)]
    results = _map_realizations(
        _worker_revival, payloads, cfg.workers, _checkpoint_dir(cfg, "revivals")
    )
    times = np.arange(0.0, cfg.t_max + 0.5 * cfg.sampling_interval, cfg.sampling_interval)
    counts_loaded: list[np.ndarray] = []
    counts_ref: list[np.ndarray] = []
    per_loaded: list[int] = []
    per_ref: list[int] = []
    traces = []
    for res in results:
        counts_loaded.extend(res[0])
        counts_ref.extend(res[1])
        per_loaded.append(res[2])
        per_ref.append(res[3])
        traces.extend(res[4])
    loaded = revival_rate_ensemble(times, counts_loaded)
    reference = revival_rate_ensemble(times, counts_ref)
    o_curve = interacting_dof(loaded, reference)

    rates_tbl = {
        "time": times.tolist(),
        "n_rev_loaded": loaded.mean_cumulative.tolist(),
        "n_rev_loaded_stderr": loaded.stderr_cumulative.tolist(),
        "rate_loaded": [None if not np.isfinite(v) else float(v) for v in loaded.rate],
        "n_rev_reference": reference.mean_cumulative.tolist(),
        "n_rev_reference_stderr": reference.stderr_cumulative.tolist(),
        "rate_reference": [None if not np.isfinite(v) else float(v) for v in reference.rate],
        "o_value": [None if not np.isfinite(v) else float(v) for v in o_curve],
        "o_defined": [int(np.isfinite(v)) for v in o_curve],
    }
    counts_tbl = {
        "realization": list(range(cfg.realizations)),
        "accepted_loaded": per_loaded,
        "accepted_reference": per_ref,
    }
    out = {"rates": rates_tbl, "realization_counts": counts_tbl}
    if cfg.persist_traces and traces:
        trace_tbl = {"time": [], "trace": [], "population": []}
        for idx, tr in enumerate(traces):
            trace_tbl["time"].extend(times.tolist())
            trace_tbl["trace"].extend([idx] * times.size)
            trace_tbl["population"].extend(np.asarray(tr).tolist())
        out["ancilla_traces"] = trace_tbl
    return out


RUNNERS = {
    "anderson-stats": run_anderson_stats,
    "saturation-curve": run_saturation_curve,
    "eigenmodes": run_eigenmodes,
    "transport-closed": run_transport_closed,
    "transport-open": run_transport_open,
    "entropy": run_entropy,
    "revivals": run_revivals,
}


def run_ensemble(cfg: ExperimentConfig) -> dict:
    """Dispatch a validated config to its pipeline."""
    if cfg.kind not in RUNNERS:
        raise ConfigError([f"kind: no runner for {cfg.kind!r}"])
    return RUNNERS[cfg.kind](cfg)
