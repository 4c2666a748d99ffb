"""Run orchestration: capacity prechecks, dispatch, persistence, manifests.

``run`` validates a config, prechecks that the largest objects it will
allocate fit the memory budget (so capacity errors surface before any
compute), dispatches to the experiment pipeline, writes every result
table as CSV stamped with the config hash and seed, and returns a
manifest describing the run. Reruns of an identical config produce
byte-identical CSV bodies.
"""

from __future__ import annotations

import dataclasses
import math
import os
import time
from dataclasses import dataclass, field

from . import __version__
from .basis import DEFAULT_MAX_DIM
from .config import (
    ExperimentConfig,
    config_from_dict,
    load_config,
    preset_library,
    validate_config,
)
from .errors import CapacityError, ConfigError
from .experiments import run_ensemble
from .io import write_csv, write_json
from .model import DEFAULT_MAX_NNZ
from .rng import STREAM_GEOMETRY, STREAM_INITIAL, STREAM_TRAJECTORY

_SEED_LIST_CAP = 1000


@dataclass
class RunManifest:
    """Provenance record of one harness run."""

    config_hash: str
    code_version: str
    kind: str
    seed: int
    realizations: int
    trajectories: int
    seed_derivation: str
    realization_spawn_keys: list[list[int]]
    wall_time_s: float
    outputs: list[str] = field(default_factory=list)
    failures: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def precheck_capacity(cfg: ExperimentConfig) -> None:
    """Raise CapacityError before any compute if dimensions cannot fit."""
    dynamic = cfg.kind in ("transport-closed", "transport-open", "entropy", "revivals")
    if not dynamic or cfg.n_atoms is None:
        return
    for n_exc in cfg.excitation_numbers():
        n = cfg.n_atoms
        dim = sum(math.comb(n, k) for k in range(min(n_exc, n) + 1))
        if dim > DEFAULT_MAX_DIM:
            raise CapacityError(
                f"basis (n_atoms={n}, n_max={n_exc}) has dim {dim} > budget {DEFAULT_MAX_DIM}"
            )
        nnz = sum(
            math.comb(n, k) * (1 + k * (n - k)) for k in range(1, min(n_exc, n) + 1)
        )
        if nnz > DEFAULT_MAX_NNZ:
            raise CapacityError(
                f"sector Hamiltonian (n_atoms={n}, n_max={n_exc}) needs {nnz} nonzeros "
                f"> budget {DEFAULT_MAX_NNZ}"
            )


def run(cfg: ExperimentConfig, output_dir: str | None = None) -> tuple[RunManifest, dict]:
    """Validate, precheck, execute and persist one experiment."""
    problems = validate_config(cfg)
    if problems:
        raise ConfigError(problems)
    precheck_capacity(cfg)
    out_dir = output_dir if output_dir is not None else cfg.output_dir

    run_cfg = cfg if out_dir == cfg.output_dir else ExperimentConfig(**{**cfg.to_dict(), "output_dir": out_dir})
    started = time.perf_counter()
    results = run_ensemble(run_cfg)
    elapsed = time.perf_counter() - started
    failures = results.pop("_failures", [])

    spawn_keys: list[list[int]] = []
    if cfg.realizations <= _SEED_LIST_CAP:
        spawn_keys = [[STREAM_GEOMETRY, r] for r in range(cfg.realizations)]
    manifest = RunManifest(
        config_hash=cfg.hash(),
        code_version=__version__,
        kind=cfg.kind,
        seed=cfg.seed,
        realizations=cfg.realizations,
        trajectories=cfg.trajectories,
        seed_derivation=(
            "numpy SeedSequence(entropy=seed, spawn_key=(stream, realization[, trajectory])) "
            f"with streams geometry={STREAM_GEOMETRY}, initial={STREAM_INITIAL}, "
            f"trajectory={STREAM_TRAJECTORY}"
        ),
        realization_spawn_keys=spawn_keys,
        wall_time_s=elapsed,
        failures=list(failures),
    )
    if out_dir is not None:
        _persist(cfg, results, manifest, out_dir)
        _clear_checkpoints(out_dir)
    return manifest, results


def _clear_checkpoints(out_dir: str) -> None:
    import shutil

    ckpt = os.path.join(out_dir, ".checkpoints")
    if os.path.isdir(ckpt):
        shutil.rmtree(ckpt)


def _persist(cfg: ExperimentConfig, results: dict, manifest: RunManifest, out_dir: str) -> None:
    meta = {
        "config_hash": cfg.hash(),
        "seed": cfg.seed,
        "kind": cfg.kind,
        "code_version": __version__,
        "n_realizations": cfg.realizations,
        "n_trajectories": cfg.trajectories,
    }
    os.makedirs(out_dir, exist_ok=True)
    for name, table in results.items():
        if not isinstance(table, dict):
            continue
        if all(not isinstance(v, (list, tuple)) for v in table.values()):
            # summary payload (for example the scaling fit): JSON, not CSV
            path = os.path.join(out_dir, f"{name}.json")
            write_json(path, {**table, "_meta": meta})
            manifest.outputs.append(path)
            continue
        if any(not isinstance(v, (list, tuple)) for v in table.values()):
            path = os.path.join(out_dir, f"{name}.json")
            write_json(path, {**table, "_meta": meta})
            manifest.outputs.append(path)
            continue
        path = os.path.join(out_dir, f"{name}.csv")
        write_csv(path, table, meta=meta)
        manifest.outputs.append(path)
    config_path = os.path.join(out_dir, "config.json")
    with open(config_path, "w", encoding="utf-8") as fh:
        fh.write(cfg.to_json())
        fh.write("\n")
    manifest.outputs.append(config_path)
    manifest_path = os.path.join(out_dir, "manifest.json")
    write_json(manifest_path, manifest.to_dict())
    manifest.outputs.append(manifest_path)


__all__ = [
    "ExperimentConfig",
    "RunManifest",
    "config_from_dict",
    "load_config",
    "precheck_capacity",
    "preset_library",
    "run",
]
