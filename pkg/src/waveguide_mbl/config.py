"""Declarative experiment configurations and the preset library.

A config is a flat record serialized as JSON with a versioned schema.
Validation reports every violated field by path. The config hash that
stamps output files covers the scientific content only (``output_dir``
and ``workers`` are excluded, so relocating or parallelizing a run does
not change its identity).
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field

from .errors import ConfigError
from .io import config_hash
from .model import DEFAULT_SPACING, WaveguideVariant

SCHEMA_VERSION = 1

KINDS = (
    "anderson-stats",
    "saturation-curve",
    "eigenmodes",
    "transport-closed",
    "transport-open",
    "entropy",
    "revivals",
)

_HASH_EXCLUDED = ("output_dir", "workers")


@dataclass
class ExperimentConfig:
    kind: str
    schema_version: int = SCHEMA_VERSION
    seed: int = 2026
    output_dir: str | None = None
    workers: int = 1

    # geometry / model
    n_atoms: int | None = None
    n_atoms_list: list[int] | None = None
    spacing: float = DEFAULT_SPACING
    disorder_width: float = 1.0
    variant: str | None = None

    # excitation content / initial state
    n_exc: int | None = None
    n_exc_list: list[int] | None = None
    initial_state: dict | None = None

    # solver
    t_max: float = 100.0
    n_samples: int = 400
    rtol: float = 1e-8
    engine: str = "auto"
    master_equation_max_exc: int = 2

    # ensembles
    realizations: int = 50
    trajectories: int = 150

    # scattering scans
    deltas: list[float] | None = None
    omegas: list[float] | None = None
    rho_grid: list[float] | None = None

    # ancilla / revival settings
    ancilla_coupling: float = 0.5
    ancilla_site: int = 2
    q_min: float = 0.4
    population_threshold: float = 0.25
    sampling_interval: float = 0.05
    loaded_sites: list[int] | None = None
    persist_traces: bool = False

    # observables
    entropy_cut: int | None = None

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def hash(self) -> str:
        d = {k: v for k, v in self.to_dict().items() if k not in _HASH_EXCLUDED}
        return config_hash(d)

    def variant_enum(self) -> WaveguideVariant:
        return WaveguideVariant(self.variant)

    def excitation_numbers(self) -> list[int]:
        if self.n_exc_list is not None:
            return list(self.n_exc_list)
        if self.n_exc is not None:
            return [self.n_exc]
        raise ConfigError(["n_exc: one of n_exc or n_exc_list is required"])


def config_from_dict(data: dict) -> ExperimentConfig:
    if not isinstance(data, dict):
        raise ConfigError(["config: expected a JSON object"])
    known = {f.name for f in dataclasses.fields(ExperimentConfig)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError([f"{k}: unknown field" for k in unknown])
    if "kind" not in data:
        raise ConfigError(["kind: required field is missing"])
    cfg = ExperimentConfig(**data)
    problems = validate_config(cfg)
    if problems:
        raise ConfigError(problems)
    return cfg


def load_config(text: str) -> ExperimentConfig:
    """Parse and validate a JSON config document."""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError([f"config: invalid JSON ({exc.msg} at line {exc.lineno})"]) from exc
    return config_from_dict(data)


def validate_config(cfg: ExperimentConfig) -> list[str]:
    """All schema problems of a config, each prefixed by its field path."""
    p: list[str] = []
    if cfg.schema_version != SCHEMA_VERSION:
        p.append(f"schema_version: expected {SCHEMA_VERSION}, got {cfg.schema_version}")
    if cfg.kind not in KINDS:
        p.append(f"kind: {cfg.kind!r} is not one of {sorted(KINDS)}")
        return p
    if cfg.realizations < 1:
        p.append("realizations: must be >= 1")
    if cfg.trajectories < 1:
        p.append("trajectories: must be >= 1")
    if cfg.workers < 1:
        p.append("workers: must be >= 1")
    if not 0.0 <= cfg.disorder_width <= 1.0:
        p.append("disorder_width: must be in [0, 1]")
    if cfg.spacing <= 0:
        p.append("spacing: must be > 0")
    if cfg.t_max <= 0:
        p.append("t_max: must be > 0")
    if cfg.n_samples < 2:
        p.append("n_samples: must be >= 2")
    if cfg.engine not in ("auto", "dense", "expm"):
        p.append(f"engine: {cfg.engine!r} is not one of ['auto', 'dense', 'expm']")

    def need_atoms():
        if cfg.n_atoms is None or cfg.n_atoms < 1:
            p.append("n_atoms: must be a positive integer")

    def need_exc(limit: int | None = None):
        try:
            ks = cfg.excitation_numbers()
        except ConfigError as exc:
            p.extend(exc.problems)
            return
        for k in ks:
            if k < 1:
                p.append(f"n_exc: {k} must be >= 1")
            elif limit is not None and k > limit:
                p.append(f"n_exc: {k} exceeds n_atoms={limit}")

    if cfg.kind == "anderson-stats":
        need_atoms()
        if not cfg.deltas:
            p.append("deltas: at least one detuning is required")
    elif cfg.kind == "saturation-curve":
        if not cfg.deltas:
            p.append("deltas: at least one detuning is required")
        if not cfg.omegas:
            p.append("omegas: a drive-amplitude grid is required")
        if cfg.rho_grid is not None and any(not 0 <= r < 0.5 for r in cfg.rho_grid):
            p.append("rho_grid: populations must be in [0, 0.5)")
    elif cfg.kind == "eigenmodes":
        if cfg.n_atoms is None and not cfg.n_atoms_list:
            p.append("n_atoms: n_atoms or n_atoms_list is required")
        if cfg.variant is not None:
            _check_variant(cfg, p)
    elif cfg.kind in ("transport-closed", "entropy"):
        need_atoms()
        if cfg.n_atoms is not None:
            need_exc(cfg.n_atoms)
        v = _check_variant(cfg, p, default="full-hermitian")
        if v is not None and v.is_open:
            p.append(f"variant: {v.value} is open; closed transport needs a Hermitian variant")
        if cfg.kind == "entropy" and cfg.entropy_cut is not None:
            if cfg.n_atoms is not None and not 1 <= cfg.entropy_cut <= cfg.n_atoms - 1:
                p.append(f"entropy_cut: must be in 1..{cfg.n_atoms - 1}")
    elif cfg.kind == "transport-open":
        need_atoms()
        if cfg.n_atoms is not None:
            need_exc(cfg.n_atoms)
        v = _check_variant(cfg, p, default="half-open")
        if v is not None and not v.is_open:
            p.append(f"variant: {v.value} has no dissipation; open transport needs an open variant")
    elif cfg.kind == "revivals":
        need_atoms()
        if cfg.n_atoms is not None:
            need_exc(cfg.n_atoms)
        v = _check_variant(cfg, p, default="half-hermitian")
        if v is not None and not v.is_half:
            p.append(f"variant: {v.value}; revivals run on the half waveguide")
        if cfg.n_atoms is not None and not 0 <= cfg.ancilla_site < cfg.n_atoms - 1:
            p.append(f"ancilla_site: must index a chain atom in 0..{cfg.n_atoms - 2}")
        if cfg.q_min <= 0:
            p.append("q_min: must be > 0")
        if not 0 < cfg.population_threshold < 1:
            p.append("population_threshold: must be in (0, 1)")
        if cfg.sampling_interval <= 0 or cfg.sampling_interval > cfg.t_max / 2:
            p.append("sampling_interval: must be in (0, t_max/2]")
        if cfg.loaded_sites is not None:
            ks = cfg.n_exc if cfg.n_exc is not None else -1
            if len(cfg.loaded_sites) != max(ks - 1, 0):
                p.append("loaded_sites: must list exactly n_exc - 1 chain sites")
    return p


def _check_variant(cfg: ExperimentConfig, problems: list[str], default: str | None = None):
    value = cfg.variant if cfg.variant is not None else default
    if value is None:
        problems.append("variant: required for this kind")
        return None
    try:
        return WaveguideVariant(value)
    except ValueError:
        problems.append(
            f"variant: {value!r} is not one of {[v.value for v in WaveguideVariant]}"
        )
        return None


def resolved_variant(cfg: ExperimentConfig) -> WaveguideVariant:
    defaults = {
        "transport-closed": "full-hermitian",
        "entropy": "full-hermitian",
        "transport-open": "half-open",
        "revivals": "half-hermitian",
        "eigenmodes": "full-open",
    }
    return WaveguideVariant(cfg.variant or defaults.get(cfg.kind, "full-open"))


# -- preset library --------------------------------------------------------------


def preset_library() -> dict[str, ExperimentConfig]:
    """Named configs reproducing the reference figure panels.

    Ensemble sizes follow the stated minima and can be overridden on the
    command line. Names track the figure panels they reproduce.
    """
    lib: dict[str, ExperimentConfig] = {}

    lib["fig2ab-profiles"] = ExperimentConfig(
        kind="eigenmodes", n_atoms=200, realizations=1, seed=2026
    )
    lib["fig2c-spectrum-n50"] = ExperimentConfig(
        kind="eigenmodes", n_atoms=50, realizations=200, seed=2026
    )
    lib["fig2d-decay-scaling"] = ExperimentConfig(
        kind="eigenmodes",
        n_atoms=50,
        n_atoms_list=[25, 50, 100, 200],
        realizations=100,
        seed=2026,
    )
    lib["fig3-overlap-n150"] = ExperimentConfig(
        kind="eigenmodes", n_atoms=150, realizations=1, seed=2026
    )
    lib["anderson-logT-n50"] = ExperimentConfig(
        kind="anderson-stats", n_atoms=50, deltas=[1.0], realizations=10_000, seed=2026
    )
    lib["figSI-saturation"] = ExperimentConfig(
        kind="saturation-curve",
        deltas=[1.0],
        omegas=[0.05 * i for i in range(0, 101)],
        rho_grid=[0.005 * i for i in range(0, 100)],
        seed=2026,
    )
    lib["fig4-closed-transport"] = ExperimentConfig(
        kind="transport-closed", n_atoms=30, n_exc_list=[1, 3, 5], realizations=50, seed=2026
    )
    lib["fig4-closed-transport-ordered"] = ExperimentConfig(
        kind="transport-closed",
        n_atoms=30,
        n_exc_list=[1, 3, 5],
        realizations=1,
        disorder_width=0.0,
        seed=2026,
    )
    lib["fig5-entropy-n30"] = ExperimentConfig(
        kind="entropy", n_atoms=30, n_exc_list=[1, 2, 3, 4, 5], realizations=50, seed=2026
    )
    lib["fig6-deloc-transport-n20"] = ExperimentConfig(
        kind="transport-closed", n_atoms=20, n_exc_list=[3, 5, 7], realizations=50, seed=2026
    )
    lib["fig6-deloc-entropy-n20"] = ExperimentConfig(
        kind="entropy",
        n_atoms=20,
        n_exc_list=[1, 2, 3, 4, 5, 6, 7],
        realizations=50,
        seed=2026,
    )
    for n_atoms, n_exc in ((24, 1), (24, 2), (24, 4), (16, 6)):
        lib[f"fig6-open-n{n_atoms}-exc{n_exc}"] = ExperimentConfig(
            kind="transport-open",
            n_atoms=n_atoms,
            n_exc=n_exc,
            realizations=50,
            trajectories=150,
            seed=2026,
        )
    lib["fig6-open-n16-exc6-ordered"] = ExperimentConfig(
        kind="transport-open",
        n_atoms=16,
        n_exc=6,
        realizations=1,
        trajectories=150,
        disorder_width=0.0,
        seed=2026,
    )
    lib["fig7bc-revival-traces"] = ExperimentConfig(
        kind="revivals",
        n_atoms=14,
        n_exc=3,
        variant="half-hermitian",
        loaded_sites=[0, 3],
        realizations=3,
        t_max=300.0,
        persist_traces=True,
        seed=2026,
    )
    for n_exc in (2, 3, 4, 6):
        lib[f"fig7d-O-hermitian-n14-exc{n_exc}"] = ExperimentConfig(
            kind="revivals",
            n_atoms=14,
            n_exc=n_exc,
            variant="half-hermitian",
            realizations=50,
            t_max=300.0,
            seed=2026,
        )
        # Full-scale reproduction; compute-heavy, not exercised by the gate.
        lib[f"fig7d-O-hermitian-n24-exc{n_exc}-extended"] = ExperimentConfig(
            kind="revivals",
            n_atoms=24,
            n_exc=n_exc,
            variant="half-hermitian",
            realizations=50,
            t_max=300.0,
            seed=2026,
        )
        lib[f"fig7e-O-open-n14-exc{n_exc}"] = ExperimentConfig(
            kind="revivals",
            n_atoms=14,
            n_exc=n_exc,
            variant="half-open",
            realizations=50,
            trajectories=500,
            t_max=300.0,
            seed=2026,
        )
    lib["fig7-O-n17-exc-sweep"] = ExperimentConfig(
        kind="revivals",
        n_atoms=17,
        n_exc=4,
        variant="half-hermitian",
        realizations=50,
        t_max=300.0,
        seed=2026,
    )
    lib["single-atom-decay"] = ExperimentConfig(
        kind="transport-open",
        n_atoms=1,
        n_exc=1,
        variant="full-open",
        realizations=1,
        trajectories=1,
        t_max=10.0,
        n_samples=101,
        initial_state={"type": "product", "sites": [0]},
        seed=2026,
    )
    lib["smoke-closed-n16-exc2"] = ExperimentConfig(
        kind="transport-closed", n_atoms=16, n_exc=2, realizations=20, seed=2026
    )
    lib["smoke-entropy-n14"] = ExperimentConfig(
        kind="entropy", n_atoms=14, n_exc_list=[3, 7], realizations=20, seed=2026
    )
    lib["smoke-open-n12-exc4"] = ExperimentConfig(
        kind="transport-open",
        n_atoms=12,
        n_exc=4,
        realizations=10,
        trajectories=50,
        seed=2026,
    )
    return lib
