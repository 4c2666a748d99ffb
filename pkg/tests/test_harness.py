import json

import numpy as np
import pytest

from waveguide_mbl.cli import main as cli_main
from waveguide_mbl.config import (
    ExperimentConfig,
    load_config,
    preset_library,
    validate_config,
)
from waveguide_mbl.errors import CapacityError, ConfigError
from waveguide_mbl.experiments import equidistant_sites, run_ensemble
from waveguide_mbl.harness import precheck_capacity, run


def test_config_json_roundtrip():
    cfg = preset_library()["fig4-closed-transport"]
    text = cfg.to_json()
    restored = load_config(text)
    assert restored == cfg
    assert load_config(restored.to_json()) == restored  # text-form fixed point
    assert restored.hash() == cfg.hash()


def test_config_hash_ignores_output_location():
    base = preset_library()["anderson-logT-n50"]
    moved = ExperimentConfig(**{**base.to_dict(), "output_dir": "/tmp/x", "workers": 4})
    assert moved.hash() == base.hash()
    reseeded = ExperimentConfig(**{**base.to_dict(), "seed": 1})
    assert reseeded.hash() != base.hash()


def test_schema_violations_report_field_paths():
    with pytest.raises(ConfigError) as err:
        load_config(json.dumps({"kind": "transport-open", "n_atoms": -3, "n_exc": 0}))
    text = str(err.value)
    assert "n_atoms" in text and "n_exc" in text
    with pytest.raises(ConfigError) as err:
        load_config(json.dumps({"kind": "nope"}))
    assert "kind" in str(err.value)
    with pytest.raises(ConfigError) as err:
        load_config(json.dumps({"kind": "entropy", "n_atoms": 8, "n_exc": 2, "bogus": 1}))
    assert "bogus" in str(err.value)
    with pytest.raises(ConfigError):
        load_config("{not json")


def test_validate_open_variant_mismatch():
    cfg = ExperimentConfig(kind="transport-closed", n_atoms=8, n_exc=2, variant="half-open")
    assert any("variant" in p for p in validate_config(cfg))
    cfg = ExperimentConfig(kind="transport-open", n_atoms=8, n_exc=2, variant="full-hermitian")
    assert any("variant" in p for p in validate_config(cfg))


def test_capacity_precheck_fires_before_compute():
    cfg = ExperimentConfig(kind="entropy", n_atoms=34, n_exc=17, realizations=1)
    with pytest.raises(CapacityError):
        precheck_capacity(cfg)


def test_equidistant_sites():
    assert equidistant_sites(30, 3) == [5, 15, 25]
    assert equidistant_sites(30, 1) == [15]
    assert len(set(equidistant_sites(20, 7))) == 7


def test_single_atom_decay_preset(tmp_path):
    cfg = preset_library()["single-atom-decay"]
    manifest, results = run(cfg, output_dir=str(tmp_path / "out"))
    tot = results["total_population"]
    assert np.max(np.abs(np.array(tot["value"]) - np.exp(-np.array(tot["time"])))) < 1e-10
    assert (tmp_path / "out" / "manifest.json").exists()
    body = (tmp_path / "out" / "total_population.csv").read_text()
    assert f"# config_hash: {cfg.hash()}" in body
    assert "# seed: 2026" in body


def test_rerun_byte_identical(tmp_path):
    cfg = ExperimentConfig(
        kind="transport-open", n_atoms=6, n_exc=2, realizations=3,
        t_max=10.0, n_samples=21, seed=11,
    )
    run(cfg, output_dir=str(tmp_path / "a"))
    run(cfg, output_dir=str(tmp_path / "b"))
    for name in ("imbalance.csv", "total_population.csv", "site_populations.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_parallel_workers_match_serial():
    base = dict(kind="transport-open", n_atoms=6, n_exc=3, realizations=4,
                trajectories=10, t_max=10.0, n_samples=11, seed=5)
    serial = run_ensemble(ExperimentConfig(**base, workers=1))
    parallel = run_ensemble(ExperimentConfig(**base, workers=3))
    assert serial["total_population"]["value"] == parallel["total_population"]["value"]
    assert serial["imbalance"]["value"] == parallel["imbalance"]["value"]


def test_preset_library_contents():
    lib = preset_library()
    assert len(lib) >= 10
    for name, cfg in lib.items():
        problems = validate_config(cfg)
        assert problems == [], f"{name}: {problems}"
    scaling = lib["fig2d-decay-scaling"]
    assert scaling.n_atoms_list == [25, 50, 100, 200]
    assert lib["fig6-open-n16-exc6"].n_exc == 6
    assert lib["fig7bc-revival-traces"].loaded_sites == [0, 3]
    assert lib["anderson-logT-n50"].realizations == 10_000


def test_eigenmodes_pipeline_tables(tmp_path):
    cfg = ExperimentConfig(kind="eigenmodes", n_atoms=12, realizations=3, seed=4,
                           n_atoms_list=[8, 12], output_dir=str(tmp_path / "eig"))
    manifest, results = run(cfg)
    assert set(results) >= {"profiles", "overlap", "spectrum", "scaling"}
    spectrum = results["spectrum"]
    assert len(spectrum["mode"]) == 12
    assert (tmp_path / "eig" / "scaling.json").exists()
    data = json.loads((tmp_path / "eig" / "scaling.json").read_text())
    assert data["n_atoms"] == [8, 12]


def test_undefined_imbalance_gets_sentinel_column(tmp_path):
    # fully decayed single atom: late-time imbalance is undefined
    cfg = ExperimentConfig(
        kind="transport-open", n_atoms=1, n_exc=1, realizations=1,
        t_max=60.0, n_samples=13, seed=3, variant="full-open",
        initial_state={"type": "product", "sites": [0]},
    )
    manifest, results = run(cfg, output_dir=str(tmp_path / "o"))
    imb = results["imbalance"]
    assert 0 in imb["defined"]
    lines = (tmp_path / "o" / "imbalance.csv").read_text().splitlines()
    header = [l for l in lines if not l.startswith("#")][0].split(",")
    i_val, i_def = header.index("value"), header.index("defined")
    rows = [l.split(",") for l in lines if not l.startswith("#")][1:]
    undefined_rows = [r for r in rows if r[i_def] == "0"]
    assert undefined_rows and all(r[i_val] == "" for r in undefined_rows)
    assert not any("nan" in r[i_val].lower() for r in rows)


def test_cli_exit_codes(tmp_path, capsys):
    rc = cli_main(["presets", "list"])
    assert rc == 0
    assert "fig4-closed-transport" in capsys.readouterr().out

    rc = cli_main([
        "anderson-stats", "--n-atoms", "10", "--delta", "1.0",
        "--realizations", "50", "--seed", "1",
        "--output-dir", str(tmp_path / "cli"),
    ])
    assert rc == 0
    assert (tmp_path / "cli" / "anderson.csv").exists()

    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"kind": "entropy", "n_atoms": 8}))
    assert cli_main(["run", str(bad)]) == 2
    assert cli_main(["run", str(tmp_path / "missing.json")]) == 2

    big = tmp_path / "big.json"
    big.write_text(json.dumps({"kind": "entropy", "n_atoms": 34, "n_exc": 17}))
    assert cli_main(["run", str(big)]) == 3


def test_cli_run_config_file(tmp_path):
    cfg_path = tmp_path / "cfg.json"
    cfg = ExperimentConfig(kind="saturation-curve", deltas=[1.0], omegas=[0.0, 1.0, 2.0],
                           rho_grid=[0.0, 0.25], seed=9)
    cfg_path.write_text(cfg.to_json())
    rc = cli_main(["run", str(cfg_path), "--output-dir", str(tmp_path / "sat")])
    assert rc == 0
    assert (tmp_path / "sat" / "saturation.csv").exists()
    assert (tmp_path / "sat" / "nloc_vs_rho.csv").exists()


def test_manifest_records_provenance(tmp_path):
    cfg = ExperimentConfig(kind="anderson-stats", n_atoms=8, deltas=[0.5],
                           realizations=20, seed=13)
    manifest, _ = run(cfg, output_dir=str(tmp_path / "m"))
    data = json.loads((tmp_path / "m" / "manifest.json").read_text())
    assert data["config_hash"] == cfg.hash()
    assert data["seed"] == 13
    assert data["realizations"] == 20
    assert "SeedSequence" in data["seed_derivation"]
    assert len(data["realization_spawn_keys"]) == 20
