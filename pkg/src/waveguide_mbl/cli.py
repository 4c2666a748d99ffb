"""Command-line interface.

Exit codes: 0 success, 2 config error, 3 capacity error, 4 numerical
failure. Every subcommand accepts ensemble-size overrides, a master
seed, an output directory and a worker count.
"""

from __future__ import annotations

import argparse
import sys

from .config import ExperimentConfig, load_config, preset_library
from .errors import CapacityError, ConfigError, NumericalError
from .harness import run
from .model import DEFAULT_SPACING


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, default=2026, help="master seed")
    parser.add_argument("--output-dir", default=None, help="directory for CSV/JSON outputs")
    parser.add_argument("--realizations", type=int, default=None, help="override ensemble size")
    parser.add_argument("--trajectories", type=int, default=None, help="override trajectory count")
    parser.add_argument("--workers", type=int, default=1, help="process pool size")
    parser.add_argument("--spacing", type=float, default=DEFAULT_SPACING)
    parser.add_argument("--disorder-width", type=float, default=1.0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="waveguide-mbl",
        description="Disordered waveguide-QED spin-model simulator",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("anderson-stats", help="log-transmittance disorder statistics")
    _add_common(p)
    p.add_argument("--n-atoms", type=int, required=True)
    p.add_argument("--delta", type=float, action="append", required=True,
                   help="detuning (repeatable)")
    p.set_defaults(realizations_default=10_000)

    p = sub.add_parser("saturation-curve", help="driven-atom steady state and N_loc")
    _add_common(p)
    p.add_argument("--delta", type=float, action="append", required=True)
    p.add_argument("--omega-max", type=float, default=5.0)
    p.add_argument("--omega-points", type=int, default=101)
    p.add_argument("--rho-points", type=int, default=100)

    p = sub.add_parser("eigenmodes", help="single-excitation spectra, profiles, overlap")
    _add_common(p)
    p.add_argument("--n-atoms", type=int, required=True)
    p.add_argument("--scaling-sizes", type=int, nargs="*", default=None,
                   help="extra sizes for the delocalized-fraction fit")
    p.add_argument("--variant", default="full-open")
    p.set_defaults(realizations_default=200)

    p = sub.add_parser("transport-closed", help="Hermitian transport and memory")
    _add_common(p)
    p.add_argument("--n-atoms", type=int, required=True)
    p.add_argument("--n-exc", type=int, action="append", required=True)
    p.add_argument("--t-max", type=float, default=100.0)
    p.add_argument("--variant", default="full-hermitian")
    p.set_defaults(realizations_default=50)

    p = sub.add_parser("entropy", help="half-chain entanglement entropy growth")
    _add_common(p)
    p.add_argument("--n-atoms", type=int, required=True)
    p.add_argument("--n-exc", type=int, action="append", required=True)
    p.add_argument("--t-max", type=float, default=100.0)
    p.add_argument("--variant", default="full-hermitian")
    p.set_defaults(realizations_default=50)

    p = sub.add_parser("transport-open", help="dissipative half-waveguide transport")
    _add_common(p)
    p.add_argument("--n-atoms", type=int, required=True)
    p.add_argument("--n-exc", type=int, required=True)
    p.add_argument("--t-max", type=float, default=100.0)
    p.add_argument("--variant", default="half-open")
    p.set_defaults(realizations_default=50)

    p = sub.add_parser("revivals", help="ancilla revival rates and O(t)")
    _add_common(p)
    p.add_argument("--n-atoms", type=int, required=True, help="total size incl. ancilla")
    p.add_argument("--n-exc", type=int, required=True, help="total excitations incl. ancilla")
    p.add_argument("--t-max", type=float, default=300.0)
    p.add_argument("--variant", default="half-hermitian")
    p.add_argument("--loaded-sites", type=int, nargs="*", default=None)
    p.add_argument("--persist-traces", action="store_true")
    p.set_defaults(realizations_default=50)

    p = sub.add_parser("presets", help="list or run the figure presets")
    psub = p.add_subparsers(dest="preset_command", required=True)
    psub.add_parser("list", help="print preset names")
    pr = psub.add_parser("run", help="run one preset")
    pr.add_argument("name")
    _add_common(pr)

    p = sub.add_parser("run", help="run a JSON config file")
    p.add_argument("config_file")
    p.add_argument("--output-dir", default=None)
    p.add_argument("--workers", type=int, default=None)
    return parser


def _config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    realizations = args.realizations
    if realizations is None:
        realizations = getattr(args, "realizations_default", 50)
    common = dict(
        seed=args.seed,
        output_dir=args.output_dir,
        realizations=realizations,
        workers=args.workers,
        spacing=args.spacing,
        disorder_width=args.disorder_width,
    )
    if args.trajectories is not None:
        common["trajectories"] = args.trajectories
    cmd = args.command
    if cmd == "anderson-stats":
        return ExperimentConfig(kind="anderson-stats", n_atoms=args.n_atoms,
                                deltas=args.delta, **common)
    if cmd == "saturation-curve":
        omegas = [args.omega_max * i / (args.omega_points - 1) for i in range(args.omega_points)]
        rho_grid = [0.5 * i / args.rho_points for i in range(args.rho_points)]
        return ExperimentConfig(kind="saturation-curve", deltas=args.delta,
                                omegas=omegas, rho_grid=rho_grid, **common)
    if cmd == "eigenmodes":
        return ExperimentConfig(kind="eigenmodes", n_atoms=args.n_atoms,
                                n_atoms_list=args.scaling_sizes or None,
                                variant=args.variant, **common)
    if cmd in ("transport-closed", "entropy"):
        return ExperimentConfig(kind=cmd, n_atoms=args.n_atoms, n_exc_list=args.n_exc,
                                t_max=args.t_max, variant=args.variant, **common)
    if cmd == "transport-open":
        return ExperimentConfig(kind=cmd, n_atoms=args.n_atoms, n_exc=args.n_exc,
                                t_max=args.t_max, variant=args.variant, **common)
    if cmd == "revivals":
        return ExperimentConfig(kind="revivals", n_atoms=args.n_atoms, n_exc=args.n_exc,
                                t_max=args.t_max, variant=args.variant,
                                loaded_sites=args.loaded_sites,
                                persist_traces=args.persist_traces, **common)
    raise ConfigError([f"command: unknown {cmd!r}"])


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "presets":
            if args.preset_command == "list":
                for name in sorted(preset_library()):
                    print(name)
                return 0
            presets = preset_library()
            if args.name not in presets:
                raise ConfigError([f"preset: unknown name {args.name!r}"])
            cfg = presets[args.name]
            overrides = dict(seed=args.seed, workers=args.workers)
            if args.output_dir is not None:
                overrides["output_dir"] = args.output_dir
            if args.realizations is not None:
                overrides["realizations"] = args.realizations
            if args.trajectories is not None:
                overrides["trajectories"] = args.trajectories
            cfg = ExperimentConfig(**{**cfg.to_dict(), **overrides})
            manifest, _ = run(cfg)
        elif args.command == "run":
            try:
                with open(args.config_file, encoding="utf-8") as fh:
                    text = fh.read()
            except OSError as exc:
                raise ConfigError([f"config_file: {exc}"]) from exc
            cfg = load_config(text)
            if args.workers is not None:
                cfg.workers = args.workers
            manifest, _ = run(cfg, output_dir=args.output_dir)
        else:
            cfg = _config_from_args(args)
            manifest, _ = run(cfg)
        print(f"ok kind={manifest.kind} hash={manifest.config_hash} "
              f"wall={manifest.wall_time_s:.2f}s outputs={len(manifest.outputs)}")
        return 0
    except ConfigError as exc:
        for problem in exc.problems:
            print(f"config error: {problem}", file=sys.stderr)
        return 2
    except CapacityError as exc:
        print(f"capacity error: {exc}", file=sys.stderr)
        return 3
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
