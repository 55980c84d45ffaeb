"""Command-line front end.

Subcommands: run-transient, cond-sweep, validate-fd, run-thermal,
dump-mesh.  The --scenario flag takes a YAML file path or a preset name
(academic-bars, academic-mini, planar-coil, planar-coil-thermal).

Exit codes: 0 success, 2 configuration error, 3 solver failure.
"""

import argparse
import os
import sys

from . import runner
from .linsolve import NumericallySingularError
from .mesh import dump_entity_tables
from .scenario import PRESETS, ScenarioError, load_scenario
from .vtkio import write_vtk

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3


def _bool(text):
    value = text.strip().lower()
    if value in ("true", "1", "yes", "on"):
        return True
    if value in ("false", "0", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {text!r}")


def _resolve_scenario(args):
    name = args.scenario
    if name in PRESETS:
        scenario = PRESETS[name]()
    elif os.path.exists(name):
        scenario = load_scenario(name)
    else:
        raise ScenarioError(
            [f"--scenario {name!r} is neither a file nor a preset "
             f"{sorted(PRESETS)}"]
        )
    return scenario.with_overrides(
        dt=args.dt, n_steps=args.steps, stabilized=args.stabilized
    )


def _add_common(p):
    p.add_argument("--scenario", required=True,
                   help="scenario YAML path or preset name")
    p.add_argument("--out", default=None, help="output directory")
    p.add_argument("--stabilized", type=_bool, default=None,
                   help="override the stabilized flag (true/false)")
    p.add_argument("--dt", type=float, default=None, help="override time step")
    p.add_argument("--steps", type=int, default=None, help="override step count")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="twostepfem",
        description="Two-step time-domain Maxwell solver",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run-transient", help="run a transient simulation")
    _add_common(p)

    p = sub.add_parser("cond-sweep", help="condition numbers over time step size")
    _add_common(p)
    p.add_argument("--dts", default=None,
                   help="comma-separated time steps (default: decades 1e-10..1e10)")

    p = sub.add_parser("validate-fd", help="compare against the phasor solution")
    _add_common(p)
    p.add_argument("--steps-per-period", type=int, default=100)

    p = sub.add_parser("run-thermal", help="transient with thermal coupling")
    _add_common(p)

    p = sub.add_parser("dump-mesh", help="write entity tables and geometry")
    _add_common(p)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    out = args.out or f"out-{args.command}"
    try:
        scenario = _resolve_scenario(args)
        if args.command == "run-transient":
            result = runner.run_transient(scenario, out_dir=out)
            print(f"completed {result.summary['steps']} steps -> {out}")
        elif args.command == "cond-sweep":
            dts = None
            if args.dts is not None:
                dts = [float(v) for v in args.dts.split(",") if v.strip()]
            os.makedirs(out, exist_ok=True)
            path = os.path.join(out, "cond_sweep.csv")
            rows = runner.run_cond_sweep(scenario, dts, out_path=path)
            print(f"wrote {len(rows)} rows -> {path}")
        elif args.command == "validate-fd":
            os.makedirs(out, exist_ok=True)
            path = os.path.join(out, "fd_error.csv")
            times, errors = runner.run_fd_validation(
                scenario, steps_per_period=args.steps_per_period, out_path=path
            )
            print(f"max relative L2 error {errors.max():.3e} -> {path}")
        elif args.command == "run-thermal":
            result = runner.run_thermal(scenario, out_dir=out)
            print(
                f"completed {result.summary['steps']} steps, final temperature "
                f"{result.summary['final_temperature']:.1f} degC -> {out}"
            )
        elif args.command == "dump-mesh":
            mesh = scenario.build_mesh()
            os.makedirs(out, exist_ok=True)
            dump_entity_tables(mesh, out)
            write_vtk(
                mesh,
                {"region": mesh.cell_region.astype(float)},
                os.path.join(out, "mesh.vtk"),
            )
            print(f"wrote entity tables and mesh.vtk -> {out}")
    except ScenarioError as exc:
        for e in exc.errors:
            print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (runner.SolverFailure, NumericallySingularError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        last = getattr(exc, "last_good_step", None)
        if last is not None and last >= 0:
            print(f"last completed step: {last}", file=sys.stderr)
        return EXIT_SOLVER
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
