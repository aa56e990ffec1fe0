"""Command line entry point ``msexp``."""
import argparse
import logging
import os
import sys

from .config import load_config, save_config
from .errors import ConfigError, InputError, NumericalError
from .experiments import run_diagnostics, run_reference, run_sweep, setup_problem
from .export import export_cloud_csv, export_field_vtk, export_json, export_table_csv

log = logging.getLogger("mfgmsfem")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3


def _cmd_reference(config, out):
    problem = setup_problem(config)
    result = run_reference(config, problem, cache_dir=os.path.join(out, "cache"))
    export_field_vtk(problem.mesh.to_full(result.final), problem.mesh,
                     os.path.join(out, "field_reference.vtk"), kappa=problem.kappa)


def _cmd_sweep(config, out):
    problem = setup_problem(config)
    keep = (config.sweep_gamma, max(config.M), config.sweep_nt)
    result = run_sweep(config, problem, cache_dir=os.path.join(out, "cache"), keep_fields=keep)
    for (method, kind), table in sorted(result.tables.items()):
        export_table_csv(table, os.path.join(out, f"errors_{method}_{kind}.csv"))
    for method, fld in sorted(result.fields.items()):
        export_field_vtk(fld, problem.mesh, os.path.join(out, f"field_{method}.vtk"),
                         kappa=problem.kappa)
    export_field_vtk(problem.mesh.to_full(result.reference), problem.mesh,
                     os.path.join(out, "field_reference.vtk"), kappa=problem.kappa)


def _cmd_pointcloud(config, out):
    from .coarsening import with_radii
    from .experiments import build_cloud

    problem = setup_problem(config)
    cloud = build_cloud(problem, config)
    export_cloud_csv(with_radii(cloud, config.gamma[0]), os.path.join(out, "cloud.csv"))


def _cmd_diag(config, out):
    from .coarsening import with_radii

    cloud, reports = run_diagnostics(config)
    export_cloud_csv(with_radii(cloud, config.gamma[0]), os.path.join(out, "cloud.csv"))
    export_json(reports, os.path.join(out, "diag.json"))


COMMANDS = {
    "reference": _cmd_reference,
    "sweep": _cmd_sweep,
    "pointcloud": _cmd_pointcloud,
    "diag": _cmd_diag,
}


def build_parser():
    parser = argparse.ArgumentParser(prog="msexp", description="Meshfree multiscale experiments")
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", required=True, help="JSON configuration file")
    parser.add_argument("--out", default=None, help="output directory (overrides the config)")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        config = load_config(args.config)
        out = args.out or config.output_dir
        os.makedirs(out, exist_ok=True)
        save_config(config, os.path.join(out, "config_used.json"))
        COMMANDS[args.command](config, out)
    except (ConfigError, InputError) as exc:
        print(f"msexp: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"msexp: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
