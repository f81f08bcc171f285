"""Command-line entry point: ``modspace <command> ...``."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Optional, Sequence

from modspace.classical import trajectory, write_trajectory
from modspace.errors import ModspaceError
from modspace.fields import read_complex_field, write_complex_field, write_phase_space_field
from modspace.harness.config import ExperimentConfig, load_config
from modspace.harness.initial import build_initial, build_window
from modspace.harness.plot import plot_csv
from modspace.harness.verify import format_summary, verify_all
from modspace.logging import configure_logging, get_logger
from modspace.modulation import mod_norm
from modspace.schrod import propagate_to
from modspace.settings import get_settings
from modspace.transport import leading_transport, picard_propagate, write_iteration_report
from modspace.wpt import wpt

logger = get_logger(__name__)


def _out_dir(args, config: ExperimentConfig) -> Path:
    target = args.output or config.resolve(config.output.dir) or get_settings().output_dir
    target = Path(target)
    target.mkdir(parents=True, exist_ok=True)
    return target


def _initial(args, config: ExperimentConfig):
    grid = config.grid.build()
    if getattr(args, "input", None):
        return read_complex_field(grid, args.input)
    base = config.source.parent if config.source else None
    return build_initial(config.initial, grid, base)


def cmd_transform(args) -> int:
    config = load_config(args.config)
    u = _initial(args, config)
    phi = build_window(config.window, u.grid)
    path = write_phase_space_field(wpt(u, phi), _out_dir(args, config) / "wpt.csv")
    logger.info("transform written", path=str(path))
    return 0


def cmd_norm(args) -> int:
    config = load_config(args.config)
    u = _initial(args, config)
    phi = build_window(config.window, u.grid)
    for spec in config.norm.specs():
        print(f"{spec.label}\t{mod_norm(u, phi, spec):.17g}")
    return 0


def cmd_flow(args) -> int:
    config = load_config(args.config)
    V = config.potential.build(config.grid.n)
    df = trajectory(
        V,
        args.t,
        config.initial.center,
        config.initial.momentum,
        args.s,
        config.solver.flow_options(),
    )
    path = write_trajectory(df, _out_dir(args, config) / f"{config.name}_trajectory.csv")
    logger.info("trajectory written", path=str(path), rows=len(df))
    return 0


def cmd_propagate(args) -> int:
    config = load_config(args.config)
    u0 = _initial(args, config)
    V = config.potential.build(u0.grid.dim)
    times = config.time.times()
    out = _out_dir(args, config)
    for t, u in zip(times, propagate_to(u0, V, times, config.solver.dt)):
        write_complex_field(u, out / f"{config.name}_u_t{t:g}.csv")
    logger.info("propagation written", times=len(times), dir=str(out))
    return 0


def cmd_transport(args) -> int:
    config = load_config(args.config)
    u0 = _initial(args, config)
    phi0 = build_window(config.window, u0.grid)
    V = config.potential.build(u0.grid.dim)
    opts = config.solver.flow_options()
    out = _out_dir(args, config)
    for t in config.time.times():
        if args.method == "leading":
            W = leading_transport(u0, phi0, V, t, opts)
        else:
            result = picard_propagate(u0, phi0, V, t, config.picard.remainder_spec(), opts=opts)
            write_iteration_report(result.report, out / f"{config.name}_iterations_t{t:g}.csv")
            W = result.field
        write_phase_space_field(W, out / f"{config.name}_{args.method}_t{t:g}.csv")
    logger.info("transport written", method=args.method, dir=str(out))
    return 0


def cmd_verify(args) -> int:
    summary = verify_all(args.config_dir, args.output)
    print(format_summary(summary))
    return 0 if bool(summary["passed"].all()) else 1


def cmd_plot(args) -> int:
    plot_csv(args.csv, args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="modspace",
        description="Wave packet transforms and modulation-space norms of Schrödinger evolutions.",
    )
    parser.add_argument("--log-level", help="overrides MODSPACE_LOG_LEVEL")
    commands = parser.add_subparsers(dest="command", required=True)

    def with_config(name: str, help: str, input_field: bool = True):
        sub = commands.add_parser(name, help=help)
        sub.add_argument("config", type=Path, help="experiment config file")
        sub.add_argument("-o", "--output", type=Path, help="output directory")
        if input_field:
            sub.add_argument("-i", "--input", type=Path, help="field CSV instead of initial.*")
        return sub

    with_config("transform", "wave packet transform of a field").set_defaults(func=cmd_transform)
    with_config("norm", "modulation-space norms of a field").set_defaults(func=cmd_norm)

    flow = with_config("flow", "dump a classical trajectory", input_field=False)
    flow.add_argument("--t", type=float, default=0.0, help="start time")
    flow.add_argument("--s", type=float, required=True, help="end time")
    flow.set_defaults(func=cmd_flow)

    with_config("propagate", "reference split-step solve").set_defaults(func=cmd_propagate)

    transport = with_config("transport", "characteristic transport of the transform")
    transport.add_argument("--method", choices=["leading", "picard"], default="picard")
    transport.set_defaults(func=cmd_transport)

    verify = commands.add_parser("verify", help="run every experiment in a directory")
    verify.add_argument("config_dir", type=Path, nargs="?", default=Path("experiments"))
    verify.add_argument("-o", "--output", type=Path, help="output directory")
    verify.set_defaults(func=cmd_verify)

    plot = commands.add_parser("plot", help="render CSV outputs to an image")
    plot.add_argument("csv", type=Path, nargs="+")
    plot.add_argument("--out", type=Path, required=True, help="image path (.png, .pdf, .svg)")
    plot.set_defaults(func=cmd_plot)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(level=args.log_level)
    try:
        return args.func(args)
    except ModspaceError as e:
        logger.error("command failed", command=args.command, error=str(e))
        return 1


if __name__ == "__main__":
    sys.exit(main())
