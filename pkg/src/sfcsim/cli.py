"""Command line entry points: simulate, sweep, plot, validate.

Exit codes: 0 success, 1 configuration error, 2 runtime invariant
violation.
"""

import argparse
import sys

from .errors import ConfigError, InvariantViolation, SfcSimError
from .harness import (
    RunConfig,
    build_topology,
    build_catalog,
    emit_outputs,
    emit_sweep_outputs,
    run_simulation,
    sweep,
    _rng,
)


def _load_config(args) -> RunConfig:
    config = RunConfig.from_file(args.config)
    if getattr(args, "seed", None) is not None:
        config.master_seed = args.seed
    if getattr(args, "policy", None) is not None:
        config.policy = args.policy
    if getattr(args, "out", None) is not None:
        config.out_dir = args.out
    config.validate()
    return config


def cmd_simulate(args) -> int:
    config = _load_config(args)
    result = run_simulation(config)
    written = emit_outputs(result, config.out_dir)
    offered = sum(s.offered for s in result.series)
    accepted = sum(s.accepted for s in result.series)
    print(f"simulated {len(result.series)} repetition(s): "
          f"{accepted}/{offered} requests accepted")
    for name in sorted(written):
        print(f"  {name}: {written[name]}")
    return 0


def cmd_sweep(args) -> int:
    config = _load_config(args)
    try:
        values = [float(v) for v in args.values.split(",") if v != ""]
    except ValueError as exc:
        raise ConfigError(f"bad sweep values {args.values!r}: {exc}") from exc
    if not values:
        raise ConfigError("sweep needs at least one value")
    result = sweep(config, args.param, values)
    written = emit_sweep_outputs(result, config.out_dir)
    print(f"swept {args.param} over {values}")
    for name in sorted(written):
        print(f"  {name}: {written[name]}")
    return 0


def cmd_plot(args) -> int:
    from . import plotting
    import os

    rendered = {}
    if os.path.exists(os.path.join(args.indir, "metrics.csv")):
        rendered.update(plotting.render_run_plots(args.indir))
    sweep_csv = os.path.join(args.indir, "sweep.csv")
    if os.path.exists(sweep_csv):
        import csv as _csv

        with open(sweep_csv) as handle:
            parameter = next(_csv.reader(handle))[0]
        rendered.update(plotting.render_sweep_plots(args.indir, parameter))
    if not rendered:
        raise ConfigError(f"no metrics.csv or sweep.csv under {args.indir}")
    for name in sorted(rendered):
        print(f"  {name}: {rendered[name]}")
    return 0


def cmd_validate(args) -> int:
    config = _load_config(args)
    topology = build_topology(config)
    catalog = build_catalog(config, topology, _rng(config.master_seed, 0))
    print(f"config ok: policy={config.policy}, "
          f"{topology.n_nodes} nodes / {topology.num_vms} VMs / {topology.num_links} links, "
          f"{len(catalog)} services")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sfcsim",
        description="Online SFC provisioning simulator and policy library",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run a scenario and write metrics + figures")
    sim.add_argument("--config", required=True)
    sim.add_argument("--seed", type=int, default=None, help="override the master seed")
    sim.add_argument("--policy", choices=["dqn", "greedy", "tabu", "oracle"], default=None)
    sim.add_argument("--out", default=None, help="override the output directory")
    sim.set_defaults(func=cmd_simulate)

    sw = sub.add_parser("sweep", help="re-run a scenario across parameter values")
    sw.add_argument("--config", required=True)
    sw.add_argument("--param", required=True)
    sw.add_argument("--values", required=True, help="comma separated values")
    sw.add_argument("--seed", type=int, default=None)
    sw.add_argument("--policy", choices=["dqn", "greedy", "tabu", "oracle"], default=None)
    sw.add_argument("--out", default=None)
    sw.set_defaults(func=cmd_sweep)

    plot = sub.add_parser("plot", help="re-render figures from a results directory")
    plot.add_argument("--in", dest="indir", required=True)
    plot.set_defaults(func=cmd_plot)

    val = sub.add_parser("validate", help="check a config and its topology/catalog")
    val.add_argument("--config", required=True)
    val.set_defaults(func=cmd_validate)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except (InvariantViolation, SfcSimError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
