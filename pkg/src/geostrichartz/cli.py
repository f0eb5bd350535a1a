"""Command line entry point: ``geostrichartz <experiment> [flags]``."""

from __future__ import annotations

import argparse
import sys

from .runner import EXPERIMENTS, ConfigError, ExperimentConfig, resolve_threads, run


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="geostrichartz",
        description="Desk-scale numerical checks for dispersive geophysical semigroups.",
    )
    sub = parser.add_subparsers(dest="experiment", required=True, metavar="EXPERIMENT")
    for name in EXPERIMENTS:
        p = sub.add_parser(name, help=f"run the {name} experiment")
        p.add_argument("--config", metavar="PATH", help="YAML config file")
        p.add_argument("--out", metavar="DIR", help="output directory (default: config 'out' or ./results)")
        p.add_argument("--seed", type=int, help="base random seed")
        p.add_argument("--threads", type=int, help="worker threads (overrides $GEOSTRICHARTZ_THREADS)")
        p.add_argument("--resolution", type=int, help="grid points per axis")
        p.add_argument("--no-figures", action="store_true", help="skip PNG figures")
    return parser


def load_config(args: argparse.Namespace) -> ExperimentConfig:
    data: dict = {"experiment": args.experiment}
    if args.config:
        import yaml

        try:
            with open(args.config, encoding="utf-8") as fh:
                loaded = yaml.safe_load(fh) or {}
        except OSError as exc:
            raise ConfigError(f"--config: cannot read {args.config} ({exc.strerror})") from exc
        except yaml.YAMLError as exc:
            raise ConfigError(f"--config: not valid YAML ({exc})") from exc
        if not isinstance(loaded, dict):
            raise ConfigError("config: top level must be a mapping")
        if loaded.get("experiment", args.experiment) != args.experiment:
            raise ConfigError(f"experiment: config says {loaded['experiment']!r} but the subcommand is {args.experiment!r}")
        data.update(loaded)
    if args.seed is not None:
        data["seed"] = args.seed
    if args.resolution is not None:
        data.setdefault("grid", {})
        data["grid"] = dict(data["grid"], points=args.resolution)
    if args.out is not None:
        data["out"] = args.out
    # --threads, then the environment variable, then the config file
    if args.threads is not None or "threads" not in data or _env_threads_set():
        data["threads"] = resolve_threads(args.threads)
    return ExperimentConfig.from_dict(data)


def _env_threads_set() -> bool:
    import os

    from .runner import THREADS_ENV

    return bool(os.environ.get(THREADS_ENV))


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args)
        report = run(cfg, figures=not args.no_figures)
    except ConfigError as exc:
        print(f"error: invalid config: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {args.experiment}: {exc}", file=sys.stderr)
        return 2
    for c in report.checks:
        flag = "PASS" if c.passed else "FAIL"
        ref = "" if c.reference is None else f" (reference {c.reference:.6g}, {c.tolerance})"
        if c.reference is None and c.tolerance:
            ref = f" ({c.tolerance})"
        print(f"[{flag}] {c.name}: {c.value:.6g}{ref}")
    print(f"config_hash={report.config_hash} wall_clock={report.wall_clock:.2f}s out={cfg.out}")
    return 0 if report.passed else 1


if __name__ == "__main__":
    sys.exit(main())
