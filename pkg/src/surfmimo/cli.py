"""Command-line entry point: parse config, dispatch experiments, write CSV.

Subcommands: sweep-m, sweep-l, sweep-k, geometry, single.  Every run writes one
CSV with a metadata comment block (tool version, config hash, base seed, the
full canonical config) followed by a fixed-schema header row.  Floating values
carry 9 significant digits; empty cells stay empty.
"""

from __future__ import annotations

import argparse
import datetime
import math
import sys
from dataclasses import replace

from . import __version__
from .config import (
    ConfigError,
    canonical_items,
    config_from_metadata,
    config_hash,
    load_config,
)
from .experiments import (
    ExperimentConfig,
    SummaryRow,
    aggregate,
    run_experiment,
    run_geometry_sweep,
)
from .geometry import STRATEGIES

CSV_COLUMNS = (
    "architecture",
    "strategy",
    "M",
    "N",
    "Q",
    "J",
    "K",
    "L",
    "sweep_param",
    "sweep_value",
    "trials_ok",
    "trials_failed",
    "mean_rate_bpshz",
    "stderr_rate",
    "mean_ptot_mw",
    "mean_ee_bits_per_joule",
    "mean_bnorm_sq",
    "mean_cond_T",
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3

_DEFAULT_SWEEPS = {
    "m": (64, 256, 1024, 4096),
    "l": (2, 4, 6, 8, 10, 12, 14, 16, 18, 20),
    "k": (4, 8, 16, 32, 64, 128, 256),
}


def _fmt(x) -> str:
    if isinstance(x, str):
        return x
    if isinstance(x, int):
        return str(x)
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    return f"{x:.9g}"


def _summary_fields(row: SummaryRow) -> list:
    return [
        row.architecture,
        row.strategy,
        row.m,
        row.n,
        row.q,
        row.j,
        row.k,
        row.l,
        row.sweep_param,
        row.sweep_value,
        row.trials_ok,
        row.trials_failed,
        row.mean_rate_bpshz,
        row.stderr_rate,
        row.mean_ptot_mw,
        row.mean_ee_bits_per_joule,
        row.mean_bnorm_sq,
        row.mean_cond_t,
    ]


def write_csv(path: str, cfg: ExperimentConfig, rows: list[SummaryRow]) -> None:
    lines = [
        f"# surfmimo-version: {__version__}",
        f"# config-sha256: {config_hash(cfg)}",
        f"# base-seed: {cfg.base_seed}",
        f"# generated-at: {datetime.datetime.now(datetime.timezone.utc).isoformat()}",
    ]
    lines += [f"# cfg {s}.{k} = {v}" for s, k, v in canonical_items(cfg)]
    lines.append(",".join(CSV_COLUMNS))
    for row in rows:
        lines.append(",".join(_fmt(x) for x in _summary_fields(row)))
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_csv_metadata(path: str) -> ExperimentConfig:
    """Re-parse the config echoed in a result CSV's comment block."""
    items = []
    with open(path) as fh:
        for line in fh:
            if not line.startswith("#"):
                break
            if line.startswith("# cfg "):
                body = line[len("# cfg ") :].rstrip("\n")
                key_part, _, value = body.partition("=")
                section, _, key = key_part.strip().partition(".")
                items.append((section, key, value.strip()))
    return config_from_metadata(items)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="surfmimo",
        description="Surface-aided mmWave massive MIMO link simulator",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="INI config file (defaults are built in)")
        p.add_argument("--out", required=True, help="output CSV path")
        p.add_argument("--trials", type=int, help="trials per sweep point")
        p.add_argument("--seed", type=int, help="base seed")
        p.add_argument("--workers", type=int, help="parallel worker processes")
        p.add_argument(
            "--arch",
            help="comma-separated architecture tags (fd, fc, pc, la, irs-mi, "
            "irs-omp, its-mi, its-omp)",
        )
        p.add_argument("--strategy", help="illumination strategy")
        p.add_argument("-v", "--verbose", action="store_true")

    p = sub.add_parser("single", help="one scenario, full diagnostics")
    common(p)

    p = sub.add_parser("sweep-m", help="rate/power/efficiency vs element count")
    common(p)
    p.add_argument("--m-values", help="comma-separated element counts")

    p = sub.add_parser("sweep-l", help="rate vs number of channel paths")
    common(p)
    p.add_argument("--l-values", help="comma-separated path counts")

    p = sub.add_parser("sweep-k", help="lens-array rate vs feed count")
    common(p)
    p.add_argument("--k-values", help="comma-separated lens feed counts")

    p = sub.add_parser("geometry", help="condition-number sweep over R_r or R_d")
    common(p)
    p.add_argument("--param", choices=("rr", "rd"), default="rr")
    p.add_argument("--values", help="comma-separated radii/distances in meters")
    p.add_argument(
        "--strategies",
        help=f"comma-separated strategies (default: all of {', '.join(STRATEGIES)})",
    )
    p.add_argument("--dump-elements", help="per-element geometry CSV for debugging")
    return parser


def _int_list(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(v) for v in text.split(",") if v.strip())
    except ValueError as exc:
        raise ConfigError(f"bad sweep list {text!r}: {exc}") from exc


def _float_list(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError as exc:
        raise ConfigError(f"bad sweep list {text!r}: {exc}") from exc


def _apply_flags(cfg: ExperimentConfig, args) -> ExperimentConfig:
    updates = {}
    if args.trials is not None:
        updates["trials"] = args.trials
    if args.seed is not None:
        updates["base_seed"] = args.seed
    if args.workers is not None:
        updates["workers"] = args.workers
    if args.arch:
        updates["architectures"] = tuple(a.strip() for a in args.arch.split(","))
    if args.strategy:
        updates["strategy"] = args.strategy
    try:
        return replace(cfg, **updates) if updates else cfg
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _geometry_defaults(cfg: ExperimentConfig, param: str) -> tuple[float, ...]:
    d = cfg.spacing_m
    if param == "rr":
        return tuple(d * mult for mult in (1, 2, 4, 8, 16, 32))
    r0 = d * math.sqrt(cfg.m / (math.pi * cfg.n))
    return tuple(r0 * mult for mult in (1, 2, 4, 8, 16))


def _run(args) -> int:
    cfg = load_config(args.config)
    cfg = _apply_flags(cfg, args)

    if args.command == "single":
        cfg = replace(cfg, sweep_param="none", sweep_values=())
        rows = aggregate(run_experiment(cfg))
    elif args.command in ("sweep-m", "sweep-l", "sweep-k"):
        axis = args.command.split("-")[1]
        flag = getattr(args, f"{axis}_values", None)
        values = _int_list(flag) if flag else _DEFAULT_SWEEPS[axis]
        cfg = replace(cfg, sweep_param=axis, sweep_values=tuple(float(v) for v in values))
        rows = aggregate(run_experiment(cfg))
    elif args.command == "geometry":
        values = _float_list(args.values) if args.values else _geometry_defaults(cfg, args.param)
        cfg = replace(cfg, sweep_param=args.param, sweep_values=values)
        strategies = (
            tuple(s.strip() for s in args.strategies.split(","))
            if args.strategies
            else None
        )
        rows = run_geometry_sweep(cfg, strategies)
        if args.dump_elements:
            from .experiments import _surface_transfer
            from .geometry import dump_geometry_csv

            dump_geometry_csv(
                _surface_transfer(cfg.with_sweep_value(values[0]), 1.0),
                args.dump_elements,
            )
    else:
        raise AssertionError(args.command)

    if args.verbose:
        for row in rows:
            print(
                f"{row.architecture:8s} {row.strategy:14s} "
                f"{row.sweep_param}={_fmt(row.sweep_value)} "
                f"rate={_fmt(row.mean_rate_bpshz)} ptot={_fmt(row.mean_ptot_mw)} "
                f"cond={_fmt(row.mean_cond_t)}",
                file=sys.stderr,
            )
    write_csv(args.out, cfg, rows)
    return EXIT_OK


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return _run(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
