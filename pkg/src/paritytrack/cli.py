"""Command-line entry point: ``paritytrack <command> [options]``.

Exit codes: 0 success, 2 configuration error, 3 numerical error,
4 statistically inconclusive result.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from .cadence import CadenceParams, cadence_table, numerical_optimum
from .config import config_from_mapping, load_config
from .csvio import write_csv
from .errors import ConfigError, ParityTrackError
from .fock import cat_state, coherent_state, default_dim, initial_state, wigner_grid
from .pipeline import run_pipeline

log = logging.getLogger("paritytrack")

# command -> stages it runs by default
COMMAND_STAGES = {
    "simulate": ("simulate",),
    "filter": ("simulate", "filter"),
    "count-jumps": ("simulate", "filter", "detect"),
    "analyze": ("simulate", "filter", "detect", "analyze"),
}


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="experiment config file (defaults used when omitted)")
    p.add_argument("--seed", type=int, help="override ensemble.base_seed")
    p.add_argument("--out", type=Path, help="output directory (overrides output.dir)")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="paritytrack", description="Cavity photon-parity tracking toolkit")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, stages in COMMAND_STAGES.items():
        p = sub.add_parser(name, help=f"run stages: {', '.join(stages)}")
        _common(p)
        p.add_argument("--stages", help="comma-separated subset of simulate,filter,detect,analyze")
        p.add_argument("--outcomes", type=Path, help="ingest outcome records from this CSV instead of simulating")

    p = sub.add_parser("optimize", help="measurement-cadence trade-off table")
    _common(p)

    p = sub.add_parser("wigner", help="Wigner function of a constructed state on a grid")
    _common(p)
    p.add_argument("--state", choices=("initial", "coherent", "cat-even", "cat-odd"), default="cat-even")
    p.add_argument("--alpha", type=float, default=2.0)
    p.add_argument("--n-th", type=float, default=0.0, help="thermal occupancy (initial state only)")
    p.add_argument("--dim", type=int)
    p.add_argument("--extent", type=float, help="grid half-width (default: largest allowed by the truncation)")
    p.add_argument("--points", type=int, default=41)
    return parser


def _load(args) -> "ExperimentConfig":  # noqa: F821
    overrides = {}
    if args.seed is not None:
        overrides["ensemble.base_seed"] = args.seed
    if args.out is not None:
        overrides["output.dir"] = str(args.out)
    if args.config is not None:
        return load_config(args.config, overrides)
    return config_from_mapping({}, overrides)


def _cmd_pipeline(args) -> int:
    cfg = _load(args)
    stages = args.stages if args.stages else COMMAND_STAGES[args.command]
    if args.outcomes is not None and not args.stages:
        stages = tuple(s for s in stages if s != "simulate")
    artifacts = run_pipeline(cfg, stages, outcomes_path=args.outcomes)
    for name in sorted(artifacts):
        print(f"{name}\t{artifacts[name]}")
    return 0


def _cmd_optimize(args) -> int:
    cfg = _load(args)
    p: CadenceParams = cfg.cadence
    table = cadence_table(p)
    s_num, k_num = numerical_optimum(p.n_bar, p.kappa, p.P_C)
    out = cfg.out_dir
    meta = {"config_hash": cfg.config_hash, "base_seed": cfg.base_seed}
    path = write_csv(
        out / "cadence.csv",
        ("spacing_us", "tau_W_us", "kappa_eff_per_us"),
        zip(table["spacing_us"], table["tau_W_us"], table["kappa_eff_per_us"]),
        meta,
    )
    print(f"P_C                  {table['P_C']:.6g}")
    print(f"bare lifetime        {table['bare_lifetime_us']:.4g} us")
    print(f"optimal spacing      {table['optimal_spacing_us']:.4g} us (numerical {s_num:.4g})")
    print(f"optimal wait tau_W   {table['optimal_tau_W_us']:.4g} us")
    print(f"optimal lifetime     {table['lifetime_us']:.4g} us (numerical {1 / k_num:.4g})")
    print(f"improvement factor   {table['improvement_factor']:.4g}")
    print(f"table\t{path}")
    return 0


def _cmd_wigner(args) -> int:
    cfg = _load(args)
    dim = args.dim or default_dim(args.alpha, args.n_th)
    if args.state == "initial":
        rho = initial_state(args.alpha, args.n_th, dim)
    elif args.state == "coherent":
        rho = coherent_state(args.alpha, dim)
    else:
        rho = cat_state(args.alpha, "even" if args.state == "cat-even" else "odd", dim)
    extent = args.extent if args.extent is not None else float(np.sqrt(dim / 10.0)) * (1 - 1e-9)
    axis = np.linspace(-extent, extent, args.points)
    w = wigner_grid(rho, axis, axis)
    meta = {"config_hash": cfg.config_hash, "state": args.state, "alpha": repr(args.alpha), "dim": dim}
    rows = ((x, y, w[j, i]) for j, y in enumerate(axis) for i, x in enumerate(axis))
    path = write_csv(cfg.out_dir / f"wigner_{args.state}.csv", ("re_beta", "im_beta", "W"), rows, meta)
    print(f"wigner\t{path}")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    handlers = {"optimize": _cmd_optimize, "wigner": _cmd_wigner}
    try:
        return handlers.get(args.command, _cmd_pipeline)(args)
    except ParityTrackError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except ValueError as exc:
        # stray validation errors from dataclass constructors are config problems
        print(f"error: {exc}", file=sys.stderr)
        return ConfigError.exit_code


if __name__ == "__main__":
    sys.exit(main())
