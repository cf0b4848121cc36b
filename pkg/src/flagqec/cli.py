"""Command line interface: ``verify``, ``simulate``, ``pseudothreshold`` and ``footprint``.

Exit status is 0 on success, 2 when a fault set is not distinguishable and 1
on any other error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from collections import defaultdict
from typing import Sequence

from .codes import build_hex_color_code
from .faultcode import CnotOrdering, OrderingError, build_fault_check_matrix
from .harness import (
    FOOTPRINT_MODES,
    THREADS_ENV,
    ConfigError,
    ExperimentConfig,
    NoCrossingError,
    estimate_pseudothreshold,
    footprint_report,
    read_csv,
    run_experiment,
    verify_code,
)
from .lookup import DistinguishabilityError, build_cache

EXIT_OK, EXIT_ERROR, EXIT_INDISTINGUISHABLE = 0, 1, 2
LARGE_DISTANCE = 9

log = logging.getLogger("flagqec")


def _cmd_verify(args) -> int:
    if args.distance >= LARGE_DISTANCE and not args.allow_large:
        print(f"distance {args.distance} needs several GB and minutes; pass --allow-large to run it", file=sys.stderr)
        return EXIT_ERROR
    code, _ = build_hex_color_code(args.distance)
    ordering = CnotOrdering.read(args.ordering) if args.ordering else None
    rep = verify_code(code=code, ordering=ordering)
    print("\n".join(rep.lines()))
    return EXIT_OK if rep.report.distinguishable else EXIT_INDISTINGUISHABLE


_OVERRIDES = ("distances", "decoder", "strategy", "mim", "rho", "p_grid", "shots", "seed", "p_idle", "output", "block")


def _cmd_simulate(args) -> int:
    overrides = {k: getattr(args, k) for k in _OVERRIDES if getattr(args, k) is not None}
    config = ExperimentConfig.read(args.config, overrides) if args.config else ExperimentConfig.from_mapping(overrides)

    def show(pt):
        print(f"d={pt.distance} p={pt.p:.3e} shots={pt.shots} failures={pt.failures} "
              f"p_L={pt.p_l:.3e} [{pt.ci_low:.3e}, {pt.ci_high:.3e}] rounds={pt.avg_rounds:.3f}", flush=True)

    run_experiment(config, progress=show)
    if config.output:
        print(f"wrote {config.output}")
    return EXIT_OK


def _cmd_pseudothreshold(args) -> int:
    groups = defaultdict(list)
    for pt in read_csv(args.input):
        groups[(pt.distance, pt.decoder, pt.strategy, pt.mim)].append(pt)
    status = EXIT_OK
    for (d, dec, strat, mim), pts in sorted(groups.items()):
        label = f"d={d} {dec} {strat} mim={int(mim)}"
        try:
            est = estimate_pseudothreshold(pts)
        except NoCrossingError as err:
            print(f"{label}: no crossing ({err})")
            status = EXIT_ERROR
            continue
        print(f"{label}: p_th={est.p_th:.4e} +/- {est.uncertainty:.2e} (bracket {est.bracket[0]:g}..{est.bracket[1]:g})")
    return status


def _cmd_footprint(args) -> int:
    code, _ = build_hex_color_code(args.distance)
    table = None
    if args.t is None:
        if args.distance >= LARGE_DISTANCE and not args.allow_large:
            print("pass --T or --allow-large to build the distance-9 table", file=sys.stderr)
            return EXIT_ERROR
        table = build_cache(build_fault_check_matrix(code), code.t)
    rep = footprint_report(code, table, args.mode, t_x=args.t, t_xz=args.t_xz)
    print(f"mode: {rep['mode']}")
    print(f"bits: {rep['bits']}")
    for key, value in rep["counts"].items():
        print(f"{key}: {value}")
    for key in ("t_stab", "ratio_to_stab", "ratio_bound"):
        if key in rep:
            print(f"{key}: {rep[key]}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="flagqec",
        description="Flag error correction with lookup-table decoders on hexagonal color codes.",
        epilog=f"Set {THREADS_ENV} to run simulation points on several threads.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify", help="build the lookup table and check distinguishability")
    p.add_argument("--distance", "-d", type=int, required=True)
    p.add_argument("--ordering", help="CNOT ordering file (one generator per line)")
    p.add_argument("--allow-large", action="store_true", help="permit distance 9")
    p.set_defaults(func=_cmd_verify)

    p = sub.add_parser("simulate", help="Monte Carlo logical error rates")
    p.add_argument("--config", help="flat key = value file")
    p.add_argument("--distances", help="comma-separated distances")
    p.add_argument("--decoder", choices=("shor", "one_tailed", "two_tailed"))
    p.add_argument("--strategy", choices=("joint", "XZ", "ZX"))
    p.add_argument("--mim", dest="mim", action="store_const", const=True)
    p.add_argument("--no-mim", dest="mim", action="store_const", const=False)
    p.add_argument("--rho", type=int)
    p.add_argument("--p-grid", dest="p_grid", help="comma-separated physical error rates")
    p.add_argument("--shots", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--p-idle", dest="p_idle", type=float)
    p.add_argument("--output", "-o")
    p.add_argument("--block", type=int)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("pseudothreshold", help="crossing with p_L = 2p/3 per configuration in a CSV")
    p.add_argument("--input", "-i", required=True)
    p.set_defaults(func=_cmd_pseudothreshold)

    p = sub.add_parser("footprint", help="lookup-table memory footprint in bits")
    p.add_argument("--distance", "-d", type=int, required=True)
    p.add_argument("--mode", choices=FOOTPRINT_MODES, default="css_cro_so")
    p.add_argument("--T", dest="t", type=int, help="nontrivial syndromes per type (default: from the table)")
    p.add_argument("--T-xz", "--t-xz", dest="t_xz", type=int, help="mixed syndromes, needed by the stab modes")
    p.add_argument("--allow-large", action="store_true", help="permit building the distance-9 table")
    p.set_defaults(func=_cmd_footprint)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except DistinguishabilityError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_INDISTINGUISHABLE
    except (ConfigError, OrderingError, ValueError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
