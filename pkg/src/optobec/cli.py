"""Command-line driver.

Usage::

    optobec [run] SUBCOMMAND [--params FILE] [--out DIR] [--grid start:stop:n]
            [--override KEY=VAL ...] [--seed N] [--jobs N] ...

Subcommands: ``fig2 fig3 fig4 fig5 fig6 fig7 spectrum oracle-check sweep``.
Exit codes: 0 ok, 1 usage, 2 validation, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import sys

from .errors import NumericalError, ParseError
from .experiments import Grid, figure_spec, resolve_variant, run
from .model import paper_defaults
from .paramfile import apply_overrides, parse_params

EXIT_OK, EXIT_USAGE, EXIT_VALIDATION, EXIT_NUMERICAL = 0, 1, 2, 3
SUBCOMMANDS = ("fig2", "fig3", "fig4", "fig5", "fig6", "fig7", "spectrum", "oracle-check", "sweep")

log = logging.getLogger("optobec")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _list(text):
    return [s.strip() for s in text.split(",") if s.strip()]


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="optobec", description="BEC-optomechanics entanglement experiments")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in SUBCOMMANDS:
        aliases = ["oracle_check"] if name == "oracle-check" else []
        p = sub.add_parser(name, aliases=aliases)
        p.add_argument("--params", help="parameter file (default: built-in experimental preset)")
        p.add_argument("--out", default=f"out/{name}", help="output directory")
        p.add_argument("--grid", type=Grid.parse, help="start:stop:n in normalised units")
        p.add_argument("--override", action="append", default=[], metavar="KEY=VAL")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--jobs", type=int, default=1)
        p.add_argument("--branch", default="continuation",
                       choices=("continuation", "lower", "middle", "upper"))
        p.add_argument("--gamma-l", type=_list, help="comma-separated Gamma_l variants, e.g. 1kHz,10kHz")
        p.add_argument("--omega-sw", type=_list, help="comma-separated omega_sw variants")
        p.add_argument("--eta", type=_list, help="comma-separated eta variants")
        p.add_argument("--delta-c", help="fixed delta_c for pump sweeps, e.g. -40kappa")
        p.add_argument("--trajectories", type=int, help="Monte Carlo trajectory count")
        if name == "sweep":
            p.add_argument("--variable", default="delta_c", choices=("delta_c", "eta"))
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def _split_override(item: str):
    if "=" not in item:
        raise UsageError(f"--override expects KEY=VAL, got {item!r}")
    key, val = item.split("=", 1)
    return key.strip(), val.strip()


def _variants(args, default):
    axes = [("Gamma_l", args.gamma_l), ("omega_sw", args.omega_sw), ("eta", args.eta)]
    axes = [(k, vals) for k, vals in axes if vals]
    if not axes:
        return default
    variants = [{}]
    for key, vals in axes:
        variants = [{**v, key: val} for v in variants for val in vals]
    return variants


def spec_from_args(args):
    params = parse_params(args.params) if args.params else paper_defaults()
    params = apply_overrides(params, [_split_override(o) for o in args.override])
    name = "oracle-check" if args.command == "oracle_check" else args.command
    spec = figure_spec(name, params)
    if args.grid is not None:
        spec.grid = args.grid
    spec.variants = _variants(args, spec.variants)
    spec.seed, spec.jobs, spec.branch = args.seed, args.jobs, args.branch
    if args.trajectories is not None:
        spec.trajectories = args.trajectories
    if args.delta_c is not None:
        spec.fixed_delta_c = args.delta_c
    if name == "sweep" and args.variable == "eta":
        spec.kind, spec.variable = "entanglement_vs_pump", "eta"
    spec.__post_init__()
    # resolve every variant now so bad overrides fail before any work starts
    for v in spec.variants:
        resolve_variant(spec, v)
    return spec


VALUE_FLAGS = ("--grid", "--delta-c", "--override", "--gamma-l", "--omega-sw", "--eta")


def _attach_values(argv):
    """Glue ``--grid -30:0:7`` into ``--grid=-30:0:7`` so negative values are not
    mistaken for options."""
    out, i = [], 0
    while i < len(argv):
        if argv[i] in VALUE_FLAGS and i + 1 < len(argv) and argv[i + 1].startswith("-"):
            out.append(f"{argv[i]}={argv[i + 1]}")
            i += 2
        else:
            out.append(argv[i])
            i += 1
    return out


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    if argv and argv[0] == "run":
        argv = argv[1:]
    argv = _attach_values(argv)
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(f"optobec: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        spec = spec_from_args(args)
    except UsageError as exc:
        print(f"optobec: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ParseError as exc:
        for field, msg in exc.problems:
            print(f"optobec: {field}: {msg}", file=sys.stderr)
        return EXIT_VALIDATION
    except (ValueError, OSError) as exc:
        print(f"optobec: invalid input: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    try:
        code = run(spec, args.out)
    except NumericalError as exc:
        print(f"optobec: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    log.info("wrote %s", args.out)
    if code == EXIT_NUMERICAL:
        print("optobec: oracle comparison failed", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
