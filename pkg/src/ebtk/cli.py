"""Command-line interface: ``ebtk <subcommand> ...``.

Every subcommand reads and writes the JSON documents of
:mod:`ebtk.serialization`. Exit codes: 0 when a result was computed (an
``Undecided`` verdict included), 2 for unusable input, 3 when a solver hit
its iteration cap without stalling or a cross-check between criteria
failed.

Configuration is layered: built-in defaults, then a JSON config file
(``--config`` or the ``EBTK_CONFIG`` environment variable), then the
individual flags.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from . import serialization as ser
from .bargmann import DEFAULT_QUADRATURE, FockSpace, Quadrature, bargmann_eb_report
from .channels import holevo_to_channel, random_channel, random_holevo
from .config import RunConfig
from .criteria import (
    broadcast_feasibility,
    eb_report,
    holevo_from_decomposition,
    n_joint_feasibility,
    ppt_check,
    randomization_order,
    separable_decomposition,
)
from .criteria.report import HOLEVO_TOL
from .errors import DimensionCap, DocumentError, EbtkError, NotAValidDecomposition
from .feasibility import FeasibilityOutcome, Verdict

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_ANOMALY = 3
CONFIG_ENV = "EBTK_CONFIG"


class InputError(Exception):
    """Unusable input; reported on stderr with exit code 2."""


# --- input --------------------------------------------------------------------------


def _read_text(path: str) -> str:
    if path == "-":
        return sys.stdin.read()
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise InputError(f"{path}: cannot read ({exc.strerror})") from None


def _read_doc(path: str):
    try:
        return ser.loads(_read_text(path))
    except DocumentError as exc:
        raise InputError(f"{path}: {exc}") from None


def read_channel(path: str) -> ser.ChannelDocument:
    try:
        return ser.channel_document_from_doc(_read_doc(path))
    except DocumentError as exc:
        raise InputError(f"{path}: {exc}") from None


def _levels(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma-separated list of integers, got {text!r}") from None


def load_config(args) -> RunConfig:
    """Defaults, overlaid by the config file, overlaid by explicit flags."""
    cfg = RunConfig()
    path = args.config or os.environ.get(CONFIG_ENV)
    if path:
        try:
            cfg = ser.config_from_doc(_read_doc(path))
        except DocumentError as exc:
            raise InputError(f"{path}: {exc}") from None
    overrides = {
        "eps_feas": args.eps_feas,
        "eps_sep": args.eps_sep,
        "max_iters": args.max_iters,
        "stall_window": args.stall_window,
        "joint_levels": args.joint_levels,
        "seed": args.seed,
        "dim_cap": args.dim_cap,
        "broadcast": False if args.no_broadcast else None,
    }
    try:
        return cfg.merged(**overrides)
    except (TypeError, ValueError) as exc:
        raise InputError(f"invalid configuration: {exc}") from None


# --- output -------------------------------------------------------------------------


class Writer:
    """Single sink for emitted documents (a file or stdout)."""

    def __init__(self, path: str | None, indent: int | None):
        self.path = path
        self.indent = indent
        self._fh = None

    def __enter__(self):
        self._fh = open(self.path, "w") if self.path else sys.stdout
        return self

    def __exit__(self, *exc):
        if self.path:
            self._fh.close()
        else:
            self._fh.flush()

    def emit(self, doc) -> None:
        self._fh.write(ser.dumps(doc, self.indent) + "\n")
        self._fh.flush()


def _outcome_code(*outs: FeasibilityOutcome | None) -> int:
    capped = any(o is not None and o.verdict is Verdict.UNDECIDED for o in outs)
    return EXIT_ANOMALY if capped else EXIT_OK


def _report_code(r) -> int:
    return EXIT_ANOMALY if (r.anomalies or r.solver_capped) else EXIT_OK


# --- subcommands --------------------------------------------------------------------


def _check_one(path: str, cfg: RunConfig, timings: bool, source: str | None = None):
    doc = read_channel(path)
    r = eb_report(doc.channel, cfg)
    r.source = source
    return ser.report_to_doc(r, timings), _report_code(r)


def cmd_check_eb(args, cfg: RunConfig, out: Writer) -> int:
    if args.batch:
        return _batch(args, cfg, out)
    if args.input is None:
        raise InputError("check-eb needs an input document or --batch DIR")
    doc, code = _check_one(args.input, cfg, args.timings)
    out.emit(doc)
    return code


def _batch(args, cfg: RunConfig, out: Writer) -> int:
    root = Path(args.batch)
    if not root.is_dir():
        raise InputError(f"{root}: not a directory")
    code = EXIT_OK
    for path in sorted(root.glob("*.json")):
        try:
            doc, c = _check_one(str(path), cfg, args.timings, path.name)
        except InputError as exc:
            print(f"error: {exc}", file=sys.stderr)
            code = max(code, EXIT_INPUT)
            continue
        out.emit(doc)
        code = max(code, c)
    return code


def cmd_joint(args, cfg: RunConfig, out: Writer) -> int:
    c = read_channel(args.input).channel
    try:
        res = n_joint_feasibility(c, args.n, cfg.solver(), dim_cap=cfg.dim_cap)
    except DimensionCap as exc:
        raise InputError(str(exc)) from None
    res.details["config"] = cfg
    doc = ser.outcome_to_doc(res)
    out.emit(doc)
    return _outcome_code(res)


def cmd_order(args, cfg: RunConfig, out: Writer) -> int:
    lhs = read_channel(args.lhs).channel
    rhs = read_channel(args.rhs).channel
    try:
        res = randomization_order(lhs, rhs, cfg.solver(), dim_cap=cfg.dim_cap)
    except DimensionCap as exc:
        raise InputError(str(exc)) from None
    res.details["config"] = cfg
    doc = ser.outcome_to_doc(res)
    out.emit(doc)
    return _outcome_code(res)


def cmd_broadcast(args, cfg: RunConfig, out: Writer) -> int:
    c = read_channel(args.input).channel
    try:
        res = broadcast_feasibility(c, cfg.solver(), dim_cap=cfg.dim_cap)
    except DimensionCap as exc:
        raise InputError(str(exc)) from None
    res.details["config"] = cfg
    doc = ser.outcome_to_doc(res)
    out.emit(doc)
    return _outcome_code(res)


def cmd_holevo(args, cfg: RunConfig, out: Writer) -> int:
    """Emit the input channel with a Holevo block attached when one is found."""
    c = read_channel(args.input).channel
    holevo = None
    if ppt_check(c).passed:
        dec = separable_decomposition(c, cfg=cfg.decomposition())
        if dec.success:
            try:
                holevo = holevo_from_decomposition(dec.ensemble, c.dim_in, tol=HOLEVO_TOL)
            except NotAValidDecomposition as exc:
                print(f"warning: {exc}", file=sys.stderr)
    if holevo is None:
        print("no Holevo form found; channel emitted without one", file=sys.stderr)
    out.emit(ser.channel_to_doc(c, holevo=holevo))
    return EXIT_OK


def cmd_bargmann(args, cfg: RunConfig, out: Writer) -> int:
    try:
        space = FockSpace(args.cutoff)
        quad = Quadrature(args.radial_nodes, args.angular_nodes)
        b = bargmann_eb_report(space, quad, cfg, scale=args.scale, conjugate=args.conjugate)
    except DimensionCap as exc:
        raise InputError(str(exc)) from None
    out.emit(ser.bargmann_to_doc(b, args.timings))
    return _report_code(b.report)


def cmd_random(args, cfg: RunConfig, out: Writer) -> int:
    try:
        if args.kind == "channel":
            rank = args.rank or args.dim_in * args.dim_out
            doc = ser.channel_to_doc(random_channel(args.dim_in, args.dim_out, rank, cfg.seed))
        else:
            h = random_holevo(args.dim_in, args.dim_out, args.effects, cfg.seed)
            doc = ser.channel_to_doc(holevo_to_channel(h), holevo=h)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    out.emit(doc)
    return EXIT_OK


# --- parser -------------------------------------------------------------------------


def _common(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("run configuration")
    g.add_argument("--config", help=f"JSON config file (default: ${CONFIG_ENV})")
    g.add_argument("--eps-feas", type=float)
    g.add_argument("--eps-sep", type=float)
    g.add_argument("--max-iters", type=int)
    g.add_argument("--stall-window", type=int)
    g.add_argument("--joint-levels", type=_levels, help="comma-separated copy counts, e.g. 2,3")
    g.add_argument("--seed", type=int)
    g.add_argument("--dim-cap", type=int)
    g.add_argument("--no-broadcast", action="store_true", help="skip the broadcast search in reports")
    p.add_argument("-o", "--output", help="write to this file instead of stdout")
    p.add_argument("--timings", action="store_true", help="include wall-clock timings (breaks byte-identity)")
    p.add_argument("--compact", action="store_true", help="single-line JSON")


def _positive(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ebtk", description="Entanglement-breaking channel toolkit.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check-eb", help="full EB report for a channel document")
    p.add_argument("input", nargs="?")
    p.add_argument("--batch", metavar="DIR", help="process every *.json in DIR, one JSON line per document")
    _common(p)
    p.set_defaults(func=cmd_check_eb)

    p = sub.add_parser("joint", help="n-joint channel search")
    p.add_argument("input")
    p.add_argument("--n", type=int, required=True, choices=range(2, 7), metavar="N")
    _common(p)
    p.set_defaults(func=cmd_joint)

    p = sub.add_parser("order", help="search alpha with lhs = alpha o rhs")
    p.add_argument("lhs")
    p.add_argument("rhs")
    _common(p)
    p.set_defaults(func=cmd_order)

    p = sub.add_parser("broadcast", help="broadcasting-channel search")
    p.add_argument("input")
    _common(p)
    p.set_defaults(func=cmd_broadcast)

    p = sub.add_parser("holevo", help="attach a Holevo form to a channel document")
    p.add_argument("input")
    _common(p)
    p.set_defaults(func=cmd_holevo)

    p = sub.add_parser("bargmann", help="truncated heterodyne/Bargmann pipeline")
    p.add_argument("--cutoff", type=int, default=3)
    p.add_argument("--radial-nodes", type=_positive, default=DEFAULT_QUADRATURE.radial)
    p.add_argument("--angular-nodes", type=_positive, default=DEFAULT_QUADRATURE.angular)
    p.add_argument("--scale", type=float, default=1.0)
    p.add_argument("--conjugate", action="store_true")
    _common(p)
    p.set_defaults(func=cmd_bargmann)

    p = sub.add_parser("random", help="seeded random channel or Holevo channel document")
    p.add_argument("kind", choices=("channel", "holevo"))
    p.add_argument("dim_in", type=_positive)
    p.add_argument("dim_out", type=_positive)
    p.add_argument("--rank", type=_positive, help="Kraus rank (default: full)")
    p.add_argument("--effects", type=_positive, default=3, help="number of POVM effects")
    _common(p)
    p.set_defaults(func=cmd_random)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args)
        # JSON lines for batch output, indented documents otherwise
        indent = None if (args.compact or getattr(args, "batch", None)) else 2
        with Writer(args.output, indent) as out:
            return args.func(args, cfg, out)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except EbtkError as exc:
        # invariant violations raised by the data model on user input
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except Exception as exc:  # noqa: BLE001 - last line of defence, never a traceback
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ANOMALY


if __name__ == "__main__":
    sys.exit(main())
