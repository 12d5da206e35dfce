"""Command-line front end.

Exit codes: 0 success, 1 build or check failure, 2 usage error. Errors are
reported as one JSON object on stderr.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys

import numpy as np

from . import network as nw
from .assembler import BuildRequest, build, measure
from .errors import EvaluationError, OffsetRejectionError
from .measures import builtin_measure
from .metrics import depth_report, rate_study
from .partition import draw_offset, shell_decay
from .primitives import DepthBudget, default_budget
from .seeding import stream
from .taylor import parse_function


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise UsageError(f"expected comma-separated numbers, got {text!r}") from exc


def _usage(fn, *args):
    """Run a spec parser, turning its complaints into usage errors."""
    try:
        return fn(*args)
    except (ValueError, OSError) as exc:
        raise UsageError(str(exc)) from exc


def _budget(args) -> DepthBudget:
    if args.depth_mode == "log":
        return DepthBudget("log")
    if args.max_depth is not None:
        return _usage(DepthBudget, "fixed", args.max_depth)
    return default_budget(args.beta, args.d)


def _emit(obj) -> None:
    print(json.dumps(obj, indent=2))


def cmd_build(args) -> int:
    f = _usage(parse_function, args.function, args.d, args.beta, args.bound)
    mu = _usage(builtin_measure, args.measure, args.d)
    req = _usage(
        BuildRequest, f, args.eps, args.p, mu, _budget(args), args.quantize_s, not args.no_quantize,
        args.seed, args.lp_samples,
    )
    report = build(req)
    net_path, rep_path = report.save(args.out)
    _emit({"network": net_path, "report": rep_path, "complexity": report.complexity.to_dict(),
           "measured_lp_error": report.lp_error.to_dict()})
    return 0


def cmd_eval(args) -> int:
    net = nw.load(args.net)
    x = np.array(_floats(args.point))
    if x.size != net.input_dim:
        raise UsageError(f"point has {x.size} coordinates, network expects {net.input_dim}")
    _emit([float(v) for v in nw.realize(net, x)])
    return 0


def cmd_error(args) -> int:
    net = nw.load(args.net)
    d = net.input_dim
    f = _usage(parse_function, args.function, d, args.beta, args.bound)
    mu = _usage(builtin_measure, args.measure, d)
    est = measure(net, f, mu, args.p, args.seed, args.samples)
    _emit(est.to_dict())
    return 0


def cmd_rate(args) -> int:
    f = _usage(parse_function, args.function, args.d, args.beta, args.bound)
    mu = _usage(builtin_measure, args.measure, args.d)
    eps_list = _floats(args.eps_list)
    study = rate_study(f, mu, args.p, eps_list, _budget(args), args.seed, args.out,
                       quantize=args.quantize, lp_samples=args.lp_samples)
    depth = depth_report(study)
    _emit({
        "csv": os.path.join(args.out, "rate.csv"),
        "svg": os.path.join(args.out, "rate.svg"),
        "slope": study.slope,
        "target_slope": study.target_slope,
        "error_ratio_spread": study.error_ratio_spread,
        "depth": depth.to_dict(),
    })
    return 0


def cmd_inspect(args) -> int:
    net = nw.load(args.net)
    out = nw.complexity(net).to_dict()
    out["input_dim"] = net.input_dim
    out["output_dim"] = net.output_dim
    out["widths"] = net.widths
    if (args.s is None) != (args.eps is None):
        raise UsageError("--s and --eps go together")
    if args.s is not None:
        ok = _usage(nw.is_quantized, net, args.s, args.eps)
        out["quantized"] = ok
        out["quantized_for"] = [args.s, args.eps] if ok else None
    _emit(out)
    return 0


def cmd_partition_diagnose(args) -> int:
    if args.level < 2:
        raise UsageError("--level must be >= 2")
    mu = _usage(builtin_measure, args.measure, args.d)
    offset = draw_offset(args.d, stream(args.seed, "offset", 0))
    diag = shell_decay(offset, mu, args.p, args.beta, stream(args.seed, "shell", 0),
                       tuple(range(1, args.level + 1)), args.samples)
    out = diag.to_dict()
    out["table"] = [
        {"level": n, "estimate": s.estimate, "ci": [s.ci_low, s.ci_high], "hits": s.hits}
        for n, s in zip(diag.levels, diag.shells)
    ]
    del out["shell_mass"]
    _emit(out)
    return 0


def cmd_quantize(args) -> int:
    net = nw.load(args.net)
    q = nw.quantize(net, args.s, args.eps)
    nw.save(q, args.out)
    _emit({"out": args.out, "quantized_for": [args.s, args.eps], "complexity": nw.complexity(q).to_dict()})
    return 0


def _add_target(p):
    p.add_argument("--function", required=True, help="e.g. trig-product(1), polynomial(0,0,0,1), cusp(0.1)")
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--bound", type=float, required=True, help="declared C^beta bound B")
    p.add_argument("--d", type=int, default=1)
    p.add_argument("--measure", default="uniform")
    p.add_argument("--p", type=float, default=2.0)
    p.add_argument("--depth-mode", choices=("fixed", "log"), default="fixed")
    p.add_argument("--max-depth", type=int)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--lp-samples", type=int)


def make_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="relu-approx", description=__doc__.splitlines()[0])
    parser.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("build", help="build an approximating network")
    _add_target(p)
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--quantize-s", type=int)
    p.add_argument("--no-quantize", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(run=cmd_build)

    p = sub.add_parser("eval", help="evaluate a network at one point")
    p.add_argument("--net", required=True)
    p.add_argument("--point", required=True, help="x1,...,xd")
    p.set_defaults(run=cmd_eval)

    p = sub.add_parser("error", help="L^p(mu) distance between a network and a function")
    p.add_argument("--net", required=True)
    p.add_argument("--function", required=True)
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--bound", type=float, default=math.inf)
    p.add_argument("--measure", default="uniform")
    p.add_argument("--p", type=float, default=2.0)
    p.add_argument("--samples", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(run=cmd_error)

    p = sub.add_parser("rate", help="weight-count rate study over an eps sweep")
    _add_target(p)
    p.add_argument("--eps-list", required=True, help="strictly decreasing, comma-separated")
    p.add_argument("--quantize", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(run=cmd_rate)

    p = sub.add_parser("inspect", help="complexity and quantization check")
    p.add_argument("--net", required=True)
    p.add_argument("--s", type=int)
    p.add_argument("--eps", type=float)
    p.set_defaults(run=cmd_inspect)

    p = sub.add_parser("partition-diagnose", help="shell-mass decay table for a random offset")
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--level", type=int, required=True)
    p.add_argument("--p", type=float, default=2.0)
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--measure", default="uniform")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--samples", type=int, default=100_000)
    p.set_defaults(run=cmd_partition_diagnose)

    p = sub.add_parser("quantize", help="round weights to the (s, eps) grid")
    p.add_argument("--net", required=True)
    p.add_argument("--s", type=int, required=True)
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(run=cmd_quantize)
    return parser


def _fail(code: int, exc: BaseException) -> int:
    err = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    if isinstance(exc, EvaluationError) and exc.point is not None:
        err["point"] = [float(v) for v in np.ravel(exc.point)]
    if isinstance(exc, OffsetRejectionError):
        err["diagnostics"] = exc.diagnostics
    print(json.dumps(err), file=sys.stderr)
    return code


def _join_negative_values(argv: list[str]) -> list[str]:
    """Let ``--point -0.3,0.2`` through; argparse would read the value as a flag."""
    out, i = [], 0
    while i < len(argv):
        if argv[i] in _VALUE_FLAGS and i + 1 < len(argv) and argv[i + 1].startswith("-"):
            out.append(f"{argv[i]}={argv[i + 1]}")
            i += 2
        else:
            out.append(argv[i])
            i += 1
    return out


_VALUE_FLAGS = ("--point", "--eps-list")


def main(argv=None) -> int:
    argv = _join_negative_values(list(sys.argv[1:] if argv is None else argv))
    try:
        args = make_parser().parse_args(argv)
    except UsageError as exc:
        return _fail(2, exc)
    nw.set_threads(args.threads)
    try:
        return args.run(args)
    except UsageError as exc:
        return _fail(2, exc)
    except FileNotFoundError as exc:
        return _fail(2, exc)
    except Exception as exc:  # noqa: BLE001 - every failure becomes a JSON record
        return _fail(1, exc)


if __name__ == "__main__":
    sys.exit(main())
