"""Command-line front end.

Exit status: 0 on success, 1 on invalid input, 2 when the request is
infeasible (or cannot be met within the search/enumeration budget).
"""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

import numpy as np

from . import io as tio
from .builder import (
    build_optimal_design,
    certify_maximin,
    exhaustive_max_trace,
    optimal_order_label,
)
from .efficiency import (
    TABLE1_LAMBDAS,
    efficiency_curve,
    efficiency_table,
    optimality_breakpoints,
)
from .errors import BudgetExceededError, InfeasibleError, TrendBlockError
from .model import (
    ModelParams,
    is_completely_symmetric,
    lambdas_from_components,
    minimal_info_matrix,
)
from .orders import brute_force_optimal, optimal_order, order_stats
from .sba import construct_sba, verify_sba

EXIT_OK, EXIT_INVALID, EXIT_INFEASIBLE = 0, 1, 2


class UsageError(TrendBlockError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _variance(text: str) -> float:
    value = float(text)  # float() accepts "inf"
    if math.isnan(value):
        raise argparse.ArgumentTypeError("NaN is not a variance")
    return value


def _float_list(text: str) -> list[float]:
    return [float(_fraction(x)) for x in text.split(",") if x.strip()]


def _fraction(text: str) -> float:
    text = text.strip()
    if "/" in text:
        num, den = text.split("/", 1)
        return float(num) / float(den)
    return float(text)


def _add_lambda_args(p):
    g = p.add_argument_group("model parameters")
    g.add_argument("--lambda0", type=_fraction)
    g.add_argument("--lambda1", type=_fraction)
    g.add_argument("--sigma-eps2", type=_variance)
    g.add_argument("--sigma-beta2", type=_variance)
    g.add_argument("--sigma-theta2", type=_variance)


def _add_format(p, choices=("json", "csv")):
    p.add_argument("--format", choices=choices, default="json")
    p.add_argument("--output", "-o", type=Path,
                   help="write to this file instead of stdout")


def resolve_params(args, k, fallback=None):
    """(lambda0, lambda1, variance_components) from flags, else ``fallback``."""
    comps = (args.sigma_eps2, args.sigma_beta2, args.sigma_theta2)
    have_comps = any(c is not None for c in comps)
    have_lams = args.lambda0 is not None or args.lambda1 is not None
    if have_lams and (args.lambda0 is None or args.lambda1 is None):
        raise UsageError("give both --lambda0 and --lambda1")
    components = None
    if have_comps:
        if any(c is None for c in comps):
            raise UsageError(
                "give all of --sigma-eps2, --sigma-beta2, --sigma-theta2"
            )
        l0, l1 = lambdas_from_components(*comps, k)
        components = dict(zip(("sigma0_eps2", "sigma0_beta2", "sigma0_theta2"),
                              comps))
        if have_lams and (abs(l0 - args.lambda0) > 1e-9
                          or abs(l1 - args.lambda1) > 1e-9):
            raise UsageError(
                f"lambdas ({args.lambda0}, {args.lambda1}) inconsistent with "
                f"variance components (-> {l0}, {l1})"
            )
    elif have_lams:
        l0, l1 = args.lambda0, args.lambda1
    elif fallback is not None:
        return fallback
    else:
        raise UsageError("need --lambda0/--lambda1 or the three --sigma-* flags")
    ModelParams(k, l0, l1)
    return l0, l1, components


def _emit(args, text: str):
    if getattr(args, "output", None):
        args.output.write_text(text)
    else:
        sys.stdout.write(text)


def cmd_design(args):
    l0, l1, comps = resolve_params(args, args.k)
    report = build_optimal_design(args.v, args.b, args.k, l0, l1)
    if args.format == "csv":
        return tio.matrix_to_csv(report.design.cells)
    doc = tio.design_document(report.design, l0, l1, comps, report.to_dict())
    return tio.dumps(doc)


def cmd_order(args):
    l0, l1, _ = resolve_params(args, args.k)
    order = optimal_order(args.v, args.k, l0, l1)
    stats = order_stats(order, l0, l1, v=args.v)
    if args.format == "csv":
        return tio.matrix_to_csv([order])
    return tio.dumps({
        "v": args.v, "k": args.k, "lambda0": l0, "lambda1": l1,
        "kind": optimal_order_label(args.v, args.k, l0, l1),
        "order": list(order), "stats": stats.to_dict(),
    })


def cmd_sba(args):
    A = construct_sba(args.v, args.kstar, args.b)
    if args.format == "csv":
        return tio.matrix_to_csv(A)
    return tio.dumps({"v": args.v, "kstar": args.kstar, "b": args.b,
                      "cells": A, "report": verify_sba(A, args.v).to_dict()})


def _load(args):
    d, doc = tio.load_design(args.design, v=args.v)
    fallback = None
    if doc is not None:
        comps = doc.get("variance_components")
        l0, l1 = doc["lambda0"], doc["lambda1"]
        if comps:
            # the components reproduce boundary lambdas such as 1/k exactly
            l0, l1 = lambdas_from_components(
                comps["sigma0_eps2"], comps["sigma0_beta2"],
                comps["sigma0_theta2"], d.k,
            )
        fallback = (l0, l1, comps)
    l0, l1, _ = resolve_params(args, d.k, fallback)
    return d, l0, l1


def cmd_analyze(args):
    d, l0, l1 = _load(args)
    C = minimal_info_matrix(d, l0, l1)
    if args.format == "csv":
        return tio.matrix_to_csv(C)
    return tio.dumps({
        "lambda0": l0, "lambda1": l1,
        "trace": float(np.trace(C)),
        "completely_symmetric": is_completely_symmetric(C),
        "max_abs_row_sum": float(np.max(np.abs(C.sum(axis=1)))),
        "info_matrix": C,
    })


def cmd_verify(args):
    d, l0, l1 = _load(args)
    out = certify_maximin(d, l0, l1).to_dict()
    if args.exhaustive:
        ex = exhaustive_max_trace(d.v, d.k, d.b, l0, l1, budget=args.budget)
        out["exhaustive"] = {
            "max_trace": ex.max_trace,
            "n_designs": ex.n_designs,
            "n_maximizers": ex.n_maximizers,
            "maximizers_all_blocks_optimal": ex.maximizers_all_blocks_optimal,
            "attains_max": abs(ex.max_trace - out["trace"])
            <= 1e-10 * max(1.0, abs(ex.max_trace)),
        }
    if args.format == "csv":
        flat = {k: v for k, v in out.items() if not isinstance(v, (dict, list))}
        keys = sorted(flat)
        return ",".join(keys) + "\n" + ",".join(
            str(tio.stable(flat[k])) for k in keys) + "\n"
    return tio.dumps(out)


def cmd_efficiency(args):
    if args.table1:
        grid = TABLE1_LAMBDAS
    elif args.lambda0 is not None and args.lambda1 is not None:
        if len(args.lambda0) != len(args.lambda1):
            raise UsageError("--lambda0 and --lambda1 lists differ in length")
        grid = list(zip(args.lambda0, args.lambda1))
    else:
        raise UsageError("need --table1 or --lambda0/--lambda1 lists")
    table = efficiency_table(args.v, args.k, grid)
    if args.plot_data:
        ratios = np.linspace(0, args.plot_max_ratio, args.plot_points)
        rows, points = efficiency_curve(args.v, args.k, ratios)
        lines = ["# ratio " + " ".join(rows)]
        lines += [" ".join(f"{x:.12g}" for x in (rho, *vals))
                  for rho, vals in points]
        args.plot_data.write_text("\n".join(lines) + "\n")
    if args.format == "csv":
        header = ["order"] + [f"{a:.12g}/{c:.12g}" for a, c in table.columns]
        body = [[r] + p for r, p in zip(table.rows, table.percents)]
        return "\n".join(",".join(map(str, row)) for row in [header] + body) + "\n"
    out = table.to_dict()
    out["breakpoints"] = [iv.to_dict() for iv in optimality_breakpoints(args.v, args.k)]
    return tio.dumps(out)


def cmd_oracle(args):
    l0, l1, _ = resolve_params(args, args.k)
    order, fmax = brute_force_optimal(args.v, args.k, l0, l1, budget=args.budget)
    if args.format == "csv":
        return tio.matrix_to_csv([order])
    return tio.dumps({"v": args.v, "k": args.k, "lambda0": l0, "lambda1": l1,
                      "order": list(order), "F_max": fmax})


def build_parser():
    parser = _Parser(prog="trendblock",
                     description="Maximin optimal block designs for ordered units.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("design", help="build and certify an optimal design")
    p.add_argument("--v", type=int, required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--b", type=int, required=True)
    _add_lambda_args(p)
    _add_format(p)
    p.set_defaults(func=cmd_design)

    p = sub.add_parser("order", help="optimal within-block order and its statistics")
    p.add_argument("--v", type=int, required=True)
    p.add_argument("--k", type=int, required=True)
    _add_lambda_args(p)
    _add_format(p)
    p.set_defaults(func=cmd_order)

    p = sub.add_parser("sba", help="row-uniform semibalanced array")
    p.add_argument("--v", type=int, required=True)
    p.add_argument("--kstar", type=int, required=True)
    p.add_argument("--b", type=int, required=True)
    _add_format(p)
    p.set_defaults(func=cmd_sba)

    for name, func, helptext in (
        ("analyze", cmd_analyze, "minimal information matrix of a design file"),
        ("verify", cmd_verify, "optimality certificate for a design file"),
    ):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("design", type=Path, help="design .json document or .csv cells")
        p.add_argument("--v", type=int, help="number of treatments (CSV input)")
        _add_lambda_args(p)
        _add_format(p)
        if name == "verify":
            p.add_argument("--exhaustive", action="store_true",
                           help="compare against every design of the same size")
            p.add_argument("--budget", type=int, default=None)
        p.set_defaults(func=func)

    p = sub.add_parser("efficiency", help="efficiency table of candidate orders")
    p.add_argument("--v", type=int, required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--table1", action="store_true",
                   help="the six (lambda0, lambda1) columns of the reference table")
    p.add_argument("--lambda0", type=_float_list, help="comma-separated list")
    p.add_argument("--lambda1", type=_float_list, help="comma-separated list")
    p.add_argument("--plot-data", type=Path,
                   help="write gnuplot data (efficiency vs lambda0/lambda1)")
    p.add_argument("--plot-max-ratio", type=float, default=1.0)
    p.add_argument("--plot-points", type=int, default=201)
    _add_format(p)
    p.set_defaults(func=cmd_efficiency)

    p = sub.add_parser("oracle", help="brute-force best order")
    p.add_argument("--v", type=int, required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--budget", type=int, default=None)
    _add_lambda_args(p)
    _add_format(p)
    p.set_defaults(func=cmd_oracle)
    return parser


def run(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        _emit(args, args.func(args))
    except BudgetExceededError as exc:
        need = f" (requires {exc.required})" if exc.required else ""
        print(f"error: budget exhausted: {exc}{need}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except InfeasibleError as exc:
        hint = (f"; smallest feasible b = {exc.smallest_b}"
                if exc.smallest_b is not None else "")
        print(f"error: infeasible: {exc}{hint}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (TrendBlockError, ValueError, OSError) as exc:
        print(f"error: invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    return EXIT_OK


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
