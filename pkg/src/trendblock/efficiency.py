"""Closed-form traces of the minimal information matrix, efficiency ratios
and the lambda0/lambda1 breakpoints at which the optimal order changes.

Traces are for designs built from a single order on a row-uniform
semibalanced array, in units where sigma0_eps2 = 1. The ratios do not
depend on b.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal

from .errors import InvalidParameterError
from .model import phi_squared, validate_lambdas
from .orders import (
    objective,
    optimal_order_kind,
    order_for_kind,
    split_km,
    tf_variant_for,
)

TABLE1_LAMBDAS = (
    (0.0, 1.0),
    (1 / 40, 1.0),
    (5 / 40, 1.0),
    (10 / 40, 1.0),
    (10 / 40, 1 / 2),
    (10 / 40, 1 / 10),
)


def _base_trace(v, k, lambda0, lambda1):
    # per-block diagonal term minus the replication penalty
    return k - k * lambda0 - lambda1 - (k / v) * (1 - k * lambda0)


def trace_for_order(v, k, b, lambda0, lambda1, order) -> float:
    """Trace for a design whose every block realises ``order`` up to
    relabelling: b * (base + 2 F(order))."""
    validate_lambdas(k, lambda0, lambda1)
    if len(order) != k:
        raise InvalidParameterError("order length must equal k")
    return b * (_base_trace(v, k, lambda0, lambda1)
                + 2 * objective(order, lambda0, lambda1))


def s_min(v: int, k: int) -> int:
    """Minimal coincidence count over orders with replications m and m+1."""
    if k < 2 * v:
        raise InvalidParameterError(f"s_min needs k >= 2v (k={k}, v={v})")
    m, t = split_km(v, k)
    value = m * (k - v + t)
    assert value % 2 == 0
    return value // 2


def q_range(v: int, k: int) -> range:
    return range(max(0, k - v), k // 2 + 1)


def trace_cl_closed_form(v, k, b, lambda0, lambda1, kind, q=None) -> float:
    """Closed-form trace for ``kind`` in {"pi_q", "TF_A", "TF_B", "TF_C", "NTF"}."""
    validate_lambdas(k, lambda0, lambda1)
    if kind == "pi_q":
        if k >= 2 * v:
            raise InvalidParameterError("pi_q orders are used for k < 2v")
        if q is None or q not in q_range(v, k):
            raise InvalidParameterError(
                f"q={q} outside [{max(0, k - v)}, {k // 2}]"
            )
        gain = sum(lambda1 * phi_squared(k, p) - lambda0 for p in range(1, q + 1))
        return b * _base_trace(v, k, lambda0, lambda1) + 2 * b * gain

    if k < 2 * v:
        raise InvalidParameterError(f"{kind} orders need k >= 2v")
    m, t = split_km(v, k)
    common = b * (k - k * lambda0 - 2 * lambda0 * s_min(v, k)
                  - (k / v) * (1 - k * lambda0))
    variant = tf_variant_for(v, k)
    if kind in ("TF_A", "TF_B"):
        if kind != variant:
            raise InvalidParameterError(f"{kind} infeasible for v={v}, k={k}")
        return common
    if variant is not None or kind not in ("TF_C", "NTF"):
        raise InvalidParameterError(f"{kind} infeasible for v={v}, k={k}")
    odd_count = t if m % 2 == 0 else v - t
    if kind == "NTF":
        return common - b * odd_count * lambda1 * phi_squared(k, k // 2)
    return common - b * odd_count * lambda0


def _require_e1_case(v, k, lambda1):
    if k < 2 * v or k % 2 or tf_variant_for(v, k) is not None:
        raise InvalidParameterError(
            "E1 needs k even, k >= 2v and k/v not an even integer"
        )
    if not lambda1 > 0:
        raise InvalidParameterError("efficiency ratios need lambda1 > 0")


def e1(v, k, lambda0, lambda1) -> float:
    """trace(NTF) / trace(TF_C). Above 1 means NTF is the better order;
    then 1/E1 is the efficiency of the TF_C design."""
    _require_e1_case(v, k, lambda1)
    return (trace_cl_closed_form(v, k, 1, lambda0, lambda1, "NTF")
            / trace_cl_closed_form(v, k, 1, lambda0, lambda1, "TF_C"))


def e1_efficiencies(v, k, lambda0, lambda1) -> dict:
    """Relative efficiency of each of the two candidate orders."""
    ratio = e1(v, k, lambda0, lambda1)
    if ratio <= 1:
        return {"TF_C": 1.0, "NTF": ratio}
    return {"TF_C": 1 / ratio, "NTF": 1.0}


def optimal_q(v, k, lambda0, lambda1) -> int:
    kind, q = optimal_order_kind(v, k, lambda0, lambda1)
    if kind != "pi_q":
        raise InvalidParameterError("optimal q is defined for k < 2v only")
    return q


def e2(v, k, lambda0, lambda1, q) -> float:
    """trace(pi_q) / trace(pi_q*) with q* the optimal q."""
    if k >= 2 * v:
        raise InvalidParameterError("E2 needs k < 2v")
    if not lambda1 > 0:
        raise InvalidParameterError("efficiency ratios need lambda1 > 0")
    if q not in q_range(v, k):
        raise InvalidParameterError(f"q={q} outside [{max(0, k - v)}, {k // 2}]")
    qstar = optimal_q(v, k, lambda0, lambda1)
    return (trace_cl_closed_form(v, k, 1, lambda0, lambda1, "pi_q", q)
            / trace_cl_closed_form(v, k, 1, lambda0, lambda1, "pi_q", qstar))


def round_percent(ratio: float) -> int:
    """Nearest integer percent, halves away from zero."""
    # repr-based Decimal avoids binary noise such as 82.49999999999999
    scaled = Decimal(repr(round(ratio * 100, 9)))
    return int(scaled.quantize(Decimal(1), rounding=ROUND_HALF_UP))


@dataclass
class EfficiencyTable:
    v: int
    k: int
    rows: list
    columns: list
    ratios: list = field(default_factory=list)  # ratios[row][col]

    @property
    def percents(self):
        return [[round_percent(x) for x in row] for row in self.ratios]

    def to_dict(self):
        return {
            "v": self.v,
            "k": self.k,
            "rows": self.rows,
            "columns": [{"lambda0": a, "lambda1": c} for a, c in self.columns],
            "percent": self.percents,
            "ratio": self.ratios,
        }


def order_label(kind, q=None):
    return f"pi_{q}" if kind == "pi_q" else kind


def efficiency_table(v, k, grid=TABLE1_LAMBDAS) -> EfficiencyTable:
    """Efficiencies of every candidate order against the optimal one, for each
    (lambda0, lambda1) column of ``grid``."""
    grid = [(float(a), float(c)) for a, c in grid]
    for a, c in grid:
        validate_lambdas(k, a, c)
    if k < 2 * v:
        qs = list(q_range(v, k))
        rows = [order_label("pi_q", q) for q in qs]
        ratios = [[e2(v, k, a, c, q) for a, c in grid] for q in qs]
    elif tf_variant_for(v, k) is None:
        rows = ["TF_C", "NTF"]
        effs = [e1_efficiencies(v, k, a, c) for a, c in grid]
        ratios = [[e[r] for e in effs] for r in rows]
    else:
        rows = [tf_variant_for(v, k)]
        ratios = [[1.0 for _ in grid]]
    return EfficiencyTable(v, k, rows, grid, ratios)


@dataclass(frozen=True)
class RatioInterval:
    """Closed interval of lambda0/lambda1 values on which ``label`` is optimal
    (``hi`` may be ``math.inf``)."""

    lo: float
    hi: float
    label: str

    def to_dict(self):
        return {"lo": self.lo, "hi": None if math.isinf(self.hi) else self.hi,
                "order": self.label}


def optimality_breakpoints(v, k) -> list[RatioInterval]:
    """Intervals of lambda0/lambda1, ordered by increasing ratio."""
    if v < 2 or k < 2:
        raise InvalidParameterError("need v >= 2 and k >= 2")
    if k >= 2 * v:
        variant = tf_variant_for(v, k)
        if variant is not None:
            return [RatioInterval(0.0, math.inf, variant)]
        bp = phi_squared(k, k // 2)
        return [RatioInterval(0.0, bp, "TF_C"), RatioInterval(bp, math.inf, "NTF")]
    qmin, qmax = max(0, k - v), k // 2
    if qmin == qmax:
        return [RatioInterval(0.0, math.inf, order_label("pi_q", qmin))]
    out = [RatioInterval(0.0, phi_squared(k, qmax), order_label("pi_q", qmax))]
    for q in range(qmax - 1, qmin, -1):
        out.append(RatioInterval(phi_squared(k, q + 1), phi_squared(k, q),
                                 order_label("pi_q", q)))
    out.append(RatioInterval(phi_squared(k, qmin + 1), math.inf,
                             order_label("pi_q", qmin)))
    return out


def optimal_labels_at_ratio(v, k, ratio, rel_tol=1e-12) -> list[str]:
    """Order labels optimal at lambda0/lambda1 = ratio; two labels exactly at
    a breakpoint."""
    hits = []
    for iv in optimality_breakpoints(v, k):
        if iv.lo * (1 - rel_tol) <= ratio <= iv.hi * (1 + rel_tol):
            hits.append(iv.label)
    return hits


def order_from_label(v, k, label):
    if label.startswith("pi_"):
        return order_for_kind(v, k, "pi_q", int(label[3:]))
    return order_for_kind(v, k, label)


def efficiency_curve(v, k, ratios, lambda1=1.0):
    """Efficiency of every candidate order as lambda0/lambda1 varies, with
    lambda1 fixed; ratios giving lambda0 > 1/k are skipped."""
    table_rows = None
    points = []
    for rho in ratios:
        lambda0 = rho * lambda1
        if lambda0 > 1 / k:
            continue
        t = efficiency_table(v, k, [(lambda0, lambda1)])
        table_rows = t.rows
        points.append((rho, [r[0] for r in t.ratios]))
    return table_rows or [], points

