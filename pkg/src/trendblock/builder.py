"""Assembly and certification of maximin optimal block designs.

A design is built from an optimal order and a row-uniform semibalanced
array: the distinct treatments of the order each take one array row, and
repeated treatments reuse the row of their first occurrence. Symbols are
then relabelled so the first block reproduces the order exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .efficiency import trace_for_order
from .errors import BudgetExceededError, InvalidParameterError
from .model import (
    DesignArray,
    is_completely_symmetric,
    minimal_info_matrix,
    phi_vector,
    validate_lambdas,
    w_matrix,
)
from .orders import (
    as_order,
    objective,
    optimal_order,
    optimal_order_kind,
    oracle_budget,
    order_space,
)
from .sba import construct_sba, verify_sba

CERT_TOL = 1e-10


def assemble_design(pi_star, b: int, sba, v: int | None = None) -> DesignArray:
    sba = np.asarray(sba, dtype=np.int64)
    if v is None:
        v = int(sba.max())
    pi_star = as_order(pi_star, v)
    distinct = list(dict.fromkeys(pi_star))
    kstar = len(distinct)
    if kstar > v:
        raise InvalidParameterError(
            f"order uses {kstar} distinct treatments but v={v}"
        )
    if sba.ndim != 2 or sba.shape != (kstar, b):
        raise InvalidParameterError(
            f"array must be {kstar} x {b} for this order, got {sba.shape}"
        )
    report = verify_sba(sba, v)
    if not report.is_sba or not report.row_uniform:
        raise InvalidParameterError("array is not a row-uniform semibalanced array")

    row_of = {trt: r for r, trt in enumerate(distinct)}
    raw = sba[[row_of[t] for t in pi_star], :]

    relabel = {int(sba[r, 0]): trt for trt, r in row_of.items()}
    spare_labels = iter(x for x in range(1, v + 1) if x not in relabel.values())
    for sym in range(1, v + 1):
        if sym not in relabel:
            relabel[sym] = next(spare_labels)
    lookup = np.zeros(v + 1, dtype=np.int64)
    for sym, lab in relabel.items():
        lookup[sym] = lab
    return DesignArray(v, lookup[raw])


@dataclass
class OptimalDesignReport:
    design: DesignArray
    order: tuple
    kstar: int
    lambda0: float
    lambda1: float
    cs_ok: bool
    trace: float
    certificate: dict = field(default_factory=dict)
    mphi_zero: bool = False
    rr_minimal: bool = False
    trace_closed_form: float | None = None
    trace_matches_closed_form: bool = False
    blocks_equal_F: bool = False
    order_optimal: bool = False

    @property
    def is_maximin(self) -> bool:
        return (self.cs_ok and self.mphi_zero and self.rr_minimal
                and self.trace_matches_closed_form and self.order_optimal
                and self.blocks_equal_F)

    def to_dict(self):
        return {
            "kstar": self.kstar,
            "order": list(self.order),
            "cs_ok": self.cs_ok,
            "mphi_zero": self.mphi_zero,
            "rr_minimal": self.rr_minimal,
            "blocks_equal_F": self.blocks_equal_F,
            "order_optimal": self.order_optimal,
            "trace": self.trace,
            "trace_closed_form": self.trace_closed_form,
            "trace_matches_closed_form": self.trace_matches_closed_form,
            "is_maximin": self.is_maximin,
            "terms": dict(self.certificate),
        }


def trace_decomposition(d: DesignArray, lambda0, lambda1) -> dict:
    """Split trace(C^L) into block term - replication term - trend term."""
    k, b = d.k, d.b
    validate_lambdas(k, lambda0, lambda1)
    W = w_matrix(k, lambda0, lambda1)
    X = d.incidence_blocks()
    block = float(np.einsum("jpi,pq,jqi->", X, W, X))
    r = d.replication.astype(float)
    mphi = d.treatment_unit_incidence @ phi_vector(k)
    rr = (1 - k * lambda0) / (b * k) * float(r @ r)
    mp = (1 - lambda1) / b * float(mphi @ mphi)
    return {"block_term": block, "rr_term": rr, "mphi_term": mp,
            "trace": block - rr - mp}


def certify_maximin(d: DesignArray, lambda0, lambda1) -> OptimalDesignReport:
    k, b, v = d.k, d.b, d.v
    validate_lambdas(k, lambda0, lambda1)
    C = minimal_info_matrix(d, lambda0, lambda1)
    trace = float(np.trace(C))
    terms = trace_decomposition(d, lambda0, lambda1)
    mphi = d.treatment_unit_incidence @ phi_vector(k)
    r = d.replication
    order = d.column(0)
    F_blocks = [objective(d.column(j), lambda0, lambda1) for j in range(b)]
    F_best = objective(optimal_order(v, k, lambda0, lambda1), lambda0, lambda1)
    closed = trace_for_order(v, k, b, lambda0, lambda1, order)
    scale = max(1.0, abs(trace))
    return OptimalDesignReport(
        design=d,
        order=order,
        kstar=len(set(order)),
        lambda0=lambda0,
        lambda1=lambda1,
        cs_ok=is_completely_symmetric(C, CERT_TOL * scale),
        trace=trace,
        certificate=terms,
        mphi_zero=bool(np.max(np.abs(mphi)) <= 1e-12 * max(1, b)),
        rr_minimal=bool(int(r @ r) * v == (b * k) ** 2),
        trace_closed_form=closed,
        trace_matches_closed_form=abs(closed - trace) <= 1e-9 * scale,
        blocks_equal_F=bool(np.ptp(F_blocks) <= 1e-12),
        order_optimal=abs(F_blocks[0] - F_best) <= 1e-12,
    )


def build_optimal_design(v: int, b: int, k: int, lambda0, lambda1,
                         node_budget: int | None = None) -> OptimalDesignReport:
    """Construct and certify the maximin optimal design for (v, b, k).

    Raises InfeasibleError (with ``smallest_b``) when no suitable array is
    available for this b.
    """
    validate_lambdas(k, lambda0, lambda1)
    pi_star = optimal_order(v, k, lambda0, lambda1)
    kstar = len(set(pi_star))
    kwargs = {} if node_budget is None else {"node_budget": node_budget}
    sba = construct_sba(v, kstar, b, **kwargs)
    d = assemble_design(pi_star, b, sba, v)
    return certify_maximin(d, lambda0, lambda1)


@dataclass
class ExhaustiveResult:
    max_trace: float
    n_designs: int
    n_maximizers: int
    maximizers_all_blocks_optimal: bool


def exhaustive_max_trace(v: int, k: int, b: int, lambda0, lambda1,
                         budget: int | None = None,
                         tol: float = 1e-10) -> ExhaustiveResult:
    """trace(C^L) maximised over all v**(k b) designs.

    Every block is one of the v**k orders; the trace is additive over blocks
    except for the replication and trend terms, which depend on the column
    sums of n and h.
    """
    validate_lambdas(k, lambda0, lambda1)
    budget = oracle_budget() if budget is None else budget
    total = v ** (k * b)
    if total > budget:
        raise BudgetExceededError(
            f"{total} designs exceed the enumeration budget {budget}",
            required=total,
        )
    orders, s, T = order_space(v, k, budget)
    phi = phi_vector(k)
    onehot = orders[:, :, None] == np.arange(1, v + 1)
    n = onehot.sum(axis=1).astype(float)
    h = np.einsum("opi,p->oi", onehot, phi)
    W = w_matrix(k, lambda0, lambda1)
    F = -lambda0 * s - lambda1 * T
    block = np.trace(W) + 2 * F

    acc_block = np.zeros(1)
    acc_n = np.zeros((1, v))
    acc_h = np.zeros((1, v))
    acc_opt = np.ones(1, dtype=bool)
    is_opt = F >= F.max() - 1e-12
    for _ in range(b):
        acc_block = (acc_block[:, None] + block[None, :]).ravel()
        acc_n = (acc_n[:, None, :] + n[None, :, :]).reshape(-1, v)
        acc_h = (acc_h[:, None, :] + h[None, :, :]).reshape(-1, v)
        acc_opt = (acc_opt[:, None] & is_opt[None, :]).ravel()
    traces = (acc_block
              - (1 - k * lambda0) / (b * k) * np.sum(acc_n**2, axis=1)
              - (1 - lambda1) / b * np.sum(acc_h**2, axis=1))
    best = traces.max()
    hit = traces >= best - tol * max(1.0, abs(best))
    return ExhaustiveResult(float(best), int(traces.size), int(hit.sum()),
                            bool(np.all(acc_opt[hit])))


def optimal_order_label(v, k, lambda0, lambda1) -> str:
    kind, q = optimal_order_kind(v, k, lambda0, lambda1)
    return f"pi_{q}" if kind == "pi_q" else kind
