"""Semibalanced arrays (orthogonal arrays of type II, strength 2).

A kstar x b array over symbols 1..v is semibalanced when every column holds
distinct symbols and each pair of rows shows every unordered pair of
distinct symbols equally often. Arrays produced here are also row-uniform:
each row contains each symbol b/v times.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InfeasibleError, InvalidParameterError

DEFAULT_SEARCH_BUDGET = 200_000


@dataclass
class SBAReport:
    is_sba: bool
    row_uniform: bool
    pair_multiplicity: float | None
    violations: list = field(default_factory=list)

    def to_dict(self):
        return {
            "is_sba": self.is_sba,
            "row_uniform": self.row_uniform,
            "pair_multiplicity": self.pair_multiplicity,
            "violations": self.violations,
        }


def verify_sba(A, v: int | None = None) -> SBAReport:
    """Check the semibalanced-array conditions; never raises on bad arrays."""
    A = np.asarray(A, dtype=np.int64)
    violations = []
    if A.ndim != 2 or A.size == 0:
        return SBAReport(False, False, None,
                         [{"kind": "shape", "detail": "need a non-empty 2-d array"}])
    v = int(A.max()) if v is None else int(v)
    kstar, b = A.shape
    if A.min() < 1 or A.max() > v:
        violations.append({"kind": "symbol_range",
                           "detail": f"entries must lie in 1..{v}"})
        return SBAReport(False, False, None, violations)

    for j in range(b):
        if len(set(A[:, j].tolist())) != kstar:
            violations.append({
                "kind": "column_not_distinct", "column": j + 1,
                "detail": f"column {j + 1} repeats a symbol (distinct symbols required)",
            })

    npairs = v * (v - 1) // 2
    expected = b / npairs if npairs else None
    for r1, r2 in itertools.combinations(range(kstar), 2):
        counts = {pair: 0 for pair in itertools.combinations(range(1, v + 1), 2)}
        for x, y in zip(A[r1], A[r2]):
            if x != y:
                counts[(min(x, y), max(x, y))] += 1
        for pair, c in counts.items():
            if c != expected:
                violations.append({
                    "kind": "pair_count", "rows": [r1 + 1, r2 + 1],
                    "pair": list(pair), "count": c, "expected": expected,
                })

    row_uniform = all(
        np.all(np.bincount(row - 1, minlength=v) * v == b) for row in A
    )
    return SBAReport(not violations, bool(row_uniform), expected, violations)


def is_odd_prime(n: int) -> bool:
    if n < 3 or n % 2 == 0:
        return False
    return all(n % f for f in range(3, math.isqrt(n) + 1, 2))


def smallest_supported_b(v: int, kstar: int) -> int:
    """Smallest block count compatible with pair balance and row uniformity."""
    if kstar <= 1:
        return v
    return math.lcm(v * (v - 1) // 2, v)


def base_difference_array(v: int, kstar: int) -> np.ndarray:
    """kstar x v(v-1)/2 array over Z_v, v an odd prime.

    Column (a, e) with a in Z_v and e in 1..(v-1)/2 has entry a + i*e in row i.
    """
    if not is_odd_prime(v):
        raise InvalidParameterError(f"v={v} is not an odd prime")
    if not 1 <= kstar <= v:
        raise InvalidParameterError(f"kstar={kstar} outside [1, {v}]")
    cols = [
        [(a + i * e) % v for i in range(kstar)]
        for e in range(1, (v - 1) // 2 + 1)
        for a in range(v)
    ]
    return np.array(cols, dtype=np.int64).T + 1


def replicate_sba(A, copies: int) -> np.ndarray:
    if copies < 1:
        raise InvalidParameterError("copies must be >= 1")
    return np.tile(np.asarray(A, dtype=np.int64), (1, copies))


def search_sba(v: int, kstar: int, b: int,
               node_budget: int = DEFAULT_SEARCH_BUDGET):
    """Backtracking search for a row-uniform semibalanced array.

    Columns are chosen in non-decreasing lexicographic order. Returns the
    array, or None when the space is exhausted. Raises InfeasibleError when
    the node budget runs out first.
    """
    cols = list(itertools.permutations(range(v), kstar))
    npairs = v * (v - 1) // 2
    pair_cap = -(-b // npairs) if npairs else 0
    row_cap = -(-b // v)
    rowpairs = list(itertools.combinations(range(kstar), 2))
    pair_count = np.zeros((len(rowpairs), v, v), dtype=np.int64)
    row_count = np.zeros((kstar, v), dtype=np.int64)
    chosen: list[int] = []
    nodes = 0

    def fits(col):
        for r in range(kstar):
            if row_count[r, col[r]] >= row_cap:
                return False
        for idx, (r1, r2) in enumerate(rowpairs):
            x, y = sorted((col[r1], col[r2]))
            if pair_count[idx, x, y] >= pair_cap:
                return False
        return True

    def apply(col, delta):
        for r in range(kstar):
            row_count[r, col[r]] += delta
        for idx, (r1, r2) in enumerate(rowpairs):
            x, y = sorted((col[r1], col[r2]))
            pair_count[idx, x, y] += delta

    def rec(start):
        nonlocal nodes
        if len(chosen) == b:
            report = verify_sba(np.array([cols[c] for c in chosen]).T + 1, v)
            return report.is_sba and report.row_uniform
        nodes += 1
        if nodes > node_budget:
            raise InfeasibleError(
                f"no array found within budget ({node_budget} nodes) for "
                f"v={v}, kstar={kstar}, b={b} (not a nonexistence result)",
            )
        for c in range(start, len(cols)):
            col = cols[c]
            if fits(col):
                apply(col, 1)
                chosen.append(c)
                if rec(c):
                    return True
                chosen.pop()
                apply(col, -1)
        return False

    if rec(0):
        return np.array([cols[c] for c in chosen], dtype=np.int64).T + 1
    return None


def construct_sba(v: int, kstar: int, b: int,
                  node_budget: int = DEFAULT_SEARCH_BUDGET) -> np.ndarray:
    """Row-uniform kstar x b semibalanced array in symbols 1..v.

    Odd prime v uses the difference construction (replicated when b is a
    multiple of v(v-1)/2); anything else falls back to a bounded search.
    Raises InfeasibleError with ``smallest_b`` set on failure.
    """
    if v < 2:
        raise InvalidParameterError("need v >= 2")
    if not 1 <= kstar <= v:
        raise InvalidParameterError(f"kstar={kstar} must lie in [1, v={v}]")
    if b < 1:
        raise InvalidParameterError("need b >= 1")
    smallest = smallest_supported_b(v, kstar)
    if kstar == 1:
        if b % v:
            raise InfeasibleError(
                f"a single uniform row needs v={v} to divide b={b}",
                smallest_b=smallest,
            )
        return np.tile(np.arange(1, v + 1), b // v)[None, :]
    if b % smallest:
        raise InfeasibleError(
            f"b={b} is incompatible with v={v}, kstar={kstar}: pair balance "
            f"needs v(v-1)/2={v * (v - 1) // 2} | b and row uniformity needs "
            f"v | b (smallest b = {smallest})",
            smallest_b=smallest,
        )
    if is_odd_prime(v):
        return replicate_sba(base_difference_array(v, kstar), b // smallest)
    A = search_sba(v, kstar, smallest, node_budget)
    if A is not None:
        return replicate_sba(A, b // smallest)
    A = search_sba(v, kstar, b, node_budget)
    if A is None:
        raise InfeasibleError(
            f"no row-uniform semibalanced array exists for v={v}, "
            f"kstar={kstar}, b={b}",
            smallest_b=None,
        )
    return A
