"""Within-block orders: statistics, optimal-order selection and the
trend-free / nearly trend-free constructions.

An order is a tuple of treatment labels (1-based), one per position of a
block. The per-block objective is ``F = -lambda0 * s - lambda1 * T`` where
``s`` counts coincident position pairs and ``T`` sums phi(p)phi(q) over them.
"""

from __future__ import annotations

import itertools
import math
import os
from dataclasses import dataclass
from functools import lru_cache
from typing import Mapping, Sequence

import numpy as np

from .errors import BudgetExceededError, InfeasibleError, InvalidParameterError
from .model import phi_squared, phi_vector, validate_lambdas, w_matrix

Order = tuple
DEFAULT_ORACLE_BUDGET = 10**7
BUDGET_ENV = "TRENDBLOCK_ORACLE_BUDGET"

KINDS = ("pi_q", "TF_A", "TF_B", "TF_C", "NTF")


def oracle_budget() -> int:
    raw = os.environ.get(BUDGET_ENV)
    return int(float(raw)) if raw else DEFAULT_ORACLE_BUDGET


def as_order(order: Sequence[int], v: int | None = None) -> Order:
    order = tuple(int(x) for x in order)
    if len(order) < 1:
        raise InvalidParameterError("empty order")
    if min(order) < 1 or (v is not None and max(order) > v):
        raise InvalidParameterError(f"order entries out of range: {order}")
    return order


@dataclass(frozen=True)
class OrderStats:
    n: tuple  # replications n_i
    h: tuple  # trend loadings h_i = sum_p [pi(p) == i] phi(p)
    s: int
    T: float
    F: float

    def to_dict(self):
        return {"n": list(self.n), "h": list(self.h), "s": self.s,
                "T": self.T, "F": self.F}


def order_stats(order, lambda0: float, lambda1: float, v: int | None = None):
    order = as_order(order, v)
    k = len(order)
    validate_lambdas(k, lambda0, lambda1)
    v = max(order) if v is None else v
    phi = phi_vector(k)
    idx = np.asarray(order) - 1
    n = np.bincount(idx, minlength=v)
    h = np.bincount(idx, weights=phi, minlength=v)
    s = int((np.sum(n * n) - k) // 2)
    T = float((np.sum(h * h) - 1.0) / 2)
    F = -lambda0 * s - lambda1 * T
    return OrderStats(tuple(int(x) for x in n), tuple(float(x) for x in h),
                      s, T, F)


def pairwise_objective(order, lambda0: float, lambda1: float) -> float:
    """F as the plain sum of w_pq over coincident position pairs."""
    order = as_order(order)
    W = w_matrix(len(order), lambda0, lambda1)
    return float(sum(
        W[p, q]
        for p, q in itertools.combinations(range(len(order)), 2)
        if order[p] == order[q]
    ))


def objective(order, lambda0, lambda1) -> float:
    return order_stats(order, lambda0, lambda1).F


def s_star(k: int, lambda0: float, lambda1: float) -> int:
    """Largest p < (k+1)/2 with lambda1 * phi(p)^2 > lambda0, else 0."""
    validate_lambdas(k, lambda0, lambda1)
    best = 0
    for p in range(1, (k + 2) // 2):
        if 2 * p >= k + 1:
            break
        if lambda1 * phi_squared(k, p) > lambda0:
            best = p
    return best


def pi_q(k: int, q: int, labels: Sequence[int] | None = None) -> Order:
    """Order with q mirrored pairs at the ends and k - 2q singletons inside."""
    if not 0 <= q <= k // 2:
        raise InvalidParameterError(f"q={q} outside [0, {k // 2}]")
    need = k - q
    if labels is None:
        labels = range(1, need + 1)
    labels = list(labels)
    if len(labels) < need or len(set(labels[:need])) < need:
        raise InvalidParameterError(
            f"pi_q needs {need} distinct labels, got {len(set(labels))}"
        )
    head = labels[:q]
    middle = labels[q:need]
    return tuple(head + middle + head[::-1])


def split_km(v: int, k: int) -> tuple[int, int]:
    """(m, t) with k = m v + t, 0 <= t < v."""
    return divmod(k, v)


def tf_variant_for(v: int, k: int) -> str | None:
    """Structural variant for k >= 2v (None when the choice depends on the
    lambdas, i.e. variant C vs NTF)."""
    if k < 2 * v:
        raise InvalidParameterError("TF/NTF orders need k >= 2v")
    if k % 2 == 1:
        return "TF_A"
    if k % v == 0 and (k // v) % 2 == 0:
        return "TF_B"
    return None


def optimal_order_kind(v: int, k: int, lambda0: float, lambda1: float):
    """Return ``(kind, q)``; q is only meaningful for kind ``"pi_q"``."""
    if v < 2 or k < 2:
        raise InvalidParameterError("need v >= 2 and k >= 2")
    validate_lambdas(k, lambda0, lambda1)
    if k < 2 * v:
        ss = s_star(k, lambda0, lambda1)
        return ("pi_q", ss) if k <= v + ss else ("pi_q", k - v)
    variant = tf_variant_for(v, k)
    if variant is not None:
        return variant, None
    if lambda1 * phi_squared(k, k // 2) > lambda0:
        return "TF_C", None
    return "NTF", None


def order_for_kind(v: int, k: int, kind: str, q: int | None = None) -> Order:
    if kind == "pi_q":
        if q is None or q < max(0, k - v):
            raise InvalidParameterError(
                f"q={q} infeasible for v={v}, k={k}: need q >= {max(0, k - v)}"
            )
        return pi_q(k, q)
    if kind in ("TF_A", "TF_B", "TF_C", "NTF"):
        return tf_ntf_order(v, k, kind.split("_")[-1])
    raise InvalidParameterError(f"unknown order kind {kind!r}")


def optimal_order(v: int, k: int, lambda0: float, lambda1: float) -> Order:
    kind, q = optimal_order_kind(v, k, lambda0, lambda1)
    return order_for_kind(v, k, kind, q)


def _offset(k: int, p: int) -> int:
    # phi(p) is proportional to this integer
    return 2 * p - k - 1


def trend_filler(k: int, positions, replications: Mapping[int, int],
                 target: str = "zero", node_budget: int = 2_000_000):
    """Assign treatments to ``positions`` so each one is (nearly) orthogonal
    to the linear trend.

    ``replications`` maps treatment -> count; the counts must add up to the
    number of positions. With ``target="zero"`` every treatment gets
    ``h_i = 0``. With ``target="half"`` (k even) odd-replicated treatments
    get ``|h_i| = -phi(k/2)``, the smallest attainable value, and even ones
    get 0. Even-replicated treatments are mirror-paired first when the
    position set is symmetric; the rest is a backtracking search.

    Returns a dict treatment -> sorted tuple of positions.
    Raises InfeasibleError with the violated condition otherwise.
    """
    positions = sorted(int(p) for p in positions)
    if len(set(positions)) != len(positions) or (
        positions and (positions[0] < 1 or positions[-1] > k)
    ):
        raise InvalidParameterError("positions must be distinct and in 1..k")
    reps = {int(i): int(n) for i, n in replications.items() if n > 0}
    if sum(reps.values()) != len(positions):
        raise InvalidParameterError(
            f"replications sum to {sum(reps.values())}, "
            f"but {len(positions)} positions given"
        )
    if target not in ("zero", "half"):
        raise InvalidParameterError("target must be 'zero' or 'half'")
    if target == "half" and k % 2:
        raise InvalidParameterError("target 'half' needs an even k")

    def targets_for(n):
        if target == "zero" or n % 2 == 0:
            return (0,)
        return (1, -1)

    if target == "zero":
        bad = [i for i, n in reps.items() if (n * (k + 1)) % 2]
        if bad:
            raise InfeasibleError(
                f"no trend-free placement: n_i(k+1) is odd for treatments {bad}"
            )

    placement: dict[int, list[int]] = {i: [] for i in reps}
    free = list(positions)
    fset = set(free)
    if all(k + 1 - p in fset for p in free):
        # mirror pre-placement of even replications, outermost first
        pairs = [(p, k + 1 - p) for p in free if 2 * p < k + 1]
        for i in sorted(reps):
            n = reps[i]
            if n % 2 == 0:
                for _ in range(n // 2):
                    a, z = pairs.pop(0)
                    placement[i] += [a, z]
        used = {p for ps in placement.values() for p in ps}
        free = [p for p in free if p not in used]

    todo = {i: n for i, n in reps.items() if len(placement[i]) < n}
    found = _search_placement(k, free, todo, targets_for, node_budget)
    if found is None:
        # the mirror shortcut may have consumed positions badly; retry plainly
        placement = {i: [] for i in reps}
        found = _search_placement(k, positions, reps, targets_for, node_budget)
        if found is None:
            want = "h_i = 0" if target == "zero" else "|h_i| = -phi(k/2)"
            raise InfeasibleError(
                f"no placement with {want} for replications {reps} "
                f"on positions {positions}"
            )
    for i, ps in found.items():
        placement[i] += ps
    return {i: tuple(sorted(ps)) for i, ps in placement.items()}


def _search_placement(k, positions, reps, targets_for, node_budget):
    """Backtracking over positions (largest |offset| first)."""
    if not reps:
        return {}
    pos = sorted(positions, key=lambda p: (-abs(_offset(k, p)), p))
    offs = [_offset(k, p) for p in pos]
    # largest |offset| among positions idx.. (pos sorted by decreasing |offset|)
    tail_max = [abs(o) for o in offs] + [0]
    treatments = sorted(reps)
    tgts = {i: targets_for(reps[i]) for i in treatments}
    remaining = {i: reps[i] for i in treatments}
    sums = {i: 0 for i in treatments}
    chosen = {i: [] for i in treatments}
    failed = set()
    nodes = 0

    def feasible(i, idx):
        c = remaining[i]
        bound = c * tail_max[idx]
        if c == 0:
            return sums[i] in tgts[i]
        return any(abs(t - sums[i]) <= bound
                   and (t - sums[i] - c * (k + 1)) % 2 == 0
                   for t in tgts[i])

    def state(idx):
        return idx, tuple(sorted(
            (remaining[i], sums[i], tgts[i]) for i in treatments
        ))

    def rec(idx):
        nonlocal nodes
        if idx == len(pos):
            return all(sums[i] in tgts[i] for i in treatments)
        key = state(idx)
        if key in failed:
            return False
        nodes += 1
        if nodes > node_budget:
            raise BudgetExceededError(
                "trend placement search exceeded its node budget",
                required=None,
            )
        o = offs[idx]
        tried = set()
        for i in treatments:
            if remaining[i] == 0:
                continue
            sig = (remaining[i], sums[i], tgts[i])
            if sig in tried:
                continue
            tried.add(sig)
            remaining[i] -= 1
            sums[i] += o
            chosen[i].append(pos[idx])
            if all(feasible(j, idx + 1) for j in treatments) and rec(idx + 1):
                return True
            chosen[i].pop()
            sums[i] -= o
            remaining[i] += 1
        failed.add(key)
        return False

    if rec(0):
        return chosen
    return None


def _tf_replications(v, k):
    m, t = split_km(v, k)
    return [m + 1] * t + [m] * (v - t)


def tf_ntf_order(v: int, k: int, variant: str) -> Order:
    """Trend-free (variants ``A``, ``B``, ``C``) or nearly trend-free
    (``NTF``) order for k >= 2v.

    Treatments 1..t carry the larger replication m+1 (k = m v + t) for A and
    NTF; for C the treatments with replication xi+2 come first and sit
    outermost.
    """
    variant = variant.upper().replace("TF_", "")
    if k < 2 * v:
        raise InvalidParameterError("TF/NTF orders need k >= 2v")
    m, t = split_km(v, k)
    even_ratio = k % v == 0 and (k // v) % 2 == 0
    if variant == "A":
        if k % 2 == 0:
            raise InvalidParameterError("variant A needs an odd k")
    elif variant == "B":
        if not even_ratio:
            raise InvalidParameterError("variant B needs k/v to be an even integer")
    elif variant in ("C", "NTF"):
        if k % 2 or even_ratio:
            raise InvalidParameterError(
                f"variant {variant} needs even k with k/v not an even integer"
            )
    else:
        raise InvalidParameterError(f"unknown variant {variant!r}")

    if variant == "B":
        half = [i for _ in range(m // 2) for i in range(1, v + 1)]
        return tuple(half + half[::-1])
    if variant == "C":
        xi = m if m % 2 == 0 else m - 1
        big = (k - v * xi) // 2
        reps = [xi + 2] * big + [xi] * (v - big)
        half = [i + 1 for i, n in enumerate(reps) for _ in range(n // 2)]
        return tuple(half + half[::-1])

    reps = _tf_replications(v, k)
    odd = {i + 1: n for i, n in enumerate(reps) if n % 2}
    even = [(i + 1, n) for i, n in enumerate(reps) if n % 2 == 0]
    if any(n < 3 for n in odd.values()):
        raise InfeasibleError(
            "odd-replicated treatments need n_i >= 3 for a trend-free filling"
        )
    head = [i for i, n in even for _ in range(n // 2)]
    inner = range(len(head) + 1, k - len(head) + 1)
    fill = trend_filler(k, inner, odd, "zero" if variant == "A" else "half")
    order = [0] * k
    for p, i in enumerate(head, start=1):
        order[p - 1] = order[k - p] = i
    for i, ps in fill.items():
        for p in ps:
            order[p - 1] = i
    return tuple(order)


def min_trend_loading_bruteforce(k: int, n: int) -> float:
    """min |h| over all placements of a treatment replicated n times."""
    phi = phi_vector(k)
    best = math.inf
    for combo in itertools.combinations(range(k), n):
        best = min(best, abs(phi[list(combo)].sum()))
    return best


@lru_cache(maxsize=32)
def _order_space(v: int, k: int):
    orders = np.array(list(itertools.product(range(1, v + 1), repeat=k)),
                      dtype=np.int8)
    phi = phi_vector(k)
    onehot = orders[:, :, None] == np.arange(1, v + 1)
    n = onehot.sum(axis=1)
    h = np.einsum("opi,p->oi", onehot, phi)
    s = (np.sum(n * n, axis=1) - k) // 2
    T = (np.sum(h * h, axis=1) - 1.0) / 2
    orders.setflags(write=False)
    return orders, s, T


def order_space(v: int, k: int, budget: int | None = None):
    """All v**k orders in lexicographic order, with their s and T values."""
    budget = oracle_budget() if budget is None else budget
    size = v**k
    if size > budget:
        raise BudgetExceededError(
            f"enumerating {size} orders exceeds budget {budget}", required=size
        )
    return _order_space(v, k)


def brute_force_optimal(v: int, k: int, lambda0: float, lambda1: float,
                        budget: int | None = None, tie_tol: float = 1e-12):
    """Exact maximiser of F over every order; lexicographically smallest
    among (near-)ties."""
    if v < 1 or k < 2:
        raise InvalidParameterError("need v >= 1 and k >= 2")
    validate_lambdas(k, lambda0, lambda1)
    orders, s, T = order_space(v, k, budget)
    F = -lambda0 * s - lambda1 * T
    fmax = F.max()
    best = int(np.argmax(F >= fmax - tie_tol))
    return tuple(int(x) for x in orders[best]), float(fmax)


def min_ssq_profile(k: int, v: int, u: int) -> tuple:
    """Replication multiset minimising sum n_i^2 among orders with exactly u
    odd-replicated treatments (k even, k >= 2v). Sorted decreasingly."""
    if k % 2 or k < 2 * v:
        raise InvalidParameterError("need k even and k >= 2v")
    if not 0 <= u <= v:
        raise InvalidParameterError(f"u={u} outside [0, {v}]")
    if u % 2:
        raise InfeasibleError(f"no order of even length {k} has {u} odd replications")
    m, t = split_km(v, k)
    if m % 2 == 0:
        if u <= t:
            counts = {m: v - (u + t) // 2, m + 1: u, m + 2: (t - u) // 2}
        else:
            counts = {m - 1: (u - t) // 2, m: v - u, m + 1: (u + t) // 2}
    else:
        if u <= v - t:
            counts = {m - 1: (v - u - t) // 2, m: u, m + 1: (v - u + t) // 2}
        else:
            counts = {m: (u + v - t) // 2, m + 1: v - u, m + 2: (u - v + t) // 2}
    profile = sorted((j for j, c in counts.items() for _ in range(c)),
                     reverse=True)
    if any(c < 0 for c in counts.values()) or sum(profile) != k or len(profile) != v:
        raise InfeasibleError(f"no order with {u} odd replications for k={k}, v={v}")
    return tuple(profile)
