import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from trendblock.errors import BudgetExceededError, InfeasibleError, InvalidParameterError
from trendblock.model import phi_vector
from trendblock.orders import (
    brute_force_optimal,
    min_ssq_profile,
    min_trend_loading_bruteforce,
    optimal_order,
    optimal_order_kind,
    order_space,
    order_stats,
    pairwise_objective,
    pi_q,
    s_star,
    tf_ntf_order,
    trend_filler,
)

HALF_STEP = 1 / math.sqrt(168)


def test_all_distinct_order_is_zero():
    st_ = order_stats((3, 1, 4, 2), 0.2, 0.7)
    assert (st_.s, st_.T, st_.F) == (0, pytest.approx(0, abs=1e-15), pytest.approx(0, abs=1e-15))


def test_mirror_pair_order_stats():
    l0, l1 = 0.1, 0.8
    st_ = order_stats((1, 2, 2, 1), l0, l1)
    assert st_.s == 2
    assert st_.h == pytest.approx((0, 0), abs=1e-15)
    assert st_.T == pytest.approx(-0.5, abs=1e-15)
    assert st_.F == pytest.approx(-2 * l0 + l1 / 2, abs=1e-15)


def test_order_identities_random(rng):
    for _ in range(10_000):
        k = int(rng.integers(2, 9))
        v = int(rng.integers(1, 6))
        order = tuple(rng.integers(1, v + 1, size=k))
        l0, l1 = rng.uniform(0, 1 / k), rng.uniform(0, 1)
        st_ = order_stats(order, l0, l1)
        pairs = [(p, q) for p, q in itertools.combinations(range(k), 2)
                 if order[p] == order[q]]
        phi = phi_vector(k)
        assert st_.s == len(pairs)
        T_direct = sum(phi[p] * phi[q] for p, q in pairs)
        assert abs(st_.T - T_direct) <= 1e-12
        assert abs(st_.F - (-l0 * st_.s - l1 * st_.T)) <= 1e-12
        if _ < 500:
            assert abs(st_.F - pairwise_objective(order, l0, l1)) <= 1e-12


def test_trend_free_order_hits_lower_bound():
    for v, k, var in [(2, 5, "A"), (2, 4, "B"), (3, 7, "A"), (2, 6, "C")]:
        st_ = order_stats(tf_ntf_order(v, k, var), 0.0, 1.0)
        assert st_.T == pytest.approx(-0.5, abs=1e-12)


def test_s_star_examples():
    assert s_star(4, 0.1, 1) == 1
    assert s_star(4, 0, 1) == 2
    for l0 in (0, 0.1, 0.25):
        assert s_star(4, l0, 0) == 0
        assert s_star(7, l0 / 2, 0) == 0


@given(st.integers(2, 30), st.floats(0, 1), st.floats(0, 1))
def test_s_star_bounds(k, a, l1):
    s = s_star(k, a / k, l1)
    assert 0 <= s <= k / 2
    assert 2 * s < k + 1


def test_pi_q_examples():
    assert pi_q(4, 1) == (1, 2, 3, 1)
    assert pi_q(4, 2) == (1, 2, 2, 1)
    assert pi_q(6, 2) == (1, 2, 3, 4, 2, 1)
    assert pi_q(5, 0) == (1, 2, 3, 4, 5)
    assert pi_q(4, 1, labels=[7, 5, 6]) == (7, 5, 6, 7)


def test_pi_q_errors():
    with pytest.raises(InvalidParameterError):
        pi_q(4, 3)
    with pytest.raises(InvalidParameterError):
        pi_q(4, 1, labels=[1, 1, 2])


@given(st.integers(2, 20), st.data())
def test_pi_q_properties(k, data):
    q = data.draw(st.integers(0, k // 2))
    st_ = order_stats(pi_q(k, q), 0, 1)
    assert st_.s == q
    for i in range(q):
        assert abs(st_.h[i]) <= 1e-12


def test_optimal_order_v7_k4_regions():
    for ratio in (0.05, 0.1, 0.3, 0.449):
        assert optimal_order(7, 4, ratio * 0.5, 0.5) == (1, 2, 3, 1)
    for ratio in (0.0, 0.01, 0.049):
        assert optimal_order(7, 4, ratio, 1.0) == (1, 2, 2, 1)
    assert optimal_order(7, 4, 0.2, 0.4) == (1, 2, 3, 4)


def test_optimal_order_ntf_when_lambda0_is_one_over_k():
    for l1 in (0.0, 0.3, 1.0):
        kind, _ = optimal_order_kind(3, 8, 1 / 8, l1)
        assert kind == "NTF"


def test_optimal_order_matches_oracle_spot():
    order = optimal_order(3, 6, 1 / 6, 1)
    _, fmax = brute_force_optimal(3, 6, 1 / 6, 1)
    assert order_stats(order, 1 / 6, 1).F == pytest.approx(fmax, abs=1e-12)


@pytest.mark.parametrize("v,k", [(2, 3), (3, 4), (3, 5), (4, 6), (4, 7), (5, 8)])
def test_min_coincidences_when_k_below_2v(v, k):
    _, s, _ = order_space(v, k)
    assert int(s.min()) == k - v


def test_tf_variant_examples():
    assert tf_ntf_order(2, 5, "A") == (2, 1, 1, 1, 2)
    assert tf_ntf_order(2, 4, "B") == (1, 2, 2, 1)
    ntf = tf_ntf_order(3, 8, "NTF")
    st_ = order_stats(ntf, 0, 1)
    assert st_.n == (3, 3, 2)
    assert abs(st_.h[0]) == pytest.approx(HALF_STEP, abs=1e-12)
    assert abs(st_.h[1]) == pytest.approx(HALF_STEP, abs=1e-12)
    assert st_.h[2] == pytest.approx(0, abs=1e-12)


@pytest.mark.parametrize("v,k,var", [(2, 4, "A"), (2, 5, "B"), (3, 6, "C"), (2, 8, "C"),
                                     (2, 3, "A"), (2, 5, "X")])
def test_tf_variant_mismatch(v, k, var):
    with pytest.raises(InvalidParameterError):
        tf_ntf_order(v, k, var)


def test_tf_a_needs_three_copies():
    # k=9, v=4: m=2, t=1, so the odd treatment has n=3 (fine); k=11, v=5 gives
    # one treatment with n=3 too. v=3, k=7: n=(3,2,2) fine. A profile with an
    # odd count of 1 cannot be trend free.
    with pytest.raises(InfeasibleError):
        trend_filler(5, [3, 4, 5], {1: 1, 2: 2})


def _mirror_ok(order):
    return order == order[::-1]


@pytest.mark.parametrize("v", [2, 3, 4])
def test_tf_ntf_structure(v):
    for k in range(2 * v, 15):
        m, t = divmod(k, v)
        if k % 2:
            kinds = ["A"]
        elif k % v == 0 and (k // v) % 2 == 0:
            kinds = ["B"]
        else:
            kinds = ["C", "NTF"]
        for var in kinds:
            order = tf_ntf_order(v, k, var)
            st_ = order_stats(order, 0, 1, v=v)
            assert sum(st_.n) == k and len(order) == k
            if var in ("A", "B", "C"):
                assert max(abs(x) for x in st_.h) <= 1e-12
            if var in ("B", "C"):
                assert _mirror_ok(order)
            if var == "B":
                assert set(st_.n) == {m}
            if var == "C":
                xi = m if m % 2 == 0 else m - 1
                assert set(st_.n) <= {xi, xi + 2}
            if var in ("A", "NTF"):
                assert sorted(st_.n, reverse=True) == [m + 1] * t + [m] * (v - t)
            if var == "NTF":
                bound = -phi_vector(k)[k // 2 - 1]
                for n, h in zip(st_.n, st_.h):
                    expected = bound if n % 2 else 0.0
                    assert abs(abs(h) - expected) <= 1e-12


def test_trend_filler_examples():
    out = trend_filler(5, [2, 3, 4], {1: 3})
    assert out == {1: (2, 3, 4)}
    phi7 = phi_vector(7)
    out = trend_filler(7, range(1, 8), {1: 3, 2: 4})
    for ps in out.values():
        assert abs(phi7[[p - 1 for p in ps]].sum()) <= 1e-12
    assert sorted(out[1] + out[2]) == list(range(1, 8))


def test_half_step_bound_is_tight():
    assert min_trend_loading_bruteforce(8, 3) == pytest.approx(HALF_STEP, abs=1e-12)
    assert HALF_STEP == pytest.approx(-phi_vector(8)[3], abs=1e-15)
    out = trend_filler(8, range(1, 9), {1: 3, 2: 3, 3: 2}, target="half")
    phi8 = phi_vector(8)
    for i, ps in out.items():
        h = phi8[[p - 1 for p in ps]].sum()
        assert abs(abs(h) - (HALF_STEP if i < 3 else 0)) <= 1e-12


@pytest.mark.parametrize("k", [4, 6, 8, 10, 12, 14])
def test_odd_replication_cannot_beat_half_step(k):
    bound = -phi_vector(k)[k // 2 - 1]
    for n in range(1, k, 2):
        assert min_trend_loading_bruteforce(k, n) == pytest.approx(bound, abs=1e-12)


def test_trend_filler_parity_error():
    with pytest.raises(InfeasibleError, match="n_i\\(k\\+1\\) is odd"):
        trend_filler(6, range(1, 7), {1: 3, 2: 3})


def test_trend_filler_bad_input():
    with pytest.raises(InvalidParameterError):
        trend_filler(5, [1, 2], {1: 3})
    with pytest.raises(InvalidParameterError):
        trend_filler(5, [1, 2, 3], {1: 3}, target="half")


def test_brute_force_examples():
    order, fmax = brute_force_optimal(7, 4, 0, 1)
    assert fmax == pytest.approx(0.5, abs=1e-12)
    assert order_stats(order, 0, 1).F == pytest.approx(0.5, abs=1e-12)
    with pytest.raises(InvalidParameterError):
        brute_force_optimal(2, 2, 0.5 + 1e-9, 1)
    with pytest.raises(BudgetExceededError) as exc:
        brute_force_optimal(5, 8, 0, 1, budget=1000)
    assert exc.value.required == 5**8


def test_brute_force_tie_break_is_lexicographic():
    order, _ = brute_force_optimal(3, 3, 0, 0)
    assert order == (1, 1, 1)


def test_budget_env(monkeypatch):
    monkeypatch.setenv("TRENDBLOCK_ORACLE_BUDGET", "100")
    with pytest.raises(BudgetExceededError):
        brute_force_optimal(3, 5, 0, 1)


def _partition_oracle(k, v, u):
    best = None
    for n in itertools.product(range(k + 1), repeat=v):
        if sum(n) != k or sum(x % 2 for x in n) != u:
            continue
        ssq = sum(x * x for x in n)
        best = ssq if best is None else min(best, ssq)
    return best


def test_min_ssq_profile_examples():
    prof = min_ssq_profile(10, 4, 2)
    assert prof == (3, 3, 2, 2)
    assert sum(x * x for x in prof) == 26
    assert (sum(x * x for x in prof) - 10) // 2 == 8
    assert min_ssq_profile(8, 4, 0) == (2, 2, 2, 2)
    assert sorted(min_ssq_profile(10, 4, 4)) == [1, 3, 3, 3]


@pytest.mark.parametrize("v", [2, 3, 4])
def test_min_ssq_profile_against_partitions(v):
    for k in range(2 * v, 15, 2):
        for u in range(0, v + 1, 2):
            oracle = _partition_oracle(k, v, u)
            if oracle is None:
                with pytest.raises(InfeasibleError):
                    min_ssq_profile(k, v, u)
                continue
            prof = min_ssq_profile(k, v, u)
            assert sum(prof) == k and sum(x % 2 for x in prof) == u
            assert sum(x * x for x in prof) == oracle


def test_min_ssq_profile_odd_u():
    with pytest.raises(InfeasibleError):
        min_ssq_profile(10, 4, 1)


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 4), st.integers(2, 7), st.floats(0, 1), st.floats(0, 1))
def test_optimal_order_beats_oracle_never(v, k, a, l1):
    l0 = a / k
    order = optimal_order(v, k, l0, l1)
    assert max(order) <= v
    _, fmax = brute_force_optimal(v, k, l0, l1)
    assert abs(order_stats(order, l0, l1).F - fmax) <= 1e-12


def test_pi_q_trace_monotone_in_distance():
    from trendblock.efficiency import optimal_q, q_range, trace_cl_closed_form

    for l0 in np.linspace(0, 0.25, 7):
        for l1 in np.linspace(0, 1, 7):
            qs = list(q_range(7, 4))
            qstar = optimal_q(7, 4, l0, l1)
            tr = {q: trace_cl_closed_form(7, 4, 21, l0, l1, "pi_q", q) for q in qs}
            for q in qs:
                if q < qstar:
                    assert tr[q] <= tr[q + 1] + 1e-12
                if q > qstar:
                    assert tr[q] <= tr[q - 1] + 1e-12
