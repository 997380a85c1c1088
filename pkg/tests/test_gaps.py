import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from inertia.gaps import (
    GapConditionError,
    check_classical,
    check_kz,
    find_sequence,
    make_plan,
    squares,
)


def admissible(i, N, N_prev, L1, L2):
    """Gap inequality for lam = N^2, written out independently (N may be an array)."""
    lp = 0 if N_prev is None else N_prev**2
    return (N + 1) ** 2 - N**2 > (i - 1) * lp + (i + 1) * (N + 1) * L1 + (i + 1) * L2


def brute_force(n, L1, L2, N_cap):
    """Exhaustive lexicographic search over increasing tuples (innermost index vectorised)."""

    def rec(prefix):
        i = len(prefix) + 1
        prev = prefix[-1] if prefix else None
        start = 1 if prev is None else prev + 1
        cand = np.arange(start, N_cap + 1)
        ok = admissible(i, cand, prev, L1, L2)
        if i == n:
            hits = cand[ok]
            return prefix + [int(hits[0])] if hits.size else None
        for N in cand[ok]:
            found = rec(prefix + [int(N)])
            if found is not None:
                return found
        return None

    return rec([])


def test_make_plan_example():
    plan = make_plan(1, 0.1, 1.0, [1])
    assert plan.gamma == pytest.approx(0.3, abs=1e-12)
    assert plan.margins[0] == pytest.approx(0.6, abs=1e-12)
    # theta = lam_1 + gamma + sqrt(lam_2) L1 + L2
    assert plan.theta_seq[0] == pytest.approx(1 + 0.3 + 0.2 + 1.0, abs=1e-12)


def test_degenerate_constants():
    for N in (1, 3, 10):
        plan = make_plan(1, 0.0, 0.0, [N])
        assert plan.theta_seq[0] == pytest.approx(N**2 + plan.gamma, abs=1e-12)
        assert plan.gamma > 0


def test_rejection_reports_index_and_margin():
    with pytest.raises(GapConditionError) as err:
        make_plan(1, 0.1, 10.0, [1])
    assert err.value.index == 1
    assert err.value.margin == pytest.approx(-17.4, abs=1e-12)


def test_make_plan_input_checks():
    with pytest.raises(GapConditionError):
        make_plan(2, 0.0, 0.0, [3, 3])
    with pytest.raises(GapConditionError):
        make_plan(2, 0.0, 0.0, [3])


def test_find_sequence_first_example():
    assert find_sequence(1, 0.1, 1.0).N_seq == (1,)
    assert brute_force(1, 0.1, 1.0, 100) == [1]


def test_find_sequence_three_levels_matches_exhaustive_search():
    plan = find_sequence(3, 0.05, 2.0, squares, 500)
    assert list(plan.N_seq) == brute_force(3, 0.05, 2.0, 500)
    again = make_plan(3, 0.05, 2.0, plan.N_seq)
    assert again == plan


def test_infeasible():
    with pytest.raises(GapConditionError, match="no sequence"):
        find_sequence(1, 0.1, 1e6, squares, 100)


def test_strong_condition_implies_gap_condition():
    strong = find_sequence(2, 0.05, 1.0, condition="strong")
    weak = find_sequence(2, 0.05, 1.0)
    assert strong.N_seq >= weak.N_seq
    make_plan(2, 0.05, 1.0, strong.N_seq)


def test_plan_json():
    doc = json.loads(find_sequence(2, 0.05, 1.0).to_json())
    assert set(doc) == {"n", "L1", "L2", "N_seq", "gamma", "theta_seq", "margins"}


def test_classical_condition():
    assert check_classical(1, 0.0, squares, 100) == 1
    # for n = 2 the quotient is negative from N = 3 on
    N = np.arange(3, 10_001)
    assert np.all((N + 1) ** 2 - 2 * N**2 < 0)
    assert check_classical(2, 1.0, squares, 10_000) is None


def test_kz_matches_brute_force():
    for L in (0.01, 0.1, 0.5, 2.0):
        got = check_kz(2, L, squares, 300)
        want = None
        for N1 in range(1, 301):
            if (N1 + 1) ** 2 - N1**2 > L * (2 * N1 + 1):
                for N2 in range(N1 + 1, 301):
                    if (N2 + 1) ** 2 - N2**2 - N1**2 > L * (2 * N2 + 1):
                        want = [N1, N2]
                        break
            if want:
                break
        assert got == want


L_values = st.floats(0.0, 3.0, allow_nan=False)


@given(st.integers(1, 3), L_values, L_values)
@settings(max_examples=40, deadline=None)
def test_returned_plans_revalidate_and_contract(n, L1, L2):
    try:
        plan = find_sequence(n, L1, L2, squares, 200)
    except GapConditionError:
        return
    assert make_plan(n, L1, L2, plan.N_seq) == plan
    for i, N in enumerate(plan.N_seq, start=1):
        q = (np.sqrt((N + 1) ** 2) * L1 + L2) / (plan.gamma + np.sqrt((N + 1) ** 2) * L1 + L2)
        assert q < 1
        th = plan.theta_seq[i - 1]
        assert N**2 < th < (N + 1) ** 2
        for j in range(i):
            prev = plan.theta_seq[i - 2] if i > 1 else 0.0
            assert N**2 < th + j * prev < (N + 1) ** 2


@given(st.integers(1, 3), L_values, L_values, st.floats(0.0, 2.0), st.floats(0.0, 2.0))
@settings(max_examples=40, deadline=None)
def test_monotone_in_lipschitz_constants(n, L1, L2, d1, d2):
    def feasible(a, b):
        try:
            find_sequence(n, a, b, squares, 60)
            return True
        except GapConditionError:
            return False

    if not feasible(L1, L2):
        assert not feasible(L1 + d1, L2 + d2)


@given(st.integers(1, 2), st.floats(0.0, 0.5), st.floats(0.0, 3.0))
@settings(max_examples=25, deadline=None)
def test_greedy_is_lexicographic_minimum(n, L1, L2):
    try:
        got = list(find_sequence(n, L1, L2, squares, 80).N_seq)
    except GapConditionError:
        got = None
    assert got == brute_force(n, L1, L2, 80)
