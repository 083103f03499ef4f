"""Rank-based entropy calculus and the enumeration oracle."""

from __future__ import annotations

import random
from fractions import Fraction

import numpy as np
import pytest

from dsagg import (
    BruteForceAnalyzer,
    brute_force_mi,
    build_lp,
    conditional_mi,
    entropy,
    protocol_variables,
    solve_exact,
    synthesize,
    synthesize_classical,
    verify_correctness,
    verify_entropy_bounds,
    verify_key_independence,
    verify_security,
    zero_user_key,
)
from dsagg.errors import DimensionMismatch, TooLarge
from dsagg.linsec import _dedup_triples
from dsagg.scheme import break_zero_sum

from helpers import (
    analysis,
    classical_instance,
    rank_oracle,
    reference_k6_scheme,
    single_protected_instance,
)


@pytest.fixture(scope="module")
def ref_spec():
    return reference_k6_scheme()


@pytest.fixture(scope="module")
def ref_vars(ref_spec):
    return protocol_variables(ref_spec)


# ---------------------------------------------------------------------------
# Protocol variables
# ---------------------------------------------------------------------------


def test_message_is_input_plus_key(ref_vars):
    for k in range(1, 7):
        expected = ref_vars[f"W{k}"].coeffs + ref_vars[f"Z{k}"].coeffs
        assert ref_vars[f"X{k}"].coeffs == expected


def test_reference_message_coefficients(ref_vars):
    # user 4's second message row is W_{4,2} + 2 N_4: with 12 input
    # columns first, N_4 sits at column 12 + 3
    row = ref_vars["X4"].coeffs.to_lists()[1]
    assert row[7] == 1          # W_{4,2}
    assert row[12 + 3] == 2     # doubled seed coefficient
    assert sum(v != 0 for v in row) == 2


def test_sum_variable_touches_all_inputs(ref_vars):
    rows = ref_vars["SUM"].coeffs.to_lists()
    for i, row in enumerate(rows):
        assert all(row[(k - 1) * 2 + i] == 1 for k in range(1, 7))
        assert all(v == 0 for v in row[12:])


# ---------------------------------------------------------------------------
# Entropy and MI
# ---------------------------------------------------------------------------


def test_input_entropy_is_block_length(ref_vars):
    assert entropy([ref_vars["W1"]]) == 2


def test_empty_entropy(ref_vars):
    assert entropy([]) == 0


def test_all_messages_entropy(ref_vars):
    # each message row holds a distinct unit input column, so the 12
    # stacked rows are independent; the scalar oracle agrees.
    xs = [ref_vars[f"X{k}"] for k in range(1, 7)]
    stacked = [row for v in xs for row in v.coeffs.to_lists()]
    assert rank_oracle(stacked, 5) == 12
    assert entropy(xs) == 12


def test_all_keys_entropy_is_seed_dimension(ref_vars):
    zs = [ref_vars[f"Z{k}"] for k in range(1, 7)]
    assert entropy(zs) == 6


def test_mi_self_is_entropy(ref_vars):
    a = [ref_vars["W1"]]
    assert conditional_mi(a, a, []) == entropy(a)


def test_independent_inputs_have_zero_mi(ref_vars):
    assert conditional_mi([ref_vars["W1"]], [ref_vars["W2"]], []) == 0


def test_reference_leakage_triple_is_zero(ref_vars):
    # protected user 1 against colluders {2,4} with observer 3
    a = [ref_vars["W1"]]
    b = [ref_vars[f"X{k}"] for k in range(1, 7) if k != 3]
    c = [ref_vars["SUM"], ref_vars["W3"], ref_vars["Z3"],
         ref_vars["W2"], ref_vars["Z2"], ref_vars["W4"], ref_vars["Z4"]]
    assert conditional_mi(a, b, c) == 0


def test_mi_symmetry_and_nonnegativity(ref_vars):
    rng = random.Random(17)
    labels = list(ref_vars)
    for _ in range(25):
        pick = lambda: [ref_vars[l] for l in rng.sample(labels, rng.randint(0, 3))]
        a, b, c = pick(), pick(), pick()
        ab = conditional_mi(a, b, c)
        assert ab >= 0
        assert ab == conditional_mi(b, a, c)


def test_dimension_mismatch_rejected(ref_vars):
    other = protocol_variables(synthesize_classical(3, q=5))
    with pytest.raises(DimensionMismatch):
        conditional_mi([ref_vars["W1"]], [other["W1"]], [])


# ---------------------------------------------------------------------------
# Scheme verification
# ---------------------------------------------------------------------------


def test_reference_scheme_fully_verifies(ref_spec, k6_analysis):
    closed, d = k6_analysis
    assert ref_spec.zero_sum_holds()
    assert all(verify_correctness(ref_spec).values())
    report = verify_security(ref_spec, closed)
    assert report.passed
    assert verify_key_independence(ref_spec, closed)
    assert verify_entropy_bounds(ref_spec, closed, d).passed


def test_empty_security_sets_never_leak(ref_spec, k6_analysis):
    closed, _ = k6_analysis
    report = verify_security(ref_spec, closed)
    for check in report.checks:
        if not check.security_set:
            assert check.mi_value == 0


def test_key_independence_values(ref_spec, ref_vars, k6_analysis):
    # fresh key mass of user 1 given colluders {2,4} plus observer 3:
    # exactly one block of 2 symbols
    h = entropy([ref_vars["Z1"], ref_vars["Z2"], ref_vars["Z3"], ref_vars["Z4"]]) - entropy(
        [ref_vars["Z2"], ref_vars["Z3"], ref_vars["Z4"]]
    )
    assert h == 2


def test_key_independence_subsumed_security_set(ref_vars):
    # security set inside the colluding view leaves nothing to check
    h = entropy([ref_vars["Z2"], ref_vars["Z1"]]) - entropy([ref_vars["Z2"], ref_vars["Z1"]])
    assert h == 0


def test_subcase1_conditional_key_entropy(k5_analysis):
    closed, d = k5_analysis
    spec = synthesize(d, q=13, rng_seed=0)
    pv = protocol_variables(spec)
    # users 1 and 2 keep two fresh symbols given user 3's key
    h = entropy([pv["Z1"], pv["Z2"], pv["Z3"]]) - entropy([pv["Z3"]])
    assert h == 2
    assert verify_key_independence(spec, closed)


def test_monotone_consistency_of_security(ref_spec, k6_analysis):
    closed, _ = k6_analysis
    report = verify_security(ref_spec, closed)
    values = {
        (c.security_set, c.collusion_set, c.user): c.passed for c in report.checks
    }
    rng = random.Random(23)
    items = list(values.items())
    for _ in range(50):
        (s, t, u), ok = rng.choice(items)
        if not ok:
            continue
        for (s2, t2, u2), ok2 in items:
            if u2 == u and s2 <= s and t2 <= t:
                assert ok2


def test_unmasked_scheme_leaks(k5_analysis):
    closed, d = k5_analysis
    spec = synthesize(d, q=13, rng_seed=0)
    for user in (1, 2):
        stripped = zero_user_key(spec, user)
        report = verify_security(stripped, closed)
        assert not report.passed
        assert any(
            user in c.security_set and c.mi_value > 0 for c in report.failures()
        )


def test_broken_zero_sum_fails_all_decoders(ref_spec):
    bad = break_zero_sum(ref_spec)
    assert not bad.zero_sum_holds()
    assert verify_correctness(bad) == {u: False for u in range(1, 7)}


def test_classical_scheme_verifies_everywhere():
    closed, d = analysis(classical_instance(5))
    spec = synthesize_classical(5, q=2)
    assert all(verify_correctness(spec).values())
    assert verify_security(spec, closed).passed
    assert verify_entropy_bounds(spec, closed, d).passed


def test_entropy_bound_equality_at_maximal_overlap(k5_analysis):
    # the integral construction cannot exceed its seed budget, so the
    # group bound binds exactly where the overlap is maximal
    closed, d = k5_analysis
    spec = synthesize(d, q=13, rng_seed=0)
    report = verify_entropy_bounds(spec, closed, d)
    maximal = [
        c for c in report.named("protected_group_keys") if c.rhs == d.a_star
    ]
    assert maximal and all(c.equality for c in maximal)


# ---------------------------------------------------------------------------
# Brute-force oracle
# ---------------------------------------------------------------------------


def test_brute_force_self_information():
    spec = synthesize_classical(3, q=2)
    assert brute_force_mi(spec, ["W1"], ["W1"], []) == 1


def test_brute_force_matches_rank_on_classical():
    spec = synthesize_classical(3, q=2)
    pv = protocol_variables(spec)
    bf = BruteForceAnalyzer(spec)
    rng = random.Random(31)
    labels = list(pv)
    for _ in range(20):
        pick = lambda: rng.sample(labels, rng.randint(0, 3))
        a, b, c = pick(), pick(), pick()
        expect = conditional_mi([pv[x] for x in a], [pv[x] for x in b], [pv[x] for x in c])
        assert bf.mi(a, b, c) == expect


def test_brute_force_matches_rank_on_fractional():
    closed, d = analysis(single_protected_instance(4))
    sol = solve_exact(build_lp(d))
    spec = synthesize(d, sol, q=3, rng_seed=0)
    pv = protocol_variables(spec)
    bf = BruteForceAnalyzer(spec)
    for s, t, u in _dedup_triples(closed, 4):
        a = [f"W{k}" for k in sorted(s)]
        b = [f"X{k}" for k in range(1, 5) if k != u]
        c = ["SUM", f"W{u}", f"Z{u}"] + [x for k in sorted(t) for x in (f"W{k}", f"Z{k}")]
        expect = conditional_mi([pv[x] for x in a], [pv[x] for x in b], [pv[x] for x in c])
        assert bf.mi(a, b, c) == expect


def test_brute_force_cap():
    spec = synthesize_classical(8, q=3, block_length=2)
    with pytest.raises(TooLarge):
        BruteForceAnalyzer(spec, cap=2**10)
