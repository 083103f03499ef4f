"""Scheme synthesis: constructions, rank postconditions, determinism."""

from __future__ import annotations

from fractions import Fraction
from itertools import combinations

import pytest

from dsagg import (
    CaseTag,
    FqMatrix,
    build_lp,
    choose_field,
    optimal_rates,
    solve_exact,
    synthesize,
    synthesize_classical,
    synthesize_fractional,
    synthesize_subcase1,
    synthesize_subcase2,
)
from dsagg.errors import MissingLpSolution, OverrideNotPrime, ResampleExhausted

from helpers import (
    analysis,
    classical_instance,
    four_singletons_k6_instance,
    k3_minimal_instance,
    single_protected_instance,
    subcase2_k5_instance,
)


# ---------------------------------------------------------------------------
# Rates
# ---------------------------------------------------------------------------


def test_rates_k5(k5_analysis):
    _, d = k5_analysis
    assert optimal_rates(d) == (1, 3)


def test_rates_k6(k6_analysis):
    _, d = k6_analysis
    sol = solve_exact(build_lp(d))
    assert optimal_rates(d, sol) == (1, 3)


def test_rates_classical_k4():
    _, d = analysis(classical_instance(4))
    assert optimal_rates(d) == (1, 3)


def test_rates_fractional_requires_solution(k6_analysis):
    _, d = k6_analysis
    with pytest.raises(MissingLpSolution):
        optimal_rates(d)


# ---------------------------------------------------------------------------
# Field choice
# ---------------------------------------------------------------------------


def test_choose_field_k5_bound(k5_analysis):
    # a* * C(|total|, a*) = 12, so the next prime is 13
    _, d = k5_analysis
    assert choose_field(d) == 13


def test_choose_field_override(k6_analysis):
    _, d = k6_analysis
    assert choose_field(d, override=5) == 5
    with pytest.raises(OverrideNotPrime):
        choose_field(d, override=6)


def test_choose_field_subcase2_bound():
    _, d = analysis(subcase2_k5_instance())
    # a*(a*+1) = 6, next prime is 7
    assert choose_field(d) == 7


# ---------------------------------------------------------------------------
# Full coverage
# ---------------------------------------------------------------------------


def test_classical_k3_exact_maps():
    spec = synthesize_classical(3, q=2, block_length=1)
    assert spec.key_maps[1].to_lists() == [[1, 0]]
    assert spec.key_maps[2].to_lists() == [[0, 1]]
    assert spec.key_maps[3].to_lists() == [[1, 1]]  # -1 = 1 over F_2
    assert spec.zero_sum_holds()


def test_classical_zero_sum_any_k():
    for k in range(3, 9):
        assert synthesize_classical(k, q=3).zero_sum_holds()


def test_classical_k4_any_three_maps_full_rank():
    spec = synthesize_classical(4, q=3)
    for chosen in combinations(range(1, 5), 3):
        stacked = FqMatrix.stack([spec.key_maps[k] for k in chosen])
        assert stacked.rank() == 3


# ---------------------------------------------------------------------------
# Integral constructions
# ---------------------------------------------------------------------------


def test_subcase1_k5(k5_analysis):
    _, d = k5_analysis
    spec = synthesize_subcase1(d, q=13, rng_seed=0)
    assert spec.block_length == 1 and spec.seed_length == 3
    keyed = spec.keyed_users()
    assert set(keyed) == {1, 2, 3, 4}
    assert spec.zero_sum_holds()
    for chosen in combinations(keyed, 3):
        assert FqMatrix.stack([spec.key_maps[k] for k in chosen]).rank() == 3
    # unkeyed user has the zero map
    assert spec.key_maps[5].is_zero()


def test_subcase1_minimal_total_set():
    # |total| = a* + 1: every a*-subset of the rows is an invertible square
    _, d = analysis(k3_minimal_instance())
    spec = synthesize_subcase1(d, q=choose_field(d), rng_seed=1)
    rows = [spec.key_maps[k] for k in spec.keyed_users()]
    assert len(rows) == 3
    for chosen in combinations(rows, 2):
        assert FqMatrix.stack(list(chosen)).rank() == 2


def test_subcase1_impossible_at_q2_exhausts():
    # four single-row maps over a 2-symbol seed with every pair
    # independent cannot exist over F_2 (only three nonzero directions)
    _, d = analysis(four_singletons_k6_instance())
    with pytest.raises(ResampleExhausted):
        synthesize_subcase1(d, q=2, rng_seed=0, max_attempts=20)
    # while a large enough field succeeds
    assert synthesize_subcase1(d, q=choose_field(d), rng_seed=0).zero_sum_holds()


def test_subcase2_k5():
    closed, d = analysis(subcase2_k5_instance())
    spec = synthesize_subcase2(d, q=7, rng_seed=0)
    # keyed set is the total set plus the smallest user outside the
    # maximal-cover union
    assert set(spec.keyed_users()) == {1, 2, 4}
    assert min(set(range(1, 6)) - d.q_set) == 4
    assert spec.zero_sum_holds()
    rows = [spec.key_maps[k] for k in spec.keyed_users()]
    for chosen in combinations(rows, 2):
        assert FqMatrix.stack(list(chosen)).rank() == 2


# ---------------------------------------------------------------------------
# Fractional construction
# ---------------------------------------------------------------------------


def test_fractional_k6(k6_analysis):
    _, d = k6_analysis
    sol = solve_exact(build_lp(d))
    spec = synthesize_fractional(d, sol, q=5, rng_seed=0)
    fd = spec.fractional_data
    assert fd.q_bar == 2
    assert fd.p == {3: 1, 4: 1, 5: 1, 6: 1}
    assert fd.p_bar == 4
    assert spec.block_length == 2
    assert spec.seed_length == 6
    assert spec.zero_sum_holds()
    assert spec.reported_rates == (1, 3)
    # the claimed source-key rate re-derives from the program optimum
    assert Fraction(spec.seed_length, spec.block_length) == d.a_star + sol.optimum


def test_fractional_rank_postconditions(k6_analysis):
    _, d = k6_analysis
    sol = solve_exact(build_lp(d))
    spec = synthesize_fractional(d, sol, q=5, rng_seed=0)
    for k in d.total_security_set:
        assert spec.key_maps[k].rank() == spec.fractional_data.q_bar
    for k, pk in spec.fractional_data.p.items():
        assert spec.key_maps[k].rank() == pk


def test_fractional_k5_single_protected():
    closed, d = analysis(single_protected_instance(5))
    sol = solve_exact(build_lp(d))
    assert sol.optimum == Fraction(1, 3)
    spec = synthesize_fractional(d, sol, q=2, rng_seed=0)
    assert spec.fractional_data.q_bar == 3
    assert spec.seed_length == 4
    assert spec.reported_rates[1] == Fraction(4, 3)
    assert spec.zero_sum_holds()


def test_synthesize_dispatcher_and_determinism(k6_analysis):
    _, d = k6_analysis
    sol = solve_exact(build_lp(d))
    a = synthesize(d, sol, q=5, rng_seed=42)
    b = synthesize(d, sol, q=5, rng_seed=42)
    assert a.canonical_json() == b.canonical_json()
    c = synthesize(d, sol, q=5, rng_seed=43)
    assert a.canonical_json() != c.canonical_json()


def test_scheme_json_round_trip(k5_analysis):
    _, d = k5_analysis
    spec = synthesize(d, q=13, rng_seed=0)
    import json

    again = type(spec).from_json_dict(json.loads(json.dumps(spec.to_json_dict())))
    assert again.canonical_json() == spec.canonical_json()
    assert again.key_maps[1] == spec.key_maps[1]
