"""Shared fixtures-in-code: instance builders and independent oracles.

The oracles here are deliberately written without importing the
package's linear algebra: expected ranks come from a scalar-loop
elimination, expected closures from raw powerset enumeration.  Frozen
test values are computed through these, never invented.
"""

from __future__ import annotations

import random
from itertools import chain, combinations

from dsagg import (
    CaseTag,
    ClosedSystems,
    DerivedSets,
    FqMatrix,
    FractionalData,
    ProblemInstance,
    RationalLp,
    SchemeSpec,
    build_lp,
    close_downward,
    derive,
    instance_from_dict,
)
from dsagg.errors import InputError
from fractions import Fraction


# ---------------------------------------------------------------------------
# Independent oracles
# ---------------------------------------------------------------------------


def rank_oracle(rows: list[list[int]], q: int) -> int:
    """Row rank over F_q by plain scalar elimination (no numpy, no gf)."""
    m = [list(r) for r in rows]
    rank = 0
    n_cols = len(m[0]) if m else 0
    for col in range(n_cols):
        piv = None
        for i in range(rank, len(m)):
            if m[i][col] % q:
                piv = i
                break
        if piv is None:
            continue
        m[rank], m[piv] = m[piv], m[rank]
        inv = pow(m[rank][col], -1, q)
        m[rank] = [(v * inv) % q for v in m[rank]]
        for i in range(len(m)):
            if i != rank and m[i][col] % q:
                f = m[i][col]
                m[i] = [(a - f * b) % q for a, b in zip(m[i], m[rank])]
        rank += 1
    return rank


def closure_oracle(generators) -> set[frozenset[int]]:
    """Downward closure by brute powerset enumeration."""
    out: set[frozenset[int]] = {frozenset()}
    for g in generators:
        items = sorted(g)
        for r in range(len(items) + 1):
            out.update(frozenset(c) for c in combinations(items, r))
    return out


def a_star_over_generators(instance: ProblemInstance, total: frozenset[int]) -> int:
    """Max overlap using only the generator sets (no closure members)."""
    best = 0
    s_fams = list(instance.security_generators) + [frozenset()]
    t_fams = list(instance.collusion_generators) + [frozenset()]
    for s in s_fams:
        for t in t_fams:
            for u in instance.user_range():
                best = max(best, len((s | t | {u}) & total))
    return best


# ---------------------------------------------------------------------------
# Instance builders
# ---------------------------------------------------------------------------


def classical_instance(k: int) -> ProblemInstance:
    """Full coverage: protecting users 1..K-1 forces user K implicitly."""
    return instance_from_dict({"K": k, "security": [list(range(1, k))], "collusion": []})


def k3_minimal_instance() -> ProblemInstance:
    """K=3, one protected user; both others join the implicit set."""
    return instance_from_dict({"K": 3, "security": [[1]], "collusion": []})


def single_protected_instance(k: int) -> ProblemInstance:
    """K users, only user 1 protected: fractional with masses 1/(K-2)."""
    return instance_from_dict({"K": k, "security": [[1]], "collusion": []})


def subcase2_k5_instance() -> ProblemInstance:
    """K=5 with a collusion singleton: one user outside every maximal cover."""
    return instance_from_dict({"K": 5, "security": [[1], [2]], "collusion": [[3]]})


def subcase2_k4_instance() -> ProblemInstance:
    return instance_from_dict({"K": 4, "security": [[1], [2]], "collusion": []})


def four_singletons_k6_instance() -> ProblemInstance:
    """|total| = 4 with a* = 2: unsatisfiable independence over F_2."""
    return instance_from_dict(
        {"K": 6, "security": [[1], [2], [3], [4]], "collusion": []}
    )


def analysis(instance: ProblemInstance):
    """(closed, derived) bundle used all over the tests."""
    closed = close_downward(instance)
    return closed, derive(closed, instance.num_users)


# ---------------------------------------------------------------------------
# Hand-constructed K=6 fractional scheme over F_5
# ---------------------------------------------------------------------------


def reference_k6_scheme() -> SchemeSpec:
    """A known-valid scheme for the bundled K=6 fractional instance.

    Hand-constructed key maps over F_5 with block length 2 and a
    6-symbol source key; used to pin verifier behavior independently of
    the synthesizer.
    """
    q = 5
    maps = {
        1: FqMatrix([[-1, 0, -1, -1, -1, -1], [0, -1, -1, -2, -3, -4]], q),
        2: FqMatrix([[1, 0, 0, 0, 0, 0], [0, 1, 0, 0, 0, 0]], q),
        3: FqMatrix([[0, 0, 1, 0, 0, 0], [0, 0, 1, 0, 0, 0]], q),
        4: FqMatrix([[0, 0, 0, 1, 0, 0], [0, 0, 0, 2, 0, 0]], q),
        5: FqMatrix([[0, 0, 0, 0, 1, 0], [0, 0, 0, 0, 3, 0]], q),
        6: FqMatrix([[0, 0, 0, 0, 0, 1], [0, 0, 0, 0, 0, 4]], q),
    }
    return SchemeSpec(
        q=q,
        block_length=2,
        seed_length=6,
        case_tag=CaseTag.FRACTIONAL,
        key_maps=maps,
        reported_rates=(Fraction(1), Fraction(3)),
        fractional_data=FractionalData(q_bar=2, p={3: 1, 4: 1, 5: 1, 6: 1}, p_bar=4),
    )


# ---------------------------------------------------------------------------
# Randomized instances
# ---------------------------------------------------------------------------


def random_instance(rng: random.Random, k_lo: int = 3, k_hi: int = 7) -> ProblemInstance:
    """Any-case random instance (rejection keeps only valid ones)."""
    while True:
        k = rng.randint(k_lo, k_hi)
        users = list(range(1, k + 1))
        s_gens = [
            rng.sample(users, rng.randint(1, min(2, k)))
            for _ in range(rng.randint(1, 3))
        ]
        t_gens = [
            rng.sample(users, rng.randint(1, min(2, k - 2)))
            for _ in range(rng.randint(0, 4))
        ]
        try:
            return instance_from_dict({"K": k, "security": s_gens, "collusion": t_gens})
        except InputError:
            continue


def random_fractional(
    seed: int,
    k_lo: int = 4,
    k_hi: int = 7,
    max_vars: int = 6,
    max_triples: int = 12,
) -> tuple[ProblemInstance, ClosedSystems, DerivedSets, RationalLp]:
    """Random instance rejected until it lands in the fractional case.

    Biased toward one or two singleton security sets with a sprinkle of
    collusion singletons and pairs, which fills the maximal-cover union
    quickly; caps keep the resulting programs small enough for the
    enumeration oracle.
    """
    rng = random.Random(seed)
    while True:
        k = rng.randint(k_lo, k_hi)
        users = list(range(1, k + 1))
        n_sec = rng.choice([1, 1, 2])
        s_gens = [[u] for u in users[:n_sec]]
        t_gens = [[u] for u in users if rng.random() < 0.55]
        for _ in range(rng.randint(0, 2)):
            pair = rng.sample(users, 2)
            if len(pair) <= k - 2:
                t_gens.append(pair)
        try:
            inst = instance_from_dict({"K": k, "security": s_gens, "collusion": t_gens})
        except InputError:
            continue
        closed = close_downward(inst)
        d = derive(closed, k)
        if d.case_tag is not CaseTag.FRACTIONAL:
            continue
        lp = build_lp(d)
        if len(lp.variables) > max_vars or len(lp.upper_constraints) > max_triples:
            continue
        return inst, closed, d, lp
