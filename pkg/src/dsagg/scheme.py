"""Key-scheme synthesis: per-user linear key maps over F_q.

Every construction shares one shape: a source key N of ``seed_length``
uniform symbols, and for each user a key map C_k (block_length x
seed_length) with Z_k = C_k . N.  The maps always sum to the zero
matrix, so the masks cancel in the aggregate and every user can decode
the input sum.  What differs per case is who gets a nonzero map and
which linear-independence structure the maps must satisfy:

* full coverage (a* = K): user k < K selects its own seed block, the
  last user balances with the negated sum -- no randomness needed;
* integral, sparse (a* < |total|): each protected user gets one random
  row over an a*-symbol seed, the largest id balancing, with every
  a*-subset of rows independent;
* integral, with balancer (a* = |total|, some user outside every
  maximal cover): as above, but covered users all draw randomly and
  the smallest user outside the maximal-cover union balances;
* fractional: the solved rate program's masses b_k = p_k / q_bar fix a
  block length of q_bar symbols; outside users get rank-p_k maps
  F_k . G_k, covered users full-rank maps, the smallest covered id
  balancing, and every within-budget block family must be independent.

Randomized constructions are verify-and-resample: draw coefficients,
check the required rank conditions explicitly, retry on failure.  A
returned spec therefore satisfies its postconditions no matter how
small the field is; the field-size bounds only make success likely.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from math import comb, lcm

import numpy as np

from .derived import CaseTag, DerivedSets
from .errors import (
    InternalInconsistency,
    MissingLpSolution,
    NonRationalSolution,
    OverrideNotPrime,
    ResampleExhausted,
    UnknownUser,
)
from .gf import FqMatrix, is_prime, smallest_prime_geq
from .lp import LpSolution, check_optimum_sum_identity

DEFAULT_MAX_ATTEMPTS = 64
DEFAULT_FRACTIONAL_FIELD = 2**31 - 1
FIELD_CAP = 2**61 - 1


@dataclass(frozen=True)
class FractionalData:
    """Integer decomposition of the rate program's optimal masses."""

    q_bar: int
    p: dict[int, int]
    p_bar: int


@dataclass(frozen=True)
class SchemeSpec:
    """A complete synthesized scheme.

    ``key_maps[k]`` is the block_length x seed_length map of user k;
    maps of unkeyed users are zero.  ``reported_rates`` is the
    (communication, source key) pair the scheme claims to achieve.
    """

    q: int
    block_length: int
    seed_length: int
    case_tag: CaseTag
    key_maps: dict[int, FqMatrix]
    reported_rates: tuple[Fraction, Fraction]
    fractional_data: FractionalData | None = None

    @property
    def num_users(self) -> int:
        return len(self.key_maps)

    def keyed_users(self) -> tuple[int, ...]:
        return tuple(k for k in sorted(self.key_maps) if not self.key_maps[k].is_zero())

    def zero_sum_holds(self) -> bool:
        total = FqMatrix.zeros(self.block_length, self.seed_length, self.q)
        for m in self.key_maps.values():
            total = total + m
        return total.is_zero()

    # Stable field order for golden tests: q, block_length, seed_length,
    # case, rates, key_maps (ascending user), fractional block.
    def to_json_dict(self) -> dict:
        out: dict = {
            "q": self.q,
            "block_length": self.block_length,
            "seed_length": self.seed_length,
            "case": self.case_tag.value,
            "rates": {
                "communication": str(self.reported_rates[0]),
                "source_key": str(self.reported_rates[1]),
            },
            "key_maps": [
                {"user": k, "rows": self.key_maps[k].to_lists()}
                for k in sorted(self.key_maps)
            ],
        }
        if self.fractional_data is not None:
            out["fractional"] = {
                "q_bar": self.fractional_data.q_bar,
                "p": [[k, v] for k, v in sorted(self.fractional_data.p.items())],
                "p_bar": self.fractional_data.p_bar,
            }
        return out

    def canonical_json(self) -> str:
        return json.dumps(self.to_json_dict(), separators=(",", ":"))

    @classmethod
    def from_json_dict(cls, data: dict) -> "SchemeSpec":
        frac = None
        if "fractional" in data:
            frac = FractionalData(
                q_bar=data["fractional"]["q_bar"],
                p={int(k): int(v) for k, v in data["fractional"]["p"]},
                p_bar=data["fractional"]["p_bar"],
            )
        return cls(
            q=data["q"],
            block_length=data["block_length"],
            seed_length=data["seed_length"],
            case_tag=CaseTag(data["case"]),
            key_maps={
                entry["user"]: FqMatrix(entry["rows"], data["q"])
                for entry in data["key_maps"]
            },
            reported_rates=(
                Fraction(data["rates"]["communication"]),
                Fraction(data["rates"]["source_key"]),
            ),
            fractional_data=frac,
        )


# ---------------------------------------------------------------------------
# Rates and field selection
# ---------------------------------------------------------------------------


def optimal_rates(
    derived: DerivedSets, lp_solution: LpSolution | None = None
) -> tuple[Fraction, Fraction]:
    """The (communication, source key) optimum for an instance.

    Communication is always 1 symbol per input symbol.  The key rate is
    K-1 under full coverage, a* in both integral cases, and a* plus the
    program optimum in the fractional case.
    """
    tag = derived.case_tag
    if tag is CaseTag.CLASSICAL_FULL:
        return Fraction(1), Fraction(derived.num_users - 1)
    if tag in (CaseTag.SUBCASE_ONE, CaseTag.SUBCASE_TWO):
        return Fraction(1), Fraction(derived.a_star)
    if lp_solution is None:
        raise MissingLpSolution("fractional instances need the solved rate program")
    return Fraction(1), Fraction(derived.a_star) + lp_solution.optimum


def choose_field(
    derived: DerivedSets,
    lp_solution: LpSolution | None = None,
    override: int | None = None,
    fractional_default: int = DEFAULT_FRACTIONAL_FIELD,
) -> int:
    """Pick the field modulus for synthesis.

    Overrides are honored after a primality check; synthesis verifies
    the independence structure explicitly, so a small override is fine
    whenever resampling succeeds.  Without an override the integral
    cases use the smallest prime exceeding the degree bound that makes
    random draws succeed with positive probability; for the fractional
    case that bound is astronomically conservative, so a fixed large
    prime is used instead and verification carries the guarantee.
    """
    if override is not None:
        if not is_prime(override):
            raise OverrideNotPrime(f"{override} is not prime")
        if override > FIELD_CAP:
            raise OverrideNotPrime(f"{override} exceeds the 2**61-1 field cap")
        return override
    tag = derived.case_tag
    a = derived.a_star
    size = len(derived.total_security_set)
    if tag is CaseTag.CLASSICAL_FULL:
        # Selector construction: any field works.
        return 2
    if tag is CaseTag.SUBCASE_ONE:
        return smallest_prime_geq(a * comb(size, a) + 1)
    if tag is CaseTag.SUBCASE_TWO:
        return smallest_prime_geq(a * comb(size + 1, a) + 1)
    return fractional_default


# ---------------------------------------------------------------------------
# Constructions
# ---------------------------------------------------------------------------


def synthesize_classical(
    num_users: int,
    q: int,
    block_length: int = 1,
    rng_seed: int = 0,
) -> SchemeSpec:
    """Full-coverage scheme: K-1 independent key blocks plus a balancer.

    User k < K selects seed block k; user K's map is the negated sum of
    all selectors.  Deterministic: rng_seed is accepted for API
    uniformity but no randomness is drawn.
    """
    del rng_seed
    k_count, ell = num_users, block_length
    seed_len = (k_count - 1) * ell
    maps: dict[int, FqMatrix] = {}
    for k in range(1, k_count):
        block = np.zeros((ell, seed_len), dtype=np.int64)
        block[:, (k - 1) * ell : k * ell] = np.eye(ell, dtype=np.int64)
        maps[k] = FqMatrix(block, q)
    balancer = np.zeros((ell, seed_len), dtype=np.int64)
    for k in range(1, k_count):
        balancer[:, (k - 1) * ell : k * ell] = -np.eye(ell, dtype=np.int64)
    maps[k_count] = FqMatrix(balancer, q)
    return SchemeSpec(
        q=q,
        block_length=ell,
        seed_length=seed_len,
        case_tag=CaseTag.CLASSICAL_FULL,
        key_maps=maps,
        reported_rates=(Fraction(1), Fraction(k_count - 1)),
    )


def _subset_rows_independent(rows: list[FqMatrix], size: int) -> bool:
    """Every size-subset of the given single-row maps is independent."""
    from itertools import combinations as _comb

    for chosen in _comb(rows, size):
        if FqMatrix.stack(list(chosen)).rank() != size:
            return False
    return True


def _one_row_scheme(
    derived: DerivedSets,
    keyed: list[int],
    n_random: int,
    q: int,
    rng_seed: int,
    max_attempts: int,
) -> dict[int, FqMatrix]:
    """Shared sampler for both integral constructions.

    Draws ``n_random`` random rows over an a*-symbol seed for the first
    keyed users, balances the last keyed user with the negated sum, and
    accepts when every a*-subset of the keyed rows is independent.
    """
    a = derived.a_star
    rng = np.random.Generator(np.random.PCG64(rng_seed))
    for _ in range(max_attempts):
        rows = [FqMatrix.random(1, a, q, rng) for _ in range(n_random)]
        balance = FqMatrix.zeros(1, a, q)
        for r in rows:
            balance = balance + r
        rows.append(-balance)
        if not _subset_rows_independent(rows, a):
            continue
        maps = {
            k: FqMatrix.zeros(1, a, q) for k in range(1, derived.num_users + 1)
        }
        for user, row in zip(keyed, rows):
            maps[user] = row
        return maps
    raise ResampleExhausted(
        f"no valid draw in {max_attempts} attempts over F_{q}; "
        "the field is likely too small for the required independence"
    )


def synthesize_subcase1(
    derived: DerivedSets,
    q: int,
    rng_seed: int = 0,
    max_attempts: int = DEFAULT_MAX_ATTEMPTS,
) -> SchemeSpec:
    """Integral scheme keying exactly the total security set.

    Seed has a* symbols; protected users get one random row each except
    the largest id, which balances.  Accepted only when every a*-subset
    of the rows is linearly independent.
    """
    if derived.case_tag is not CaseTag.SUBCASE_ONE:
        raise InternalInconsistency(f"wrong case {derived.case_tag} for this construction")
    keyed = sorted(derived.total_security_set)
    maps = _one_row_scheme(derived, keyed, len(keyed) - 1, q, rng_seed, max_attempts)
    return SchemeSpec(
        q=q,
        block_length=1,
        seed_length=derived.a_star,
        case_tag=CaseTag.SUBCASE_ONE,
        key_maps=maps,
        reported_rates=(Fraction(1), Fraction(derived.a_star)),
    )


def synthesize_subcase2(
    derived: DerivedSets,
    q: int,
    rng_seed: int = 0,
    max_attempts: int = DEFAULT_MAX_ATTEMPTS,
) -> SchemeSpec:
    """Integral scheme with one balancing user outside every maximal cover.

    All of the total security set draws random rows; the smallest user
    id outside the maximal-cover union carries the negated sum.  The
    independence requirement covers all keyed rows including the
    balancer.
    """
    if derived.case_tag is not CaseTag.SUBCASE_TWO:
        raise InternalInconsistency(f"wrong case {derived.case_tag} for this construction")
    users = set(range(1, derived.num_users + 1))
    outside = sorted(users - derived.q_set)
    if not outside:
        raise InternalInconsistency("no user outside the maximal-cover union")
    balancer = outside[0]
    keyed = sorted(derived.total_security_set) + [balancer]
    maps = _one_row_scheme(derived, keyed, len(keyed) - 1, q, rng_seed, max_attempts)
    return SchemeSpec(
        q=q,
        block_length=1,
        seed_length=derived.a_star,
        case_tag=CaseTag.SUBCASE_TWO,
        key_maps=maps,
        reported_rates=(Fraction(1), Fraction(derived.a_star)),
    )


def _fractional_blocks_ok(
    h_blocks: dict[int, FqMatrix],
    g_blocks: dict[int, FqMatrix],
    f_blocks: dict[int, FqMatrix],
    q_bar: int,
    budget: int,
) -> bool:
    """All within-budget block families must stack to full row rank.

    A family is a choice of covered users (contributing their whole
    q_bar-row maps) and outside users (contributing their p_k seed
    rows); the budget is (a* + b*) * q_bar rows.  Each F_k must also
    have full column rank so the composed map F_k . G_k keeps rank p_k.
    """
    from itertools import combinations as _comb

    for f in f_blocks.values():
        if f.cols and f.rank() != f.cols:
            return False
    h_users = sorted(h_blocks)
    g_users = sorted(g_blocks)
    for r_h in range(len(h_users) + 1):
        for chosen_h in _comb(h_users, r_h):
            rows_h = r_h * q_bar
            if rows_h > budget:
                continue
            for r_g in range(len(g_users) + 1):
                for chosen_g in _comb(g_users, r_g):
                    rows = rows_h + sum(g_blocks[k].rows for k in chosen_g)
                    if rows == 0 or rows > budget:
                        continue
                    stack = [h_blocks[k] for k in chosen_h] + [
                        g_blocks[k] for k in chosen_g
                    ]
                    if FqMatrix.stack(stack).rank() != rows:
                        return False
    return True


def synthesize_fractional(
    derived: DerivedSets,
    lp_solution: LpSolution,
    q: int,
    rng_seed: int = 0,
    max_attempts: int = DEFAULT_MAX_ATTEMPTS,
) -> SchemeSpec:
    """Key-splitting scheme driven by the solved rate program.

    q_bar is the least common denominator of the optimal masses, the
    block length; user k outside the total set holds p_k = b_k * q_bar
    seed symbols through a rank-p_k map F_k . G_k; covered users hold
    full blocks, the smallest covered id balancing the sum to zero.
    """
    if derived.case_tag is not CaseTag.FRACTIONAL:
        raise InternalInconsistency(f"wrong case {derived.case_tag} for this construction")
    if lp_solution is None:
        raise MissingLpSolution("fractional synthesis needs the solved rate program")
    for v in lp_solution.assignment.values():
        if not isinstance(v, Fraction):
            raise NonRationalSolution(f"non-rational mass {v!r}")
    if not check_optimum_sum_identity(lp_solution):
        raise InternalInconsistency(
            "rate-program solution violates the optimum/sum identity: "
            f"optimum={lp_solution.optimum}, masses={lp_solution.assignment}"
        )

    users = sorted(range(1, derived.num_users + 1))
    covered = sorted(derived.total_security_set)
    outside = [k for k in users if k not in derived.total_security_set]
    a = derived.a_star

    q_bar = lcm(*(v.denominator for v in lp_solution.assignment.values())) if outside else 1
    p = {k: int(lp_solution.assignment[k] * q_bar) for k in outside}
    p_bar = sum(p.values())
    for k, pk in p.items():
        if pk > q_bar:
            raise InternalInconsistency(
                f"mass b_{k} = {lp_solution.assignment[k]} exceeds 1 at an optimum"
            )
    seed_len = p_bar + (a - 1) * q_bar
    budget_frac = (Fraction(a) + lp_solution.optimum) * q_bar
    if budget_frac.denominator != 1:
        raise InternalInconsistency("row budget is not an integer")
    budget = int(budget_frac)

    balancer = covered[0]
    rng = np.random.Generator(np.random.PCG64(rng_seed))
    for _ in range(max_attempts):
        f_blocks = {k: FqMatrix.random(q_bar, p[k], q, rng) for k in outside}
        g_blocks = {k: FqMatrix.random(p[k], seed_len, q, rng) for k in outside}
        h_blocks = {
            k: FqMatrix.random(q_bar, seed_len, q, rng)
            for k in covered
            if k != balancer
        }
        total = FqMatrix.zeros(q_bar, seed_len, q)
        composed = {k: f_blocks[k] @ g_blocks[k] for k in outside}
        for mat in composed.values():
            total = total + mat
        for mat in h_blocks.values():
            total = total + mat
        h_blocks[balancer] = -total
        if not _fractional_blocks_ok(h_blocks, g_blocks, f_blocks, q_bar, budget):
            continue
        maps = {k: FqMatrix.zeros(q_bar, seed_len, q) for k in users}
        maps.update(composed)
        maps.update(h_blocks)
        rate = Fraction(seed_len, q_bar)
        expected = Fraction(a) + lp_solution.optimum
        if rate != expected:
            raise InternalInconsistency(
                f"seed accounting broke: {rate} != a* + optimum = {expected}"
            )
        return SchemeSpec(
            q=q,
            block_length=q_bar,
            seed_length=seed_len,
            case_tag=CaseTag.FRACTIONAL,
            key_maps=maps,
            reported_rates=(Fraction(1), rate),
            fractional_data=FractionalData(q_bar=q_bar, p=p, p_bar=p_bar),
        )
    raise ResampleExhausted(
        f"no valid draw in {max_attempts} attempts over F_{q}; "
        "the field is likely too small for the required independence"
    )


def synthesize(
    derived: DerivedSets,
    lp_solution: LpSolution | None = None,
    q: int | None = None,
    rng_seed: int = 0,
    max_attempts: int = DEFAULT_MAX_ATTEMPTS,
    block_length: int = 1,
) -> SchemeSpec:
    """Dispatch to the construction matching the instance's case."""
    if q is None:
        q = choose_field(derived, lp_solution)
    tag = derived.case_tag
    if tag is CaseTag.CLASSICAL_FULL:
        return synthesize_classical(derived.num_users, q, block_length, rng_seed)
    if tag is CaseTag.SUBCASE_ONE:
        return synthesize_subcase1(derived, q, rng_seed, max_attempts)
    if tag is CaseTag.SUBCASE_TWO:
        return synthesize_subcase2(derived, q, rng_seed, max_attempts)
    if lp_solution is None:
        raise MissingLpSolution("fractional instances need the solved rate program")
    return synthesize_fractional(derived, lp_solution, q, rng_seed, max_attempts)


# ---------------------------------------------------------------------------
# Fault injection (negative testing)
# ---------------------------------------------------------------------------


def break_zero_sum(spec: SchemeSpec) -> SchemeSpec:
    """Perturb the first keyed user's map so the key maps no longer cancel.

    Adds a ramp row (1, 2, 3, ...) that generically lies in no single
    user's key row space, so decoding breaks everywhere at once.
    """
    keyed = spec.keyed_users()
    target = keyed[0] if keyed else 1
    ramp = np.zeros((spec.block_length, spec.seed_length), dtype=np.int64)
    ramp[0, :] = np.arange(1, spec.seed_length + 1, dtype=np.int64)
    maps = dict(spec.key_maps)
    maps[target] = maps[target] + FqMatrix(ramp, spec.q)
    return SchemeSpec(
        q=spec.q,
        block_length=spec.block_length,
        seed_length=spec.seed_length,
        case_tag=spec.case_tag,
        key_maps=maps,
        reported_rates=spec.reported_rates,
        fractional_data=spec.fractional_data,
    )


def zero_user_key(spec: SchemeSpec, user: int) -> SchemeSpec:
    """Strip one user's key map entirely, leaving its input unmasked."""
    if user not in spec.key_maps:
        raise UnknownUser(f"user {user} not in 1..{spec.num_users}")
    maps = dict(spec.key_maps)
    maps[user] = FqMatrix.zeros(spec.block_length, spec.seed_length, spec.q)
    return SchemeSpec(
        q=spec.q,
        block_length=spec.block_length,
        seed_length=spec.seed_length,
        case_tag=spec.case_tag,
        key_maps=maps,
        reported_rates=spec.reported_rates,
        fractional_data=spec.fractional_data,
    )
