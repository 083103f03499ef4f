"""Derived combinatorial structure of an instance.

From the closed security/collusion systems this module computes, in
order:

* the *implicit* security set: users forced to hold a full-size key
  because some (security set, collusion set, observer) triple covers
  all users but them;
* the *total* security set (explicit union plus implicit members);
* for every triple the overlap of its union with the total security
  set, the maximum overlap cardinality ``a_star``, and all triples
  attaining it;
* the union ``q_set`` of the maximal triples' covers;
* the case tag that drives the rate formula and scheme construction.

Enumeration is exhaustive over the closures -- O(|S-closure| *
|T-closure| * K) -- which is the point: correctness over speed at desk
scale.  Triples are deduplicated by (cover, overlap) because every
downstream consumer (the rate program, the verifiers) depends only on
those two sets.  Results are merged in sorted order, so concurrent
enumeration would produce the same output.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from .errors import InternalInconsistency
from .instance import ClosedSystems


class CaseTag(str, Enum):
    """Which branch of the optimal-rate formula an instance falls into."""

    CLASSICAL_FULL = "ClassicalFull"  # a* = K: every user needs a full key
    SUBCASE_ONE = "SubcaseOne"        # a* < |total|: keys only inside the total set
    SUBCASE_TWO = "SubcaseTwo"        # a* = |total|, some user avoids all maximal covers
    FRACTIONAL = "Fractional"         # a* = |total| < K and every user is covered


@dataclass(frozen=True)
class Triple:
    """One (security set, collusion set, observer) choice.

    ``union_set`` is S ∪ T ∪ {u}; ``a_set`` is its intersection with
    the total security set.
    """

    security_index: int
    collusion_index: int
    user: int
    union_set: frozenset[int]
    a_set: frozenset[int]


@dataclass(frozen=True)
class DerivedSets:
    num_users: int
    implicit_set: frozenset[int]
    total_security_set: frozenset[int]
    a_star: int
    max_triples: tuple[Triple, ...]
    q_set: frozenset[int]
    case_tag: CaseTag


def compute_implicit_set(closed: ClosedSystems, num_users: int) -> frozenset[int]:
    """Users outside the explicit union that some triple isolates.

    A user u' joins the implicit set when S ∪ T ∪ {u} covers exactly
    K-1 users and u' is the one left out.  The subtraction removes
    users already protected explicitly; the definition is applied once,
    not iterated to a fixed point.
    """
    users = frozenset(range(1, num_users + 1))
    explicit = frozenset().union(frozenset(), *closed.security_closure)
    found: set[int] = set()
    for s in closed.security_closure:
        for t in closed.collusion_closure:
            base = s | t
            for u in users:
                cover = base | {u}
                if len(cover) == num_users - 1:
                    found.update(users - cover)
    return frozenset(found) - explicit


def compute_total_security_set(
    closed: ClosedSystems, implicit: frozenset[int]
) -> frozenset[int]:
    """Union of all explicit security sets with the implicit members."""
    return frozenset().union(implicit, *closed.security_closure)


def compute_a_star_and_triples(
    closed: ClosedSystems, total: frozenset[int], num_users: int
) -> tuple[int, tuple[Triple, ...]]:
    """Maximum overlap cardinality and every triple attaining it.

    Triples are deduplicated by (union_set, a_set); the representative
    kept is the first in (security index, collusion index, user) order.
    """
    best = -1
    reps: dict[tuple[frozenset[int], frozenset[int]], Triple] = {}
    for mi, s in enumerate(closed.security_closure):
        for ni, t in enumerate(closed.collusion_closure):
            base = s | t
            for u in range(1, num_users + 1):
                cover = base | {u}
                a = cover & total
                size = len(a)
                if size < best:
                    continue
                if size > best:
                    best = size
                    reps = {}
                key = (cover, a)
                if key not in reps:
                    reps[key] = Triple(mi, ni, u, cover, a)
    ordered = sorted(
        reps.values(),
        key=lambda tr: (sorted(tr.union_set), sorted(tr.a_set)),
    )
    return best, tuple(ordered)


def compute_q(max_triples: tuple[Triple, ...]) -> frozenset[int]:
    """Union of the covers of all maximal triples."""
    return frozenset().union(frozenset(), *(tr.union_set for tr in max_triples))


def classify(
    a_star: int,
    total: frozenset[int],
    q_set: frozenset[int],
    num_users: int,
) -> CaseTag:
    """Exactly one branch matches every valid instance."""
    if a_star == num_users:
        return CaseTag.CLASSICAL_FULL
    if a_star < len(total):
        return CaseTag.SUBCASE_ONE
    if a_star == len(total) and len(q_set) < num_users:
        return CaseTag.SUBCASE_TWO
    if a_star == len(total) and len(q_set) == num_users:
        return CaseTag.FRACTIONAL
    raise InternalInconsistency(
        f"no case matches a*={a_star}, |total|={len(total)}, |Q|={len(q_set)}, K={num_users}"
    )


def derive(closed: ClosedSystems, num_users: int) -> DerivedSets:
    """Run the whole derivation pipeline."""
    implicit = compute_implicit_set(closed, num_users)
    total = compute_total_security_set(closed, implicit)
    a_star, max_triples = compute_a_star_and_triples(closed, total, num_users)
    q_set = compute_q(max_triples)
    tag = classify(a_star, total, q_set, num_users)
    return DerivedSets(
        num_users=num_users,
        implicit_set=implicit,
        total_security_set=total,
        a_star=a_star,
        max_triples=max_triples,
        q_set=q_set,
        case_tag=tag,
    )
