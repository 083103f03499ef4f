"""Problem instances: users, security sets, collusion sets.

An instance describes K >= 3 fully connected users, a family of
*security generators* (user subsets whose inputs must stay hidden
beyond the aggregate) and a family of *collusion generators* (user
subsets that may pool their views).  Both families are interpreted as
generators of monotone systems: analysis always runs over the full
downward closures, which :func:`close_downward` materializes
explicitly.  The empty set belongs to both closures by convention.

JSON schema (1-based user ids, empty set implicit)::

    {
      "K": 5,
      "security": [[1], [2]],
      "collusion": [[1], [2], [3], [4], [5], [2, 5]]
    }
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from itertools import chain, combinations
from pathlib import Path

from .errors import (
    ClosureTooLarge,
    CollusionTooLarge,
    InputError,
    InvalidSet,
    InvalidUserCount,
    NothingToProtect,
)

DEFAULT_CLOSURE_CAP = 2**16


@dataclass(frozen=True)
class ProblemInstance:
    """Raw instance: K plus the two generator families."""

    num_users: int
    security_generators: tuple[frozenset[int], ...]
    collusion_generators: tuple[frozenset[int], ...]

    def user_range(self) -> range:
        return range(1, self.num_users + 1)

    def to_dict(self) -> dict:
        return {
            "K": self.num_users,
            "security": [sorted(s) for s in self.security_generators],
            "collusion": [sorted(t) for t in self.collusion_generators],
        }


@dataclass(frozen=True)
class ClosedSystems:
    """Downward closures of both generator families, deduplicated and sorted."""

    security_closure: tuple[frozenset[int], ...]
    collusion_closure: tuple[frozenset[int], ...]


def _as_sets(raw, what: str) -> tuple[frozenset[int], ...]:
    if not isinstance(raw, (list, tuple)):
        raise InvalidSet(f"{what} must be a list of user-id lists")
    out = []
    for entry in raw:
        if not isinstance(entry, (list, tuple, set, frozenset)):
            raise InvalidSet(f"{what} entry {entry!r} is not a list of user ids")
        members = []
        for v in entry:
            if isinstance(v, bool) or not isinstance(v, int):
                raise InvalidSet(f"{what} entry {entry!r} contains a non-integer id")
            members.append(v)
        out.append(frozenset(members))
    return tuple(out)


def instance_from_dict(data: dict) -> ProblemInstance:
    """Build and validate an instance from parsed JSON."""
    if not isinstance(data, dict):
        raise InvalidSet("instance document must be a JSON object")
    if "K" not in data:
        raise InvalidSet("instance document lacks the user count K")
    k = data["K"]
    if isinstance(k, bool) or not isinstance(k, int):
        raise InvalidSet("K must be an integer")
    inst = ProblemInstance(
        num_users=k,
        security_generators=_as_sets(data.get("security", []), "security"),
        collusion_generators=_as_sets(data.get("collusion", []), "collusion"),
    )
    return validate(inst)


def load_instance(path: str | Path) -> ProblemInstance:
    """Read, parse and validate an instance file."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InputError(f"cannot read instance file {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InvalidSet(f"instance file {path} is not valid JSON: {exc}") from exc
    return instance_from_dict(data)


def validate(raw: ProblemInstance) -> ProblemInstance:
    """Return the instance unchanged iff every model invariant holds.

    Rejections are loud on purpose: silently clipping an oversized
    collusion set would hide a modeling error from the user.
    """
    k = raw.num_users
    if k < 3:
        raise InvalidUserCount(f"need at least 3 users, got K={k}")
    users = set(raw.user_range())
    for label, family in (
        ("security", raw.security_generators),
        ("collusion", raw.collusion_generators),
    ):
        for s in family:
            if not s <= users:
                raise InvalidSet(
                    f"{label} set {sorted(s)} contains ids outside 1..{k}"
                )
    if not frozenset().union(frozenset(), *raw.security_generators):
        raise NothingToProtect("the union of all security sets is empty")
    for t in raw.collusion_generators:
        if len(t) > k - 2:
            raise CollusionTooLarge(
                f"collusion set {sorted(t)} has {len(t)} members, at most K-2={k - 2} allowed"
            )
    return raw


def _powerset(s: frozenset[int]):
    items = sorted(s)
    return chain.from_iterable(combinations(items, r) for r in range(len(items) + 1))


def close_downward(
    instance: ProblemInstance, cap: int = DEFAULT_CLOSURE_CAP
) -> ClosedSystems:
    """Materialize both downward closures.

    Each closure is the union of the power sets of its generators,
    deduplicated, with the empty set always present.  Closing a closure
    is a no-op (idempotence), and every member is a subset of some
    generator.
    """
    closures: list[tuple[frozenset[int], ...]] = []
    total = 0
    for family in (instance.security_generators, instance.collusion_generators):
        members: set[frozenset[int]] = {frozenset()}
        for g in family:
            members.update(frozenset(sub) for sub in _powerset(g))
            if len(members) + total > cap:
                raise ClosureTooLarge(
                    f"closures exceed the cap of {cap} sets; "
                    "raise the cap or shrink the generators"
                )
        total += len(members)
        closures.append(tuple(sorted(members, key=lambda s: (len(s), sorted(s)))))
    return ClosedSystems(security_closure=closures[0], collusion_closure=closures[1])
