"""Exact entropy and mutual-information verification via matrix rank.

Every protocol variable -- an input W_k, a key Z_k, a message X_k, the
aggregate SUM -- is a linear image of one joint uniform seed: the K*L
input symbols followed by the seed_length source-key symbols.  For
linear images of a uniform seed, entropy in q-ary symbols equals the
rank of the coefficient matrix, so every entropy, conditional entropy,
and conditional mutual information in the model is an exact integer
computed by Gaussian elimination:

    H(V)        = rank(V)
    H(A | C)    = rank(A, C) - rank(C)
    I(A; B | C) = rank(A,C) + rank(B,C) - rank(A,B,C) - rank(C)

``verify_security`` runs the leakage check over every deduplicated
(security set, collusion set, observer) triple of the closed systems;
``verify_correctness`` checks that each user's view determines the
aggregate; ``verify_key_independence`` and ``verify_entropy_bounds``
assert the structural entropy (in)equalities that any valid scheme
must exhibit -- a violation there means a synthesizer or verifier bug,
not bad input.

``brute_force_mi`` is the independent oracle: it enumerates every seed
realization, tallies exact joint distributions, checks they are
uniform over their supports with power-of-q support sizes, and reads
the same quantities off the counts without ever touching rank.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .derived import CaseTag, DerivedSets
from .errors import DimensionMismatch, TooLarge
from .gf import FqMatrix
from .instance import ClosedSystems
from .scheme import SchemeSpec

DEFAULT_BRUTE_FORCE_CAP = 2**22


@dataclass(frozen=True)
class LinearVariable:
    """A named bundle of F_q-linear functionals of the joint seed."""

    label: str
    coeffs: FqMatrix


def protocol_variables(spec: SchemeSpec) -> dict[str, LinearVariable]:
    """All protocol variables of a scheme over its joint seed space.

    Column layout: W_{1,1..L}, ..., W_{K,1..L}, then the source-key
    symbols.  Emits W1..WK, Z1..ZK, X1..XK and SUM.
    """
    k_count = spec.num_users
    ell = spec.block_length
    n_cols = k_count * ell + spec.seed_length
    out: dict[str, LinearVariable] = {}
    sum_rows = np.zeros((ell, n_cols), dtype=np.int64)
    for k in range(1, k_count + 1):
        w = np.zeros((ell, n_cols), dtype=np.int64)
        w[:, (k - 1) * ell : k * ell] = np.eye(ell, dtype=np.int64)
        sum_rows[:, (k - 1) * ell : k * ell] = np.eye(ell, dtype=np.int64)
        z = np.zeros((ell, n_cols), dtype=object if spec.q > 2**31 - 1 else np.int64)
        z[:, k_count * ell :] = spec.key_maps[k].array()
        w_var = LinearVariable(f"W{k}", FqMatrix(w, spec.q))
        z_var = LinearVariable(f"Z{k}", FqMatrix(z, spec.q))
        out[w_var.label] = w_var
        out[z_var.label] = z_var
        out[f"X{k}"] = LinearVariable(f"X{k}", w_var.coeffs + z_var.coeffs)
    out["SUM"] = LinearVariable("SUM", FqMatrix(sum_rows, spec.q))
    return out


def _check_shared_space(variables: Iterable[LinearVariable]) -> None:
    dims = {(v.coeffs.q, v.coeffs.cols) for v in variables}
    if len(dims) > 1:
        raise DimensionMismatch(f"variables live in different seed spaces: {dims}")


def entropy(variables: Sequence[LinearVariable]) -> Fraction:
    """Joint entropy in q-ary symbols: rank of the stacked coefficients."""
    variables = list(variables)
    if not variables:
        return Fraction(0)
    _check_shared_space(variables)
    return Fraction(FqMatrix.stack([v.coeffs for v in variables]).rank())


def conditional_mi(
    a: Sequence[LinearVariable],
    b: Sequence[LinearVariable],
    c: Sequence[LinearVariable],
) -> Fraction:
    """I(A; B | C) in q-ary symbols, exact and non-negative."""
    a, b, c = list(a), list(b), list(c)
    _check_shared_space(a + b + c)
    return (
        entropy(a + c) + entropy(b + c) - entropy(a + b + c) - entropy(c)
    )


class _RankCache:
    """Memoizes stacked-matrix ranks by the frozenset of variable labels.

    Verification sweeps ask for heavily overlapping label sets; a rank
    per distinct set keeps the sweep near-linear in distinct queries.
    """

    def __init__(self, variables: dict[str, LinearVariable]):
        self._vars = variables
        self._cache: dict[frozenset[str], int] = {frozenset(): 0}

    def rank(self, labels: Iterable[str]) -> int:
        key = frozenset(labels)
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        mats = [self._vars[name].coeffs for name in sorted(key)]
        val = FqMatrix.stack(mats).rank()
        self._cache[key] = val
        return val

    def cond_entropy(self, targets: Iterable[str], given: Iterable[str]) -> int:
        given = frozenset(given)
        return self.rank(frozenset(targets) | given) - self.rank(given)

    def cond_mi(
        self, a: Iterable[str], b: Iterable[str], c: Iterable[str]
    ) -> int:
        a, b, c = frozenset(a), frozenset(b), frozenset(c)
        return self.rank(a | c) + self.rank(b | c) - self.rank(a | b | c) - self.rank(c)


# ---------------------------------------------------------------------------
# Scheme verification
# ---------------------------------------------------------------------------


def verify_correctness(spec: SchemeSpec) -> dict[int, bool]:
    """Can every user reconstruct the aggregate from its own view?

    User u's view is all other messages plus its own input and key; the
    aggregate is determined by the view exactly when appending SUM to
    the view's coefficient stack does not raise the rank.
    """
    variables = protocol_variables(spec)
    cache = _RankCache(variables)
    out: dict[int, bool] = {}
    for u in range(1, spec.num_users + 1):
        view = [f"X{k}" for k in range(1, spec.num_users + 1) if k != u]
        view += [f"W{u}", f"Z{u}"]
        out[u] = cache.cond_entropy(["SUM"], view) == 0
    return out


@dataclass(frozen=True)
class SecurityCheck:
    security_set: frozenset[int]
    collusion_set: frozenset[int]
    user: int
    mi_value: Fraction
    passed: bool


@dataclass(frozen=True)
class MiReport:
    checks: tuple[SecurityCheck, ...]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self) -> tuple[SecurityCheck, ...]:
        return tuple(c for c in self.checks if not c.passed)

    def to_json_dict(self) -> dict:
        return {
            "passed": self.passed,
            "checks": [
                {
                    "security_set": sorted(c.security_set),
                    "collusion_set": sorted(c.collusion_set),
                    "user": c.user,
                    "mi_symbols": str(c.mi_value),
                    "passed": c.passed,
                }
                for c in self.checks
            ],
        }


def _dedup_triples(closed: ClosedSystems, num_users: int):
    """Deduplicated (S, T, u) sweep order for leakage-style checks.

    The leakage MI depends only on S and T ∪ {u} (the observer's own
    message is a function of the conditioning), so triples sharing that
    pair collapse to one representative, kept in deterministic order.
    """
    seen: set[tuple[frozenset[int], frozenset[int]]] = set()
    for s in closed.security_closure:
        for t in closed.collusion_closure:
            for u in range(1, num_users + 1):
                key = (s, t | {u})
                if key in seen:
                    continue
                seen.add(key)
                yield s, t, u


def verify_security(spec: SchemeSpec, closed: ClosedSystems) -> MiReport:
    """Zero leakage beyond the aggregate for every closure triple.

    For each (S, T, u):  I(inputs of S ; all messages except user u's
    | aggregate, u's input and key, T's inputs and keys) must vanish.
    """
    variables = protocol_variables(spec)
    cache = _RankCache(variables)
    k_count = spec.num_users
    checks: list[SecurityCheck] = []
    for s, t, u in _dedup_triples(closed, k_count):
        a = [f"W{k}" for k in sorted(s)]
        b = [f"X{k}" for k in range(1, k_count + 1) if k != u]
        cond = ["SUM", f"W{u}", f"Z{u}"]
        for k in sorted(t):
            cond += [f"W{k}", f"Z{k}"]
        mi = Fraction(cache.cond_mi(a, b, cond))
        checks.append(SecurityCheck(s, t, u, mi, mi == 0))
    checks.sort(key=lambda c: (sorted(c.security_set), sorted(c.collusion_set), c.user))
    return MiReport(tuple(checks))


def verify_key_independence(spec: SchemeSpec, closed: ClosedSystems) -> bool:
    """Keys of protected users stay fully fresh given any colluding view.

    For every closure triple, H(keys of S \\ (T ∪ {u}) | keys of
    T ∪ {u}) must equal |S \\ (T ∪ {u})| * L exactly.  This is a
    structural property of the three seed-sharing constructions; the
    full-coverage selector scheme deliberately correlates its balancing
    key, so the check is vacuous there.
    """
    if spec.case_tag is CaseTag.CLASSICAL_FULL:
        return True
    variables = protocol_variables(spec)
    cache = _RankCache(variables)
    ell = spec.block_length
    for s, t, u in _dedup_triples(closed, spec.num_users):
        known = t | {u}
        fresh = s - known
        lhs = cache.cond_entropy(
            [f"Z{k}" for k in sorted(fresh)], [f"Z{k}" for k in sorted(known)]
        )
        if lhs != len(fresh) * ell:
            return False
    return True


@dataclass(frozen=True)
class BoundCheck:
    name: str
    security_set: frozenset[int]
    collusion_set: frozenset[int]
    user: int
    lhs: Fraction
    rhs: Fraction
    equality: bool
    passed: bool


@dataclass(frozen=True)
class BoundReport:
    checks: tuple[BoundCheck, ...]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self) -> tuple[BoundCheck, ...]:
        return tuple(c for c in self.checks if not c.passed)

    def named(self, name: str) -> tuple[BoundCheck, ...]:
        return tuple(c for c in self.checks if c.name == name)

    def to_json_dict(self) -> dict:
        return {
            "passed": self.passed,
            "checks": [
                {
                    "name": c.name,
                    "security_set": sorted(c.security_set),
                    "collusion_set": sorted(c.collusion_set),
                    "user": c.user,
                    "lhs_symbols": str(c.lhs),
                    "rhs_symbols": str(c.rhs),
                    "equality": c.equality,
                    "passed": c.passed,
                }
                for c in self.checks
            ],
        }


def verify_entropy_bounds(
    spec: SchemeSpec, closed: ClosedSystems, derived: DerivedSets
) -> BoundReport:
    """Structural entropy lower bounds every valid scheme satisfies.

    * ``message_content``: each message carries a full input's worth of
      fresh symbols even given everyone else's inputs and keys.
    * ``outside_key_mass``: for a nonempty security set disjoint from
      the colluding view with a cover missing at least one user, the
      keys outside the cover retain at least L fresh symbols.
    * ``implicit_member_key``: the single user left out of a (K-1)-cover
      holds at least L fresh key symbols.
    * ``explicit_group_keys``: inside any cover, the explicitly
      protected members' keys are jointly fresh (L symbols each).
    * ``protected_group_keys``: inside any cover, the overlap with the
      total security set holds jointly fresh keys; at maximal overlap
      the bound is met with equality by the integral constructions.

    Failures indicate a bug in synthesis or verification, never bad
    input, so the report is meant for test suites and the pipeline.
    """
    variables = protocol_variables(spec)
    cache = _RankCache(variables)
    k_count = spec.num_users
    ell = spec.block_length
    total = derived.total_security_set
    explicit = frozenset().union(frozenset(), *closed.security_closure)
    users = frozenset(range(1, k_count + 1))
    checks: list[BoundCheck] = []

    def z_labels(group: Iterable[int]) -> list[str]:
        return [f"Z{k}" for k in sorted(group)]

    def other_wz(u: int) -> list[str]:
        labels: list[str] = []
        for k in range(1, k_count + 1):
            if k != u:
                labels += [f"W{k}", f"Z{k}"]
        return labels

    for u in range(1, k_count + 1):
        lhs = Fraction(cache.cond_entropy([f"X{u}"], other_wz(u)))
        checks.append(
            BoundCheck(
                "message_content",
                frozenset(),
                frozenset(),
                u,
                lhs,
                Fraction(ell),
                lhs == ell,
                lhs >= ell,
            )
        )

    seen: dict[str, set] = {"outside": set(), "implicit": set(), "explicit": set(), "group": set()}
    for s in closed.security_closure:
        for t in closed.collusion_closure:
            for u in range(1, k_count + 1):
                known = t | {u}
                cover = s | known
                disjoint = not (s & known)
                within = len(cover) <= k_count - 1

                if s and disjoint and within:
                    leftover = users - cover
                    key = (frozenset(leftover), frozenset(known))
                    if key not in seen["outside"]:
                        seen["outside"].add(key)
                        lhs = Fraction(
                            cache.cond_entropy(z_labels(leftover), z_labels(known))
                        )
                        checks.append(
                            BoundCheck(
                                "outside_key_mass", s, t, u, lhs, Fraction(ell),
                                lhs == ell, lhs >= ell,
                            )
                        )
                    if len(cover) == k_count - 1:
                        (lone,) = leftover
                        key = (lone, frozenset(known))
                        if key not in seen["implicit"]:
                            seen["implicit"].add(key)
                            lhs = Fraction(
                                cache.cond_entropy([f"Z{lone}"], z_labels(known))
                            )
                            checks.append(
                                BoundCheck(
                                    "implicit_member_key", s, t, u, lhs, Fraction(ell),
                                    lhs == ell, lhs >= ell,
                                )
                            )

                if disjoint and within:
                    exp_part = cover & explicit
                    exp_known = known - explicit
                    key = (frozenset(exp_part), frozenset(exp_known))
                    if key not in seen["explicit"]:
                        seen["explicit"].add(key)
                        lhs = Fraction(
                            cache.cond_entropy(z_labels(exp_part), z_labels(exp_known))
                        )
                        rhs = Fraction(len(exp_part) * ell)
                        checks.append(
                            BoundCheck(
                                "explicit_group_keys", s, t, u, lhs, rhs,
                                lhs == rhs, lhs >= rhs,
                            )
                        )

                    overlap = cover & total
                    out_known = known - total
                    key = (frozenset(overlap), frozenset(out_known))
                    if key not in seen["group"]:
                        seen["group"].add(key)
                        lhs = Fraction(
                            cache.cond_entropy(z_labels(overlap), z_labels(out_known))
                        )
                        rhs = Fraction(len(overlap) * ell)
                        checks.append(
                            BoundCheck(
                                "protected_group_keys", s, t, u, lhs, rhs,
                                lhs == rhs, lhs >= rhs,
                            )
                        )

    checks.sort(
        key=lambda c: (c.name, sorted(c.security_set), sorted(c.collusion_set), c.user)
    )
    return BoundReport(tuple(checks))


# ---------------------------------------------------------------------------
# Brute-force oracle
# ---------------------------------------------------------------------------


class BruteForceAnalyzer:
    """Exhaustive-enumeration twin of the rank calculus.

    Materializes every joint-seed realization, evaluates each variable
    bundle pointwise, and derives entropies purely from outcome counts.
    Distributions of linear images of a uniform seed are uniform over
    supports of power-of-q size; both facts are asserted on the actual
    counts rather than assumed, so agreement with the rank formulas is
    a genuine two-route check.
    """

    _CHUNK = 1 << 17

    def __init__(self, spec: SchemeSpec, cap: int = DEFAULT_BRUTE_FORCE_CAP):
        self.spec = spec
        self.q = spec.q
        self.variables = protocol_variables(spec)
        n_dims = spec.num_users * spec.block_length + spec.seed_length
        total = self.q**n_dims
        if total > cap:
            raise TooLarge(
                f"{self.q}**{n_dims} = {total} seed realizations exceed the cap {cap}"
            )
        dtype = np.int16 if self.q < 2**15 else np.int64
        idx = np.arange(total, dtype=np.int64)
        digits = np.empty((total, n_dims), dtype=dtype)
        for d in range(n_dims):
            digits[:, d] = (idx // (self.q**d)) % self.q
        self._digits = digits
        self._exponents: dict[frozenset[str], int] = {}

    def _outcome_codes(self, labels: frozenset[str]) -> np.ndarray:
        """One integer per seed realization encoding the joint outcome.

        Row values are packed base q; when the packed value would not
        fit in an int64 the rows are split in half and the halves are
        combined through factorization.
        """
        total = self._digits.shape[0]
        if not labels:
            return np.zeros(total, dtype=np.int64)
        mats = [self.variables[name].coeffs.array() for name in sorted(labels)]
        stacked = np.vstack(mats).astype(np.int64)
        return self._encode(stacked)

    def _encode(self, stacked: np.ndarray) -> np.ndarray:
        rows = stacked.shape[0]
        if self.q**rows >= 2**62:
            half = rows // 2
            lo = self._encode(stacked[:half])
            hi = self._encode(stacked[half:])
            pair = np.stack([lo, hi], axis=1)
            _, inverse = np.unique(pair, axis=0, return_inverse=True)
            return inverse.astype(np.int64)
        weights = (self.q ** np.arange(rows, dtype=np.int64)).astype(np.int64)
        total = self._digits.shape[0]
        codes = np.empty(total, dtype=np.int64)
        for start in range(0, total, self._CHUNK):
            chunk = self._digits[start : start + self._CHUNK].astype(np.int64)
            values = (chunk @ stacked.T) % self.q
            codes[start : start + self._CHUNK] = values @ weights
        return codes

    def entropy_exponent(self, labels: Iterable[str]) -> int:
        """H in q-ary symbols read off the outcome counts.

        Requires (and checks) that the outcome distribution is uniform
        over its support and the support size is a power of q.
        """
        key = frozenset(labels)
        hit = self._exponents.get(key)
        if hit is not None:
            return hit
        codes = self._outcome_codes(key)
        _, counts = np.unique(codes, return_counts=True)
        if counts.min() != counts.max():
            raise DimensionMismatch(
                "outcome distribution is not uniform over its support"
            )
        support = len(counts)
        e = 0
        while support % self.q == 0:
            support //= self.q
            e += 1
        if support != 1:
            raise DimensionMismatch(
                f"support size {len(counts)} is not a power of q={self.q}"
            )
        self._exponents[key] = e
        return e

    def mi(
        self,
        a_labels: Iterable[str],
        b_labels: Iterable[str],
        c_labels: Iterable[str],
    ) -> Fraction:
        a, b, c = frozenset(a_labels), frozenset(b_labels), frozenset(c_labels)
        return Fraction(
            self.entropy_exponent(a | c)
            + self.entropy_exponent(b | c)
            - self.entropy_exponent(a | b | c)
            - self.entropy_exponent(c)
        )


def brute_force_mi(
    spec: SchemeSpec,
    a_labels: Sequence[str],
    b_labels: Sequence[str],
    c_labels: Sequence[str],
    cap: int = DEFAULT_BRUTE_FORCE_CAP,
) -> Fraction:
    """I(A; B | C) by full seed enumeration (independent of rank)."""
    return BruteForceAnalyzer(spec, cap=cap).mi(a_labels, b_labels, c_labels)
