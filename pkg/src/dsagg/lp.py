"""Exact rational linear programming for the fractional key rate.

The fractional part of the optimal source-key rate is the value of a
min-max program over per-user key masses b_k, one variable per user
outside the total security set:

    minimize   max over maximal triples of  sum(b_k : k in cover \\ total)
    subject to sum(b_k : k outside the cover) >= 1   for every maximal triple
               b_k >= 0

The min-max is encoded with an epigraph variable t (minimize t with
t >= each upper sum).  Everything runs over ``fractions.Fraction``:
the optimal assignment feeds the key-splitting synthesizer as exact
p_k / q_bar integers, so floating point is banned from this module.

Two independent solvers are provided.  ``solve_exact`` is a two-phase
tableau simplex with Bland's rule (termination guaranteed) followed by
a lexicographic refinement pass that makes the returned vertex unique:
among all optimal assignments it returns the one minimizing b_k in
ascending user order.  ``solve_oracle`` enumerates every basic point
(each subset of variable-count-many constraint hyperplanes, bounds
included), filters the feasible ones, and takes the best -- brutally
slow but obviously correct, which is what an oracle is for.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations
from math import comb

from .derived import CaseTag, DerivedSets
from .errors import Infeasible, InternalInconsistency, NotFractionalCase, TooLarge, Unbounded

# The Rational type used throughout is the stdlib Fraction: always
# reduced, positive denominator, arbitrary-precision integers.
Rational = Fraction

_ZERO = Fraction(0)
_ONE = Fraction(1)


@dataclass(frozen=True)
class RationalLp:
    """The min-max program, held as index sets.

    Every constraint is a coefficient-1 sum over a subset of the
    variables, so a frozenset per constraint is a complete encoding.
    ``upper_constraints[i]`` and ``lower_constraints[i]`` come from the
    same deduplicated maximal triple.
    """

    variables: tuple[int, ...]
    upper_constraints: tuple[frozenset[int], ...]
    lower_constraints: tuple[frozenset[int], ...]

    def __post_init__(self) -> None:
        declared = set(self.variables)
        for group in (self.upper_constraints, self.lower_constraints):
            for s in group:
                if not s <= declared:
                    raise ValueError(
                        f"constraint {sorted(s)} references undeclared variables"
                    )


@dataclass(frozen=True)
class LpSolution:
    optimum: Fraction
    assignment: dict[int, Fraction]
    tight_upper: tuple[int, ...]
    tight_lower: tuple[int, ...]


def build_lp(derived: DerivedSets) -> RationalLp:
    """Constraints of the min-max program from the maximal triples.

    Each deduplicated maximal triple contributes one upper sum (its
    cover minus the total security set) and one lower sum (everything
    outside its cover); in the fractional case these determine each
    other, so the pairing is one-to-one.
    """
    if derived.case_tag is not CaseTag.FRACTIONAL:
        raise NotFractionalCase(
            f"rate program is defined for the fractional case only, got {derived.case_tag.value}"
        )
    users = frozenset(range(1, derived.num_users + 1))
    variables = tuple(sorted(users - derived.total_security_set))
    uppers: list[frozenset[int]] = []
    lowers: list[frozenset[int]] = []
    seen: set[tuple[frozenset[int], frozenset[int]]] = set()
    for tr in derived.max_triples:
        up = frozenset(tr.union_set - derived.total_security_set)
        low = frozenset(users - tr.union_set)
        if not low:
            raise InternalInconsistency(
                "a maximal triple covers all users outside the full-coverage case"
            )
        if (up, low) in seen:
            continue
        seen.add((up, low))
        uppers.append(up)
        lowers.append(low)
    return RationalLp(
        variables=variables,
        upper_constraints=tuple(uppers),
        lower_constraints=tuple(lowers),
    )


# ---------------------------------------------------------------------------
# Two-phase simplex over Fractions
# ---------------------------------------------------------------------------
#
# Rows are (coeffs, rel, rhs) with rel in {"<=", ">=", "=="} and x >= 0
# implicit.  Bland's rule everywhere: entering column of smallest
# index with negative reduced cost, leaving row breaking ratio ties by
# smallest basic column index.  With Bland the simplex cannot cycle.


def _pivot(tab: list[list[Fraction]], basis: list[int], r: int, c: int) -> None:
    piv = tab[r][c]
    inv = 1 / piv
    tab[r] = [v * inv for v in tab[r]]
    row_r = tab[r]
    for i, row in enumerate(tab):
        if i == r:
            continue
        f = row[c]
        if f:
            tab[i] = [a - f * b for a, b in zip(row, row_r)]
    basis[r] = c


def _run_simplex(
    tab: list[list[Fraction]],
    basis: list[int],
    costs: list[Fraction],
    allowed: list[bool],
) -> None:
    """Minimize costs over a tableau already in basic form (in place)."""
    m = len(tab)
    width = len(tab[0]) - 1
    while True:
        duals = [costs[basis[i]] for i in range(m)]
        entering = -1
        for j in range(width):
            if not allowed[j]:
                continue
            rc = costs[j]
            for i in range(m):
                if duals[i] and tab[i][j]:
                    rc -= duals[i] * tab[i][j]
            if rc < 0:
                entering = j
                break
        if entering < 0:
            return
        leaving = -1
        best_ratio: Fraction | None = None
        for i in range(m):
            a = tab[i][entering]
            if a > 0:
                ratio = tab[i][-1] / a
                if (
                    best_ratio is None
                    or ratio < best_ratio
                    or (ratio == best_ratio and basis[i] < basis[leaving])
                ):
                    best_ratio = ratio
                    leaving = i
        if leaving < 0:
            raise Unbounded("objective decreases without limit")
        _pivot(tab, basis, leaving, entering)


def _simplex_min(
    costs: list[Fraction],
    rows: list[tuple[list[Fraction], str, Fraction]],
) -> tuple[Fraction, list[Fraction]]:
    """Minimize costs . x subject to rows and x >= 0; returns (value, x)."""
    n = len(costs)
    if not rows:
        if any(c < 0 for c in costs):
            raise Unbounded("objective decreases without limit")
        return _ZERO, [_ZERO] * n
    canon: list[tuple[list[Fraction], str, Fraction]] = []
    for coeffs, rel, rhs in rows:
        coeffs = [Fraction(v) for v in coeffs]
        rhs = Fraction(rhs)
        if rhs < 0:
            coeffs = [-v for v in coeffs]
            rhs = -rhs
            rel = {"<=": ">=", ">=": "<=", "==": "=="}[rel]
        canon.append((coeffs, rel, rhs))

    n_slack = sum(1 for _, rel, _ in canon if rel != "==")
    art_rows = [i for i, (_, rel, _) in enumerate(canon) if rel != "<="]
    width = n + n_slack + len(art_rows)

    tab: list[list[Fraction]] = []
    basis: list[int] = []
    slack_at = 0
    art_at = 0
    for i, (coeffs, rel, rhs) in enumerate(canon):
        row = coeffs + [_ZERO] * (n_slack + len(art_rows)) + [rhs]
        if rel != "==":
            row[n + slack_at] = _ONE if rel == "<=" else Fraction(-1)
            slack_at += 1
        if rel == "<=":
            basis.append(n + slack_at - 1)
        else:
            col = n + n_slack + art_at
            row[col] = _ONE
            basis.append(col)
            art_at += 1
        tab.append(row)

    art_cols = set(range(n + n_slack, width))
    if art_cols:
        phase1 = [_ONE if j in art_cols else _ZERO for j in range(width)]
        allowed = [True] * width
        _run_simplex(tab, basis, phase1, allowed)
        value1 = sum(phase1[basis[i]] * tab[i][-1] for i in range(len(tab)))
        if value1 != 0:
            raise Infeasible("constraints admit no solution")
        # Drive leftover artificials out of the basis; rows that cannot
        # pivot on a real column are redundant and dropped.
        for i in reversed(range(len(tab))):
            if basis[i] in art_cols:
                target = next(
                    (j for j in range(n + n_slack) if tab[i][j] != 0), None
                )
                if target is None:
                    del tab[i]
                    del basis[i]
                else:
                    _pivot(tab, basis, i, target)

    phase2 = [Fraction(c) for c in costs] + [_ZERO] * (width - n)
    allowed = [j < n + n_slack for j in range(width)]
    _run_simplex(tab, basis, phase2, allowed)

    x = [_ZERO] * n
    for i, b in enumerate(basis):
        if b < n:
            x[b] = tab[i][-1]
    value = sum(c * v for c, v in zip(costs, x))
    return value, x


# ---------------------------------------------------------------------------
# Public solvers
# ---------------------------------------------------------------------------


def _lower_rows(
    lp: RationalLp, var_pos: dict[int, int], n: int
) -> list[tuple[list[Fraction], str, Fraction]]:
    rows: list[tuple[list[Fraction], str, Fraction]] = []
    for low in lp.lower_constraints:
        coeffs = [_ZERO] * n
        for k in low:
            coeffs[var_pos[k]] = _ONE
        rows.append((coeffs, ">=", _ONE))
    return rows


def _epigraph_rows(
    lp: RationalLp, var_pos: dict[int, int]
) -> list[tuple[list[Fraction], str, Fraction]]:
    n = len(lp.variables) + 1
    rows: list[tuple[list[Fraction], str, Fraction]] = []
    for up in lp.upper_constraints:
        coeffs = [_ZERO] * n
        for k in up:
            coeffs[var_pos[k]] = _ONE
        coeffs[-1] = Fraction(-1)
        rows.append((coeffs, "<=", _ZERO))
    return rows + _lower_rows(lp, var_pos, n)


def _evaluate(lp: RationalLp, assignment: dict[int, Fraction]) -> Fraction:
    """Max of the upper sums at a point (0 when there are none)."""
    best = _ZERO
    for up in lp.upper_constraints:
        s = sum((assignment[k] for k in up), _ZERO)
        if s > best:
            best = s
    return best


def _tight_sets(
    lp: RationalLp, assignment: dict[int, Fraction], optimum: Fraction
) -> tuple[tuple[int, ...], tuple[int, ...]]:
    tight_up = tuple(
        i
        for i, up in enumerate(lp.upper_constraints)
        if sum((assignment[k] for k in up), _ZERO) == optimum
    )
    tight_low = tuple(
        i
        for i, low in enumerate(lp.lower_constraints)
        if sum((assignment[k] for k in low), _ZERO) == _ONE
    )
    return tight_up, tight_low


def solve_exact(lp: RationalLp) -> LpSolution:
    """Vertex-optimal solution of the min-max program, deterministically.

    First the epigraph LP pins the optimal value t*; then one more
    small LP per variable (ascending user id) minimizes that variable
    subject to optimality and to the values already fixed.  The result
    is the unique lexicographically-smallest optimal assignment, which
    is a vertex of the feasible region.
    """
    n_b = len(lp.variables)
    var_pos = {k: i for i, k in enumerate(lp.variables)}
    if n_b == 0:
        return LpSolution(_ZERO, {}, *_tight_sets(lp, {}, _ZERO))

    costs = [_ZERO] * n_b + [_ONE]
    t_star, _ = _simplex_min(costs, _epigraph_rows(lp, var_pos))

    # Lexicographic refinement in plain b-space: optimality becomes the
    # constraint "every upper sum <= t*".
    base_rows = _lower_rows(lp, var_pos, n_b)
    fixed_rows: list[tuple[list[Fraction], str, Fraction]] = []
    for up in lp.upper_constraints:
        coeffs = [_ZERO] * n_b
        for k in up:
            coeffs[var_pos[k]] = _ONE
        fixed_rows.append((coeffs, "<=", t_star))
    values: dict[int, Fraction] = {}
    pinned: list[tuple[list[Fraction], str, Fraction]] = []
    for k in lp.variables:
        costs_k = [_ZERO] * n_b
        costs_k[var_pos[k]] = _ONE
        _, x = _simplex_min(costs_k, base_rows + fixed_rows + pinned)
        values[k] = x[var_pos[k]]
        pin = [_ZERO] * n_b
        pin[var_pos[k]] = _ONE
        pinned.append((pin, "==", values[k]))

    achieved = _evaluate(lp, values)
    if achieved != t_star:
        raise InternalInconsistency(
            f"lexicographic refinement broke optimality: {achieved} != {t_star}"
        )
    tight_up, tight_low = _tight_sets(lp, values, t_star)
    return LpSolution(t_star, values, tight_up, tight_low)


def _det_int(m: list[list[int]]) -> int:
    """Fraction-free (Bareiss) determinant of an integer matrix; destroys m."""
    n = len(m)
    prev = 1
    sign = 1
    for col in range(n - 1):
        piv_row = next((i for i in range(col, n) if m[i][col]), None)
        if piv_row is None:
            return 0
        if piv_row != col:
            m[col], m[piv_row] = m[piv_row], m[col]
            sign = -sign
        p = m[col][col]
        row_c = m[col]
        for i in range(col + 1, n):
            row_i = m[i]
            f = row_i[col]
            for j in range(col + 1, n):
                row_i[j] = (p * row_i[j] - f * row_c[j]) // prev
            row_i[col] = 0
        prev = p
    return sign * m[n - 1][n - 1]


def _solve_square_int(
    rows: list[tuple[int, ...]], rhs: list[int]
) -> tuple[list[int], int] | None:
    """Cramer solution of an integer system as (numerators, denominator > 0)."""
    n = len(rows)
    den = _det_int([list(r) for r in rows])
    if den == 0:
        return None
    nums = []
    for i in range(n):
        m = [list(r) for r in rows]
        for j in range(n):
            m[j][i] = rhs[j]
        nums.append(_det_int(m))
    if den < 0:
        den = -den
        nums = [-v for v in nums]
    return nums, den


def solve_oracle(
    lp: RationalLp,
    max_variables: int = 10,
    work_budget: int = 2_000_000,
) -> LpSolution:
    """Independent check: enumerate basic points of the epigraph polytope.

    Every vertex is the intersection of (variable count + 1) constraint
    hyperplanes drawn from the uppers, lowers, and the nonnegativity
    bounds; the optimum is the feasible vertex with the least epigraph
    value.  Exact rationals throughout.
    """
    n_b = len(lp.variables)
    if n_b > max_variables:
        raise TooLarge(f"{n_b} variables exceeds the oracle cap of {max_variables}")
    var_pos = {k: i for i, k in enumerate(lp.variables)}
    n = n_b + 1  # epigraph variable last

    # Integer constraint rows (geq: coeffs . x >= rhs after sign flip).
    constraints: list[tuple[tuple[int, ...], int]] = []
    for up in lp.upper_constraints:
        coeffs = [0] * n
        for k in up:
            coeffs[var_pos[k]] = -1
        coeffs[-1] = 1
        constraints.append((tuple(coeffs), 0))  # t - sum >= 0
    for low in lp.lower_constraints:
        coeffs = [0] * n
        for k in low:
            coeffs[var_pos[k]] = 1
        constraints.append((tuple(coeffs), 1))
    for j in range(n):
        coeffs = [0] * n
        coeffs[j] = 1
        constraints.append((tuple(coeffs), 0))

    m = len(constraints)
    if comb(m, n) > work_budget:
        raise TooLarge(
            f"{m} constraints with {n} variables needs {comb(m, n)} basic points, "
            f"over the {work_budget} budget"
        )

    def feasible(nums: list[int], den: int) -> bool:
        for coeffs, rhs in constraints:
            v = sum(c * x for c, x in zip(coeffs, nums) if c)
            if v < rhs * den:
                return False
        return True

    best: tuple[Fraction, list[Fraction]] | None = None
    for subset in combinations(range(m), n):
        solved = _solve_square_int(
            [constraints[i][0] for i in subset],
            [constraints[i][1] for i in subset],
        )
        if solved is None:
            continue
        nums, den = solved
        if not feasible(nums, den):
            continue
        point = [Fraction(v, den) for v in nums]
        key = (point[-1], point[:-1])
        if best is None or key < best:
            best = key
    if best is None:
        raise Infeasible("no feasible basic point found")
    assignment = {k: best[1][var_pos[k]] for k in lp.variables}
    tight_up, tight_low = _tight_sets(lp, assignment, best[0])
    return LpSolution(best[0], assignment, tight_up, tight_low)


def check_optimum_sum_identity(solution: LpSolution) -> bool:
    """Whether optimum == (sum of the assignment) - 1.

    Holds for every optimal solution of programs built from maximal
    triples, where each cover's complement and its outside-the-total
    part partition the variable set; hand-built programs without that
    structure generally fail it, which makes the check a useful
    regression sentinel.
    """
    total = sum(solution.assignment.values(), _ZERO)
    return solution.optimum == total - 1
