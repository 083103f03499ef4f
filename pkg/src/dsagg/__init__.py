"""Decentralized secure aggregation: rates, schemes, and exact verification.

Given K fully connected users, a monotone family of protected user
subsets, and a monotone family of potential colluder subsets, this
package

* computes the optimal communication and source-key rates, solving an
  exact rational min-max program when per-user key masses go
  fractional;
* synthesizes a matching finite-field scheme (zero-sum linear key maps
  with explicitly verified independence structure);
* simulates the one-shot broadcast protocol; and
* machine-checks correctness and perfect security through rank-based
  entropy computation, with a brute-force enumeration oracle as an
  independent second route.
"""

from .derived import CaseTag, DerivedSets, Triple, classify, compute_a_star_and_triples, compute_implicit_set, compute_q, compute_total_security_set, derive
from .gf import FieldElement, FqMatrix, is_prime, smallest_prime_geq
from .instance import (
    ClosedSystems,
    ProblemInstance,
    close_downward,
    instance_from_dict,
    load_instance,
    validate,
)
from .linsec import (
    BruteForceAnalyzer,
    LinearVariable,
    MiReport,
    brute_force_mi,
    conditional_mi,
    entropy,
    protocol_variables,
    verify_correctness,
    verify_entropy_bounds,
    verify_key_independence,
    verify_security,
)
from .lp import (
    LpSolution,
    Rational,
    RationalLp,
    build_lp,
    check_optimum_sum_identity,
    solve_exact,
    solve_oracle,
)
from .scheme import (
    FractionalData,
    SchemeSpec,
    break_zero_sum,
    choose_field,
    optimal_rates,
    synthesize,
    synthesize_classical,
    synthesize_fractional,
    synthesize_subcase1,
    synthesize_subcase2,
    zero_user_key,
)
from .sim import Transcript, decode_at_user, run_many, run_round

__version__ = "0.1.0"

__all__ = [
    "CaseTag",
    "DerivedSets",
    "Triple",
    "classify",
    "compute_a_star_and_triples",
    "compute_implicit_set",
    "compute_q",
    "compute_total_security_set",
    "derive",
    "FieldElement",
    "FqMatrix",
    "is_prime",
    "smallest_prime_geq",
    "ClosedSystems",
    "ProblemInstance",
    "close_downward",
    "instance_from_dict",
    "load_instance",
    "validate",
    "BruteForceAnalyzer",
    "LinearVariable",
    "MiReport",
    "brute_force_mi",
    "conditional_mi",
    "entropy",
    "protocol_variables",
    "verify_correctness",
    "verify_entropy_bounds",
    "verify_key_independence",
    "verify_security",
    "LpSolution",
    "Rational",
    "RationalLp",
    "build_lp",
    "check_optimum_sum_identity",
    "solve_exact",
    "solve_oracle",
    "FractionalData",
    "SchemeSpec",
    "break_zero_sum",
    "choose_field",
    "optimal_rates",
    "synthesize",
    "synthesize_classical",
    "synthesize_fractional",
    "synthesize_subcase1",
    "synthesize_subcase2",
    "zero_user_key",
    "Transcript",
    "decode_at_user",
    "run_many",
    "run_round",
]
