"""Command-line surface.

Commands: ``rates``, ``synthesize``, ``simulate``, ``verify``,
``oracle-check``, ``pipeline``.  All machine output is JSON (written to
``--out`` and/or stdout with ``--json-only``); human-readable tables go
to stdout otherwise.

Exit codes: 0 success, 2 input error, 3 verification failure.

Caps are overridable through the environment: ``DSAGG_CLOSURE_CAP``
(materialized closure size), ``DSAGG_ORACLE_CAP`` (basic-point budget
of ``oracle-check``), and ``DSAGG_MAX_ATTEMPTS`` (verify-and-resample
budget).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

from . import linsec, sim
from .derived import CaseTag, DerivedSets, derive
from .errors import DsaggError, InputError, InternalInconsistency
from .instance import (
    DEFAULT_CLOSURE_CAP,
    ClosedSystems,
    ProblemInstance,
    close_downward,
    load_instance,
)
from .lp import LpSolution, RationalLp, build_lp, check_optimum_sum_identity, solve_exact, solve_oracle
from .scheme import (
    DEFAULT_MAX_ATTEMPTS,
    SchemeSpec,
    break_zero_sum,
    choose_field,
    optimal_rates,
    synthesize,
)

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_VERIFICATION = 3


def _env_int(name: str, default: int) -> int:
    raw = os.environ.get(name)
    if raw is None:
        return default
    try:
        return int(raw)
    except ValueError as exc:
        raise InputError(f"environment variable {name}={raw!r} is not an integer") from exc


@dataclass
class Analysis:
    instance: ProblemInstance
    closed: ClosedSystems
    derived: DerivedSets
    lp: RationalLp | None
    lp_solution: LpSolution | None
    rates: tuple[Fraction, Fraction]


def analyze(instance: ProblemInstance) -> Analysis:
    """Closure, derivation, classification, and (if fractional) the LP."""
    closed = close_downward(instance, cap=_env_int("DSAGG_CLOSURE_CAP", DEFAULT_CLOSURE_CAP))
    derived = derive(closed, instance.num_users)
    lp = None
    solution = None
    if derived.case_tag is CaseTag.FRACTIONAL:
        lp = build_lp(derived)
        solution = solve_exact(lp)
        if not check_optimum_sum_identity(solution):
            raise InternalInconsistency(
                "optimal solution violates the optimum/sum identity: "
                f"optimum={solution.optimum}, assignment={solution.assignment}"
            )
    rates = optimal_rates(derived, solution)
    return Analysis(instance, closed, derived, lp, solution, rates)


def _set_str(s) -> str:
    return "{" + ",".join(str(v) for v in sorted(s)) + "}"


def _rates_dict(an: Analysis) -> dict:
    out = {
        "num_users": an.instance.num_users,
        "security_generators": [sorted(s) for s in an.instance.security_generators],
        "collusion_generators": [sorted(t) for t in an.instance.collusion_generators],
        "closure_sizes": {
            "security": len(an.closed.security_closure),
            "collusion": len(an.closed.collusion_closure),
        },
        "implicit_set": sorted(an.derived.implicit_set),
        "total_security_set": sorted(an.derived.total_security_set),
        "a_star": an.derived.a_star,
        "q_set": sorted(an.derived.q_set),
        "case": an.derived.case_tag.value,
        "rates": {
            "communication": str(an.rates[0]),
            "source_key": str(an.rates[1]),
        },
    }
    if an.lp is not None and an.lp_solution is not None:
        out["lp"] = {
            "variables": list(an.lp.variables),
            "upper_constraints": [sorted(u) for u in an.lp.upper_constraints],
            "lower_constraints": [sorted(v) for v in an.lp.lower_constraints],
            "optimum": str(an.lp_solution.optimum),
            "assignment": {str(k): str(v) for k, v in sorted(an.lp_solution.assignment.items())},
            "sum_identity_holds": check_optimum_sum_identity(an.lp_solution),
        }
    return out


def _dump_lp_text(lp: RationalLp) -> str:
    lines = ["variables: " + " ".join(f"b{k}" for k in lp.variables), "minimize t"]
    for up in lp.upper_constraints:
        if up:
            lines.append(" + ".join(f"b{k}" for k in sorted(up)) + " - t <= 0")
        else:
            lines.append("0 - t <= 0")
    for low in lp.lower_constraints:
        lines.append(" + ".join(f"b{k}" for k in sorted(low)) + " >= 1")
    for k in lp.variables:
        lines.append(f"b{k} >= 0")
    lines.append("t >= 0")
    return "\n".join(lines)


def _print_rates_table(an: Analysis) -> None:
    d = an.derived
    print(f"users (K)            : {an.instance.num_users}")
    print(f"implicit security set: {_set_str(d.implicit_set)}")
    print(f"total security set   : {_set_str(d.total_security_set)}")
    print(f"a*                   : {d.a_star}")
    print(f"maximal-cover union Q: {_set_str(d.q_set)}")
    print(f"case                 : {d.case_tag.value}")
    if an.lp_solution is not None:
        print(f"program optimum b*   : {an.lp_solution.optimum}")
        for k, v in sorted(an.lp_solution.assignment.items()):
            print(f"  b_{k} = {v}")
    print(f"communication rate   : {an.rates[0]}")
    print(f"source-key rate      : {an.rates[1]}")


def _emit(report: dict, args) -> None:
    text = json.dumps(report, indent=2, sort_keys=False)
    if getattr(args, "out", None):
        Path(args.out).write_text(text + "\n")
    if getattr(args, "json_only", False):
        print(text)


def _synthesize_from(an: Analysis, args) -> SchemeSpec:
    q = choose_field(an.derived, an.lp_solution, override=args.q)
    return synthesize(
        an.derived,
        an.lp_solution,
        q=q,
        rng_seed=args.seed,
        max_attempts=_env_int("DSAGG_MAX_ATTEMPTS", DEFAULT_MAX_ATTEMPTS),
    )


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_rates(args) -> int:
    an = analyze(load_instance(args.instance))
    report = _rates_dict(an)
    if not args.json_only:
        _print_rates_table(an)
        if args.dump_lp and an.lp is not None:
            print()
            print(_dump_lp_text(an.lp))
    if args.dump_lp and an.lp is not None:
        report["lp_text"] = _dump_lp_text(an.lp)
    _emit(report, args)
    return EXIT_OK


def cmd_synthesize(args) -> int:
    an = analyze(load_instance(args.instance))
    spec = _synthesize_from(an, args)
    report = {"rates": _rates_dict(an), "scheme": spec.to_json_dict()}
    if not args.json_only:
        print(f"case {spec.case_tag.value}: q={spec.q}, block_length={spec.block_length}, "
              f"seed_length={spec.seed_length}, keyed users={list(spec.keyed_users())}")
    _emit(report, args)
    return EXIT_OK


def cmd_simulate(args) -> int:
    an = analyze(load_instance(args.instance))
    spec = _synthesize_from(an, args)
    summary = sim.run_many(spec, rounds=args.rounds, base_seed=args.seed)
    report = {"scheme": spec.to_json_dict(), "simulation": summary}
    if not args.json_only:
        print(f"{summary['agreeing_rounds']}/{summary['rounds']} rounds decoded the aggregate "
              f"identically at every user")
    _emit(report, args)
    return EXIT_OK if summary["all_agree"] else EXIT_VERIFICATION


def _verification_block(spec: SchemeSpec, an: Analysis) -> tuple[dict, bool]:
    timings: dict[str, float] = {}

    t0 = time.perf_counter()
    correctness = linsec.verify_correctness(spec)
    timings["correctness_s"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    security = linsec.verify_security(spec, an.closed)
    timings["security_s"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    key_independence = linsec.verify_key_independence(spec, an.closed)
    timings["key_independence_s"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    bounds = linsec.verify_entropy_bounds(spec, an.closed, an.derived)
    timings["entropy_bounds_s"] = time.perf_counter() - t0

    ok = (
        all(correctness.values())
        and security.passed
        and key_independence
        and bounds.passed
    )
    zero_sum = spec.zero_sum_holds()
    block = {
        "zero_sum_holds": zero_sum,
        "correctness": {str(u): bool(v) for u, v in sorted(correctness.items())},
        "security": security.to_json_dict(),
        "key_independence": key_independence,
        "entropy_bounds": bounds.to_json_dict(),
        "timings": timings,
        "passed": ok and zero_sum,
    }
    return block, ok and zero_sum


def cmd_verify(args) -> int:
    an = analyze(load_instance(args.instance))
    spec = _synthesize_from(an, args)
    block, ok = _verification_block(spec, an)
    report = {"rates": _rates_dict(an), "verification": block}
    if not args.json_only:
        n_checks = len(block["security"]["checks"])
        print(f"zero-sum: {block['zero_sum_holds']}; "
              f"correctness: {all(v for v in block['correctness'].values())}; "
              f"security: {block['security']['passed']} over {n_checks} triples; "
              f"key independence: {block['key_independence']}; "
              f"entropy bounds: {block['entropy_bounds']['passed']}")
    _emit(report, args)
    return EXIT_OK if ok else EXIT_VERIFICATION


def cmd_oracle_check(args) -> int:
    an = analyze(load_instance(args.instance))
    if an.lp is None or an.lp_solution is None:
        raise InputError(
            f"instance is {an.derived.case_tag.value}; the rate program "
            "exists only for Fractional instances"
        )
    reference = solve_oracle(an.lp, work_budget=_env_int("DSAGG_ORACLE_CAP", 2_000_000))
    agree = reference.optimum == an.lp_solution.optimum
    report = {
        "simplex_optimum": str(an.lp_solution.optimum),
        "enumeration_optimum": str(reference.optimum),
        "agree": agree,
    }
    if not args.json_only:
        print(f"simplex optimum {an.lp_solution.optimum} vs enumeration optimum "
              f"{reference.optimum}: {'agree' if agree else 'DISAGREE'}")
    _emit(report, args)
    return EXIT_OK if agree else EXIT_VERIFICATION


def cmd_pipeline(args) -> int:
    an = analyze(load_instance(args.instance))
    spec = _synthesize_from(an, args)
    if args.break_zero_sum:
        spec = break_zero_sum(spec)
    block, ok = _verification_block(spec, an)
    summary = sim.run_many(spec, rounds=args.rounds, base_seed=args.seed)
    passed = ok and summary["all_agree"]
    report = {
        "rates": _rates_dict(an),
        "scheme": spec.to_json_dict(),
        "verification": block,
        "simulation": summary,
        "passed": passed,
    }
    if not args.json_only:
        _print_rates_table(an)
        print(f"verification passed  : {ok}")
        print(f"simulation agreement : {summary['agreeing_rounds']}/{summary['rounds']}")
        print(f"pipeline             : {'PASS' if passed else 'FAIL'}")
    _emit(report, args)
    return EXIT_OK if passed else EXIT_VERIFICATION


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dsagg",
        description="Key rates, scheme synthesis, simulation and exact "
        "security verification for decentralized secure aggregation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, rounds_default=None):
        p.add_argument("--instance", required=True, help="instance JSON file")
        p.add_argument("--q", type=int, default=None, help="field modulus override (prime)")
        p.add_argument("--seed", type=int, default=0, help="RNG seed (default 0)")
        p.add_argument("--out", default=None, help="write the JSON report here")
        p.add_argument("--json-only", action="store_true", help="print JSON instead of tables")
        if rounds_default is not None:
            p.add_argument("--rounds", type=int, default=rounds_default)

    p = sub.add_parser("rates", help="derived sets, case, program, optimal rates")
    common(p)
    p.add_argument("--dump-lp", action="store_true", help="emit the program as plain-text inequalities")
    p.set_defaults(func=cmd_rates)

    p = sub.add_parser("synthesize", help="produce a verified-by-construction scheme")
    common(p)
    p.set_defaults(func=cmd_synthesize)

    p = sub.add_parser("simulate", help="run broadcast rounds and decode everywhere")
    common(p, rounds_default=100)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("verify", help="exact correctness/security verification")
    common(p)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("oracle-check", help="cross-check the simplex against enumeration")
    common(p)
    p.set_defaults(func=cmd_oracle_check)

    p = sub.add_parser("pipeline", help="rates + synthesize + verify + simulate")
    common(p, rounds_default=25)
    p.add_argument("--break-zero-sum", action="store_true",
                   help="fault-injection hook: sabotage the key maps before verifying")
    p.set_defaults(func=cmd_pipeline)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except DsaggError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VERIFICATION


def console_main() -> None:
    sys.exit(main())


if __name__ == "__main__":
    console_main()
