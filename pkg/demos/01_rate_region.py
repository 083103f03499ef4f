#!/usr/bin/env python3
"""From an instance to its optimal rates, step by step.

Walks two contrasting instances through the derivation pipeline: a
K=5 setup whose key rate is integral, and a K=6 setup where heavy
collusion forces fractional per-user key masses found by an exact
rational program.
"""

from pathlib import Path

from dsagg import (
    CaseTag,
    build_lp,
    check_optimum_sum_identity,
    close_downward,
    derive,
    load_instance,
    optimal_rates,
    solve_exact,
)

INSTANCES = Path(__file__).resolve().parents[1] / "instances"


def walk(path):
    print("=" * 72)
    print(f"instance: {path.name}")
    inst = load_instance(path)
    print(f"  K = {inst.num_users}")
    print(f"  security generators : {[sorted(s) for s in inst.security_generators]}")
    print(f"  collusion generators: {[sorted(t) for t in inst.collusion_generators]}")

    closed = close_downward(inst)
    print(f"  closures materialized: {len(closed.security_closure)} security sets, "
          f"{len(closed.collusion_closure)} collusion sets")

    d = derive(closed, inst.num_users)
    print(f"  implicit security set: {sorted(d.implicit_set)}"
          "   (users isolated by some K-1 cover)")
    print(f"  total security set   : {sorted(d.total_security_set)}")
    print(f"  max overlap a*       : {d.a_star} over {len(d.max_triples)} deduplicated covers")
    print(f"  maximal-cover union Q: {sorted(d.q_set)}")
    print(f"  case                 : {d.case_tag.value}")

    solution = None
    if d.case_tag is CaseTag.FRACTIONAL:
        lp = build_lp(d)
        print(f"  rate program: variables b_k for k in {list(lp.variables)}")
        for up, low in zip(lp.upper_constraints, lp.lower_constraints):
            up_text = " + ".join(f"b{k}" for k in sorted(up)) or "0"
            low_text = " + ".join(f"b{k}" for k in sorted(low))
            print(f"    minimize-max term {up_text:<14} with {low_text} >= 1")
        solution = solve_exact(lp)
        print(f"  optimum b* = {solution.optimum}, masses "
              f"{ {k: str(v) for k, v in sorted(solution.assignment.items())} }")
        print(f"  optimum equals mass sum minus one: "
              f"{check_optimum_sum_identity(solution)}")

    r_x, r_z = optimal_rates(d, solution)
    print(f"  optimal communication rate: {r_x}")
    print(f"  optimal source-key rate   : {r_z}")


if __name__ == "__main__":
    walk(INSTANCES / "k5_integral.json")
    walk(INSTANCES / "k6_fractional.json")
