"""Lower bounds on lambda from requiring collapse within a perception time.

Each stage of the rod-cell signal chain contributes f^2 n^2 N to the rate
multiplier S. Asking for Gamma t >= 100 within 0.1 s gives lambda >= 1000/S.

Run: python demos/04_perception_bounds.py
"""
import numpy as np

from cslbounds.scenarios import (
    BUILTIN_NAMES,
    BoundCriterion,
    comparison_table,
    get_scenario,
    lambda_bound,
    scan,
    scenario_rate_sum,
)

crit = BoundCriterion()
for name in BUILTIN_NAMES:
    sc = get_scenario(name)
    S = scenario_rate_sum(sc)
    b = lambda_bound(S, crit)
    print(f"{name:22s} S = {S:.3e}  lambda >= {b.lam:.2e}  (slack {b.low:.0e} .. {b.high:.0e})")
    for s in sc.stages:
        print(f"    {s.name:17s} f={s.f:4.2f}  f^2 n^2 N = {s.contribution:.3e}")

tab = comparison_table(crit)
print("\nranges (largest, smallest):")
for k, (hi, lo) in tab["ranges"].items():
    print(f"  {k:24s} {hi:.1e} .. {lo:.1e}")
print("  quoted original        ", tab["quoted_original"]["range"], "-", tab["quoted_original"]["provenance"])

print("\ncollapse time vs lambda, corrected extreme scenario")
res = scan(np.logspace(-9, -7, 9), [1e-5], get_scenario("corrected_extreme"), crit)
for r in res.rows:
    print(f"  lambda {r['lambda']:.2e}: t_c = {r['collapse_time']:.3g} s  {'collapses' if r['collapses'] else ''}")
