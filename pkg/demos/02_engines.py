"""Three ways to evaluate the same rate, and what each costs.

The pair sum is exact but quadratic in N. A cell list with a cutoff of a
few r_C drops only pairs whose kernel is below exp(-c^2/4). The field
quadrature rasterizes both smeared densities; the integrand is a smooth
Gaussian sum, so the midpoint rule converges far faster than O(h^2).

Run: python demos/02_engines.py
"""
import time

import numpy as np

from cslbounds import (
    NUCLEON,
    CollapseParams,
    Configuration,
    Grid,
    Superposition,
    gamma_accelerated,
    gamma_exact,
    gamma_field,
)

p = CollapseParams.from_lambda(1.0, 1.0)
rng = np.random.default_rng(1)


def random_pair(n, extent):
    a = rng.uniform(0, extent, (n, 3))
    b = a + rng.normal(0, 1.0, a.shape)
    return Superposition(Configuration.uniform(NUCLEON, a), Configuration.uniform(NUCLEON, b))


print("field quadrature vs exact, 40 particles")
sup = random_pair(40, 5.0)
exact = gamma_exact(sup, p).gamma_rate
for h in [0.5, 0.25, 0.125]:
    f = gamma_field(sup, p, Grid(h=h)).gamma_rate
    print(f"  h = r_C/{1 / h:.0f}: relative difference {abs(f - exact) / exact:.1e}")

print("\ncutoff convergence, 1000 particles in a 40 r_C box")
sup = random_pair(1000, 40.0)
exact = gamma_exact(sup, p).gamma_rate
for c in [3.0, 4.0, 5.0, 6.0, 8.0]:
    r = gamma_accelerated(sup, p, cutoff=c)
    print(f"  c = {c:.0f}: rel. error {abs(r.gamma_rate - exact) / exact:.1e}"
          f"  (bound {r.error_bound / exact:.1e})")

print("\nscaling at constant density (0.015 per r_C^3)")
print("       N   exact s   cell list s")
for n in [1000, 2000, 4000, 8000]:
    sup = random_pair(n, (n / 0.015) ** (1 / 3))
    t0 = time.perf_counter()
    gamma_exact(sup, p)
    t1 = time.perf_counter()
    gamma_accelerated(sup, p)
    t2 = time.perf_counter()
    print(f"  {n:6d}  {t1 - t0:8.3f}  {t2 - t1:11.3f}")
