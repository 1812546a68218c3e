"""Kernels, the exact decay rate, and its separation regimes.

Run: python demos/01_kernels_and_regimes.py
"""
import numpy as np

from cslbounds import (
    NUCLEON,
    ClusterSpec,
    CollapseParams,
    Configuration,
    Superposition,
    cluster_rate,
    gamma_exact,
    pair_kernel_G,
    regime_classify,
)

# Work in units where r_C = 1 and lambda = 1, so Gamma comes out in units of lambda.
p = CollapseParams.from_lambda(1.0, 1.0)
print("G(0) * gamma / lambda =", pair_kernel_G(np.zeros(3), p.r_C) * p.gamma / p.lam)


def nucleons(pos):
    return Configuration.uniform(NUCLEON, np.atleast_2d(pos))


# A single nucleon moved by d: Gamma = lambda (1 - exp(-d^2/4)).
print("\nsingle nucleon")
for d in [0.1, 0.5, 1.0, 2.0, 3.0, 5.0, 10.0]:
    sup = Superposition(nucleons([0, 0, 0]), nucleons([d, 0, 0]))
    g = gamma_exact(sup, p).gamma_rate
    print(f"  d = {d:5.1f} r_C   Gamma/lambda = {g:.6f}   1-exp(-d^2/4) = {1 - np.exp(-d * d / 4):.6f}")

# N nucleons: clustered moves scale like N^2, spread-out moves like N.
rng = np.random.default_rng(0)
print("\nN nucleons, both branches far apart")
print("     N   clustered   spread")
for N in [1, 4, 16, 64]:
    tight = rng.uniform(-0.01, 0.01, (N, 3))
    g_clu = gamma_exact(Superposition(nucleons(tight), nucleons(tight + [50, 0, 0])), p).gamma_rate
    loose = np.stack(np.unravel_index(np.arange(N), (4, 4, 4)), axis=1) * 8.0
    g_spr = gamma_exact(Superposition(nucleons(loose), nucleons(loose + [0, 0, 50])), p).gamma_rate
    print(f"  {N:4d}  {g_clu:10.2f}  {g_spr:7.2f}")

# The classifier names the pattern and supplies the leading-order estimate.
print("\nregimes")
cases = {
    "tiny shift": (tight, tight + 0.03),
    "cluster to cluster": (tight, tight + [50, 0, 0]),
    "cluster to spread": (tight, loose + [100, 0, 0]),
    "spread to spread": (loose, loose + [0, 0, 50]),
    "partial overlap": (loose[:4] * 0.2, loose[:4] * 0.2 + [0.5, 0, 0]),
}
for name, (a, b) in cases.items():
    sup = Superposition(nucleons(a), nucleons(b))
    rep = regime_classify(sup, p)
    print(f"  {name:20s} {rep.regime.value:15s} exact {gamma_exact(sup, p).gamma_rate:9.3f}"
          f"  leading order {rep.leading_order(p):9.3f}")

# Several far-apart clusters: lambda * sum n_i^2.
spec = ClusterSpec.of((1, 10, 1), (1, 20, 1), (1, 30, 1))
print("\ncluster limit for 10/20/30:", cluster_rate(spec, p).gamma_rate)
