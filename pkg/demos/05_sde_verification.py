"""Simulating the collapse dynamics and recovering the analytic rate.

One nucleon in two places 5 r_C apart, with lambda tuned so that Gamma is
exactly 1/s. The ensemble-averaged coherence should decay as exp(-t), and
trajectories should end up in each branch with the Born probability.

Run: python demos/05_sde_verification.py [n_traj]
"""
import sys

import numpy as np

from cslbounds import NUCLEON, Configuration, Superposition, gamma_exact
from cslbounds.io import load_params
from cslbounds.sde import run_ensemble

n_traj = int(sys.argv[1]) if len(sys.argv) > 1 else 2000

a = Configuration.uniform(NUCLEON, [[0, 0, 0]])
b = Configuration.uniform(NUCLEON, [[5, 0, 0]])
for p_a in [0.5, 0.3]:
    sup = Superposition.with_weight(a, b, p_a)
    params = load_params({"target_rate": 1.0, "r_C": 1.0}, sup)
    res = run_ensemble(sup, params, dt=1e-3, t_max=3.0, n_traj=n_traj, seed=1)
    print(f"|amp_a|^2 = {p_a}:  analytic Gamma {gamma_exact(sup, params).gamma_rate:.4f}, "
          f"fitted {res.decay.rate:.4f} +- {res.decay.stderr:.4f}  (z = {res.z_score(1.0):+.2f})")
    freq = res.collapse_frequencies[0]
    print(f"    ended in A: {freq:.4f} +- {np.sqrt(p_a * (1 - p_a) / n_traj):.4f}, "
          f"<|a_A|^2>(t_max) = {res.mean_weights[-1, 0]:.4f}")
    for k in range(0, len(res.times), len(res.times) // 6):
        c = res.mean_coherence[k].real / np.sqrt(p_a * (1 - p_a))
        print(f"    t = {res.times[k]:.2f}: coherence {c:.4f}  exp(-t) {np.exp(-res.times[k]):.4f}")
