"""Solutes moving through a fluid.

Swapping solute and solvent molecules of equal mass leaves the smeared
mass density unchanged, so nothing collapses however far the solute moves.
Moving the tagged molecules through a dense fluid that fills in behind them
gives a much smaller rate than the tagged molecules alone would; in a
sparse gas the opposite holds.

Run: python demos/03_fluid_media.py
"""
import numpy as np

from cslbounds import CollapseParams, Species, gamma_accelerated, gamma_exact
from cslbounds.medium import (
    CYTOPLASM_DENSITY,
    PROTEIN_DENSITY_RANGE,
    WATER_DENSITY,
    MediumBox,
    cross_mismatch,
    effective_mass_factor,
    generate_displacement_scenario,
    generate_swap_scenario,
    sodium_effective_density,
    tagged_only,
)

p = CollapseParams.from_lambda(1.0, 1.0)
water = Species("H2O", 18.0)

print("swap, 100 solutes in a 10x10x10 lattice")
for mass in [18.0, 23.0, 40.0]:
    box = MediumBox(2.0, 0.2, fluid=water, solutes=(Species("X", mass),), seed=0)
    sup = generate_swap_scenario(box, 100)
    g = gamma_exact(sup, p)
    print(f"  solute {mass:4.0f} Da: Gamma/lambda = {g.gamma_rate:10.4g}  (clamped: {g.clamped})")

print("\ndisplacement: all molecules move, 30 tagged")
tag = Species("X", 18.0)
dense = generate_displacement_scenario(MediumBox(3.0, 0.2, fluid=water, solutes=(tag,)), 30, jitter=0.025)
sparse = generate_displacement_scenario(MediumBox(30.0, 6.0, fluid=water, solutes=(tag,)), 10, offset=(3, 3, 3))
for name, sup in [("dense", dense), ("sparse", sparse)]:
    g_all = gamma_accelerated(sup, p).gamma_rate
    g_tag = gamma_exact(tagged_only(sup, water), p).gamma_rate
    print(f"  {name:6s} max mismatch {cross_mismatch(sup).max():5.3f} r_C  "
          f"Gamma_all/Gamma_tagged = {g_all / g_tag:.4f}")

print("\neffective-mass factors")
for rho in PROTEIN_DENSITY_RANGE:
    print(f"  protein {rho:.0f} kg/m^3 in cytoplasm: f = {effective_mass_factor(rho, CYTOPLASM_DENSITY):.3f}")
rho_na = sodium_effective_density()
print(f"  hydrated Na+ ({rho_na:.0f} kg/m^3) in water: f = {effective_mass_factor(rho_na, WATER_DENSITY):.3f}")
