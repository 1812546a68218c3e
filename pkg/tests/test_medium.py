import numpy as np
import pytest

from cslbounds import CollapseParams, InvalidParameterError, Species, gamma_exact
from cslbounds.medium import (
    CYTOPLASM_DENSITY,
    PROTEIN_DENSITY_RANGE,
    SODIUM,
    SODIUM_FACTOR,
    WATER,
    WATER_DENSITY,
    EffectiveMassModel,
    MediumBox,
    cross_mismatch,
    effective_mass_factor,
    generate_displacement_scenario,
    generate_swap_scenario,
    sodium_effective_density,
    tagged_only,
)

UNIT = CollapseParams.from_lambda(1.0, 1.0)


def test_effective_mass_factor():
    assert effective_mass_factor(1300.0, 1100.0) == pytest.approx(2.0 / 13.0)
    assert effective_mass_factor(1000.0, 0.0) == 1.0
    # lighter than the displaced fluid: negative, only the square matters
    assert effective_mass_factor(900.0, 1000.0) < 0
    with pytest.raises(InvalidParameterError):
        effective_mass_factor(0.0, 1000.0)
    with pytest.raises(InvalidParameterError):
        effective_mass_factor(1000.0, -1.0)


def test_protein_factor_range_in_cytoplasm():
    lo, hi = (effective_mass_factor(r, CYTOPLASM_DENSITY) for r in PROTEIN_DENSITY_RANGE)
    assert 0.08 < lo < hi < 0.22


def test_sodium_effective_density_and_factor():
    rho = sodium_effective_density()
    assert rho == pytest.approx((227 / 219) ** 3 * 968)
    f = effective_mass_factor(rho, WATER_DENSITY)
    assert f == pytest.approx(0.0751, abs=1e-4)
    assert round(f, 2) == SODIUM_FACTOR
    assert EffectiveMassModel(rho, WATER_DENSITY).effective_mass(23.0) == pytest.approx(23 * f)


def test_box_sites():
    box = MediumBox(side=1.0, spacing=0.25)
    s = box.sites(2.0)
    assert box.n_per_axis == 4 and s.shape == (64, 3)
    assert s.min() == pytest.approx(0.25) and s.max() == pytest.approx(1.75)
    with pytest.raises(InvalidParameterError):
        MediumBox(side=0.0)
    with pytest.raises(InvalidParameterError):
        MediumBox(side=1.0, solutes=())


def test_swap_positions_shared_and_labels_counted():
    box = MediumBox(side=2.0, spacing=0.2, seed=4)
    sup = generate_swap_scenario(box, 40)
    assert np.array_equal(sup.comp_a.positions, sup.comp_b.positions)
    for c in (sup.comp_a, sup.comp_b):
        assert sum(s == SODIUM for s in c.species) == 40
    # A is concentrated at the low-x edge
    xa = sup.comp_a.positions[[s == SODIUM for s in sup.comp_a.species], 0]
    xb = sup.comp_b.positions[[s == SODIUM for s in sup.comp_b.species], 0]
    assert xa.mean() < xb.mean()


def test_swap_deterministic_by_seed():
    box = MediumBox(side=2.0, spacing=0.2, seed=9)
    a, b = generate_swap_scenario(box, 50), generate_swap_scenario(box, 50)
    assert a.comp_b == b.comp_b
    c = generate_swap_scenario(MediumBox(side=2.0, spacing=0.2, seed=10), 50)
    assert c.comp_b != a.comp_b


def test_swap_equal_masses_no_collapse():
    box = MediumBox(side=2.0, spacing=0.2, solutes=(Species("X", WATER.mass),))
    sup = generate_swap_scenario(box, 100)
    assert gamma_exact(sup, UNIT).gamma_rate <= 1e-10 * sup.comp_a.total_mass ** 2


def test_swap_unequal_masses_linear_scaling():
    box = MediumBox(side=45.0, spacing=3.0, min_solute_separation=6.0)
    sup = generate_swap_scenario(box, 100)
    # each tagged site swaps 23 for 18 daltons, isolated: (23 - 18)^2 per site, both branches
    g = gamma_exact(sup, UNIT).gamma_rate
    assert g / (25 * 100) == pytest.approx(1.0, rel=2e-3)


def test_min_separation_enforced():
    box = MediumBox(side=30.0, spacing=1.0, min_solute_separation=5.0, seed=1)
    sup = generate_swap_scenario(box, 20)
    for c in (sup.comp_a, sup.comp_b):
        p = c.positions[[s == SODIUM for s in c.species]]
        d = np.linalg.norm(p[:, None] - p[None], axis=-1)
        assert d[np.triu_indices(len(p), 1)].min() >= 5.0
    with pytest.raises(InvalidParameterError, match="placed"):
        generate_swap_scenario(MediumBox(side=6.0, spacing=1.0, min_solute_separation=5.0), 20)


def test_box_too_small():
    with pytest.raises(InvalidParameterError):
        generate_swap_scenario(MediumBox(side=1.0, spacing=0.5), 10)
    with pytest.raises(InvalidParameterError):
        generate_displacement_scenario(MediumBox(side=1.0, spacing=0.5), 10)


def test_displacement_identity_case():
    box = MediumBox(side=2.0, spacing=0.4, seed=3)
    sup = generate_displacement_scenario(box, 0, jitter=0.1, redraw_seed=3)
    assert sup.comp_a == sup.comp_b
    assert gamma_exact(sup, UNIT).gamma_rate == 0.0


def test_displacement_jitter_and_offset():
    box = MediumBox(side=2.0, spacing=0.4, seed=3)
    sup = generate_displacement_scenario(box, 5, r_C=2.0, jitter=0.05, offset=(1, 0, 0))
    shift = sup.comp_b.positions - sup.comp_a.positions
    assert np.allclose(shift[:, 0], 2.0, atol=0.2 + 1e-12)
    assert np.all(np.abs(shift[:, 1:]) <= 0.2 + 1e-12)


def test_tagged_only_and_mismatch():
    box = MediumBox(side=2.0, spacing=0.4, seed=3)
    sup = generate_displacement_scenario(box, 5, jitter=0.02)
    t = tagged_only(sup, WATER)
    assert len(t.comp_a) == len(t.comp_b) == 5
    assert cross_mismatch(sup).max() <= 2 * 0.02 * np.sqrt(3) + 1e-12
