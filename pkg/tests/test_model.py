import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from cslbounds import (
    NUCLEON,
    CollapseParams,
    Configuration,
    InvalidParameterError,
    Species,
    Superposition,
    gamma_from_lambda,
    lambda_from_gamma,
    pair_kernel_G,
    smearing_g,
)


def test_lambda_gamma_relation():
    r_C = 1e-5
    lam = 1e-16
    gamma = gamma_from_lambda(lam, r_C)
    assert gamma == pytest.approx(lam * 8 * math.pi ** 1.5 * r_C ** 3, rel=1e-15)
    assert lambda_from_gamma(gamma, r_C) == pytest.approx(lam, rel=1e-15)


@given(
    lam=st.floats(1e-20, 1e5),
    r_C=st.floats(1e-8, 1e2),
)
def test_lambda_roundtrip(lam, r_C):
    p = CollapseParams.from_lambda(lam, r_C)
    assert p.lam == pytest.approx(lam, rel=1e-12)
    assert p.lambda_() == p.lam


@pytest.mark.parametrize("r_C", [0.0, -1.0, float("nan"), float("inf")])
def test_bad_r_C(r_C):
    with pytest.raises(InvalidParameterError):
        CollapseParams(1.0, r_C)


def test_negative_gamma_rejected():
    with pytest.raises(InvalidParameterError):
        CollapseParams(-1.0, 1.0)
    with pytest.raises(InvalidParameterError):
        gamma_from_lambda(-1.0, 1.0)


@pytest.mark.parametrize("r_C", [1e-5, 0.7, 3.0])
def test_smearing_is_normalized(r_C):
    # radial quadrature, independent of the Cartesian implementation
    f = lambda r: 4 * math.pi * r * r * smearing_g([r, 0, 0], r_C)  # noqa: E731
    total, _ = integrate.quad(f, 0, 20 * r_C)
    assert total == pytest.approx(1.0, rel=1e-10)


def test_G_is_self_convolution():
    # g factorizes per axis, so the 3-D convolution is a product of 1-D ones
    r_C = 0.8
    x = np.array([0.3, -1.1, 0.5])
    g1 = lambda u: math.exp(-u * u / (2 * r_C ** 2)) / math.sqrt(2 * math.pi * r_C ** 2)  # noqa: E731
    conv = 1.0
    for xi in x:
        conv *= integrate.quad(lambda u: g1(u) * g1(xi - u), -15, 15)[0]
    assert pair_kernel_G(x, r_C) == pytest.approx(conv, rel=1e-10)


def test_G_zero_is_lambda_over_gamma():
    p = CollapseParams.from_lambda(2.5e-9, 1e-5)
    assert pair_kernel_G(np.zeros(3), p.r_C) == pytest.approx(p.lam / p.gamma, rel=1e-14)


def test_kernels_broadcast():
    x = np.zeros((4, 5, 3))
    assert smearing_g(x, 1.0).shape == (4, 5)
    assert pair_kernel_G(x, 1.0).shape == (4, 5)


def test_species_mass_must_be_positive():
    with pytest.raises(InvalidParameterError):
        Species("bad", 0.0)


def test_configuration_basics():
    c = Configuration.from_particles([(NUCLEON, (0, 0, 0)), (Species("O", 16.0), (1, 2, 3))])
    assert len(c) == 2
    assert c.total_mass == 17.0
    assert c.mass_multiset() == {1.0: 1, 16.0: 1}
    with pytest.raises(ValueError):
        c.positions[0, 0] = 1.0
    assert c == Configuration.from_particles([(NUCLEON, (0, 0, 0)), (Species("O", 16.0), (1, 2, 3))])
    assert c != c.translated([1, 0, 0])
    assert c.permuted([1, 0]).species[0].mass == 16.0


def test_configuration_validation():
    with pytest.raises(ValueError):
        Configuration((NUCLEON,), np.zeros((2, 3)))
    with pytest.raises(InvalidParameterError):
        Configuration.uniform(NUCLEON, [[0, 0, np.nan]])
    assert len(Configuration.empty()) == 0
    assert len(Configuration.from_particles([])) == 0


def test_rotation_preserves_distances():
    rng = np.random.default_rng(0)
    c = Configuration.uniform(NUCLEON, rng.normal(size=(5, 3)))
    q, _ = np.linalg.qr(rng.normal(size=(3, 3)))
    d0 = np.linalg.norm(c.positions[0] - c.positions[1])
    r = c.rotated(q)
    assert np.linalg.norm(r.positions[0] - r.positions[1]) == pytest.approx(d0)


def test_superposition_normalization():
    a = Configuration.uniform(NUCLEON, [[0, 0, 0]])
    Superposition(a, a, 0.6, 0.8j)
    with pytest.raises(InvalidParameterError):
        Superposition(a, a, 0.6, 0.7)
    s = Superposition.with_weight(a, a, 0.3)
    assert abs(s.amp_a) ** 2 == pytest.approx(0.3)
    sw = s.swapped()
    assert sw.amp_a == s.amp_b and sw.comp_a is s.comp_b


@settings(max_examples=25)
@given(p=st.floats(0.0, 1.0))
def test_with_weight_is_normalized(p):
    a = Configuration.uniform(NUCLEON, [[0, 0, 0]])
    s = Superposition.with_weight(a, a, p)
    assert abs(s.amp_a) ** 2 + abs(s.amp_b) ** 2 == pytest.approx(1.0)
