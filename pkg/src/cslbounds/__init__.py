"""Decoherence rates of mass-proportional CSL collapse models.

Units throughout: lengths in cm, masses in daltons (one nucleon = 1 Da),
rates in 1/s, densities of bulk matter in kg/m^3.
"""

from cslbounds.model import (
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
from cslbounds.rates import (
    ClusterSpec,
    DecayRate,
    Grid,
    Regime,
    RegimeReport,
    SpeciesMismatchError,
    cluster_rate,
    gamma_accelerated,
    gamma_exact,
    gamma_field,
    mass_cluster_rate,
    regime_classify,
)

__version__ = "0.1.0"

__all__ = [
    "NUCLEON",
    "CollapseParams",
    "Configuration",
    "InvalidParameterError",
    "Species",
    "Superposition",
    "gamma_from_lambda",
    "lambda_from_gamma",
    "pair_kernel_G",
    "smearing_g",
    "ClusterSpec",
    "DecayRate",
    "Grid",
    "Regime",
    "RegimeReport",
    "SpeciesMismatchError",
    "cluster_rate",
    "gamma_accelerated",
    "gamma_exact",
    "gamma_field",
    "mass_cluster_rate",
    "regime_classify",
]
