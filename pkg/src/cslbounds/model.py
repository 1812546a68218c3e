"""Parameters, particle configurations and the two Gaussian kernels.

Conventions
-----------
Lengths are in cm, masses in daltons and rates in 1/s. The reference
nucleon mass ``m_N`` is exactly 1 Da, so a particle of mass ``m`` enters
every formula with weight ``m / m_N = m``.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

PI32 = np.pi ** 1.5

#: Nucleon mass in daltons; proton/neutron difference neglected.
M_NUCLEON = 1.0


class InvalidParameterError(ValueError):
    """A physical parameter is outside its allowed range."""


def _check_rc(r_C: float) -> float:
    r_C = float(r_C)
    if not np.isfinite(r_C) or r_C <= 0:
        raise InvalidParameterError(f"r_C must be positive and finite, got {r_C!r}")
    return r_C


@dataclass(frozen=True)
class CollapseParams:
    """CSL coupling ``gamma`` (cm^3/s) and correlation length ``r_C`` (cm).

    Use :meth:`from_lambda` to build from the per-nucleon collapse rate.
    """

    gamma: float
    r_C: float
    m_N: float = M_NUCLEON

    def __post_init__(self):
        _check_rc(self.r_C)
        if not np.isfinite(self.gamma) or self.gamma < 0:
            raise InvalidParameterError(f"gamma must be >= 0, got {self.gamma!r}")
        if self.m_N != M_NUCLEON:
            raise InvalidParameterError("m_N is fixed at 1 dalton")

    @classmethod
    def from_lambda(cls, lam: float, r_C: float) -> "CollapseParams":
        return cls(gamma=gamma_from_lambda(lam, r_C), r_C=r_C)

    @property
    def lam(self) -> float:
        """Per-nucleon collapse rate in 1/s."""
        return lambda_from_gamma(self.gamma, self.r_C)

    def lambda_(self) -> float:
        return self.lam


def lambda_from_gamma(gamma: float, r_C: float) -> float:
    """lambda = gamma / (8 pi^{3/2} r_C^3)."""
    r_C = _check_rc(r_C)
    return float(gamma) / (8.0 * PI32 * r_C ** 3)


def gamma_from_lambda(lam: float, r_C: float) -> float:
    r_C = _check_rc(r_C)
    if lam < 0:
        raise InvalidParameterError(f"lambda must be >= 0, got {lam!r}")
    return float(lam) * 8.0 * PI32 * r_C ** 3


def smearing_g(x, r_C: float):
    """Normalized Gaussian smearing function.

    Parameters
    ----------
    x : array_like, shape (..., 3)
        Displacement vector(s) in cm.
    r_C : float
        Correlation length in cm.

    Returns
    -------
    float or ndarray
        ``(2 pi r_C^2)^{-3/2} exp(-|x|^2 / (2 r_C^2))`` in cm^-3.
    """
    r_C = _check_rc(r_C)
    x = np.asarray(x, dtype=float)
    r2 = np.sum(x * x, axis=-1)
    return (2.0 * np.pi * r_C ** 2) ** -1.5 * np.exp(-r2 / (2.0 * r_C ** 2))


def pair_kernel_G(x, r_C: float):
    """Self-convolution of :func:`smearing_g`; the kernel of the decay rate.

    ``G(x) = (4 pi r_C^2)^{-3/2} exp(-|x|^2 / (4 r_C^2))``. Note
    ``G(0) = lambda / gamma`` for any parameters.
    """
    r_C = _check_rc(r_C)
    x = np.asarray(x, dtype=float)
    r2 = np.sum(x * x, axis=-1)
    return (4.0 * np.pi * r_C ** 2) ** -1.5 * np.exp(-r2 / (4.0 * r_C ** 2))


@dataclass(frozen=True)
class Species:
    name: str
    mass: float  # daltons

    def __post_init__(self):
        if not (np.isfinite(self.mass) and self.mass > 0):
            raise InvalidParameterError(f"species {self.name!r}: mass must be > 0")


NUCLEON = Species("N", 1.0)


@dataclass(frozen=True, eq=False)
class Configuration:
    """An ordered list of point particles.

    Stored column-wise: ``species`` is a tuple of :class:`Species` and
    ``positions`` an ``(n, 3)`` float64 array (cm), made read-only.
    """

    species: tuple
    positions: np.ndarray

    def __post_init__(self):
        pos = np.array(self.positions, dtype=np.float64).reshape(-1, 3)
        if len(pos) != len(self.species):
            raise ValueError("species and positions differ in length")
        if not np.all(np.isfinite(pos)):
            raise InvalidParameterError("positions must be finite")
        pos.setflags(write=False)
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "species", tuple(self.species))

    @classmethod
    def from_particles(cls, particles: Iterable[tuple]) -> "Configuration":
        """Build from ``(species, (x, y, z))`` pairs."""
        particles = list(particles)
        if not particles:
            return cls.empty()
        sp, pos = zip(*particles)
        return cls(sp, np.array(pos, dtype=float))

    @classmethod
    def uniform(cls, species: Species, positions) -> "Configuration":
        pos = np.asarray(positions, dtype=float).reshape(-1, 3)
        return cls((species,) * len(pos), pos)

    @classmethod
    def empty(cls) -> "Configuration":
        return cls((), np.zeros((0, 3)))

    def __len__(self):
        return len(self.species)

    def __eq__(self, other):
        if not isinstance(other, Configuration):
            return NotImplemented
        return self.species == other.species and np.array_equal(self.positions, other.positions)

    __hash__ = None

    @property
    def weights(self) -> np.ndarray:
        """Masses in units of the nucleon mass."""
        return np.array([s.mass / M_NUCLEON for s in self.species], dtype=float)

    @property
    def total_mass(self) -> float:
        return float(self.weights.sum())

    def mass_multiset(self) -> Counter:
        return Counter(s.mass for s in self.species)

    def translated(self, shift) -> "Configuration":
        return Configuration(self.species, self.positions + np.asarray(shift, dtype=float))

    def rotated(self, rotation) -> "Configuration":
        return Configuration(self.species, self.positions @ np.asarray(rotation, dtype=float).T)

    def permuted(self, perm: Sequence[int]) -> "Configuration":
        perm = np.asarray(perm)
        return Configuration(tuple(self.species[i] for i in perm), self.positions[perm])


@dataclass(frozen=True)
class Superposition:
    """Two-branch state ``amp_a |comp_a> + amp_b |comp_b>``."""

    comp_a: Configuration
    comp_b: Configuration
    amp_a: complex = 2 ** -0.5
    amp_b: complex = 2 ** -0.5
    norm_tol: float = field(default=1e-12, repr=False)

    def __post_init__(self):
        norm = abs(self.amp_a) ** 2 + abs(self.amp_b) ** 2
        if abs(norm - 1.0) > self.norm_tol:
            raise InvalidParameterError(f"|amp_a|^2 + |amp_b|^2 = {norm!r}, expected 1")

    @classmethod
    def with_weight(cls, comp_a, comp_b, p_a: float) -> "Superposition":
        """Real amplitudes with ``|amp_a|^2 = p_a``."""
        return cls(comp_a, comp_b, complex(np.sqrt(p_a)), complex(np.sqrt(1.0 - p_a)))

    def swapped(self) -> "Superposition":
        return Superposition(self.comp_b, self.comp_a, self.amp_b, self.amp_a)

    def transformed(self, rotation=None, shift=None) -> "Superposition":
        """Apply the same rigid motion to both components."""
        a, b = self.comp_a, self.comp_b
        if rotation is not None:
            a, b = a.rotated(rotation), b.rotated(rotation)
        if shift is not None:
            a, b = a.translated(shift), b.translated(shift)
        return Superposition(a, b, self.amp_a, self.amp_b)
