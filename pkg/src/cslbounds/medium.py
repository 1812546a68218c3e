"""Solutes in a background fluid.

Two pieces: the displaced-volume effective mass ``m' = m - rho V`` expressed
as a density ratio, and lattice generators for idealized swap and
displacement superpositions in a fluid.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from cslbounds.model import Configuration, InvalidParameterError, Species, Superposition

# Bulk densities, kg/m^3.
WATER_DENSITY = 997.0
SODIUM_METAL_DENSITY = 968.0
CYTOPLASM_DENSITY = 1100.0
PROTEIN_DENSITY_RANGE = (1200.0, 1400.0)

# Radii, pm. The solvated radius appears as 218 in the text and 219 in the ratio.
SODIUM_ATOM_RADIUS = 227.0
SODIUM_SOLVATED_RADIUS = 219.0
SODIUM_SOLVATED_RADIUS_TEXT = 218.0

# Effective-mass factors as quoted for the rod cell.
PROTEIN_FACTOR = 0.3
SODIUM_FACTOR = 0.08

WATER = Species("H2O", 18.0)
SODIUM = Species("Na", 23.0)


def effective_mass_factor(particle_density: float, fluid_density: float) -> float:
    """Return m'/m = 1 - rho_f / rho_p.

    Negative when the solute is lighter than the fluid it displaces; the
    collapse rate depends only on the square.
    """
    if not particle_density > 0:
        raise InvalidParameterError(f"particle density must be > 0, got {particle_density}")
    if fluid_density < 0:
        raise InvalidParameterError(f"fluid density must be >= 0, got {fluid_density}")
    return 1.0 - fluid_density / particle_density


def sodium_effective_density(
    r_solvated: float = SODIUM_SOLVATED_RADIUS,
    r_atom: float = SODIUM_ATOM_RADIUS,
    rho_metal: float = SODIUM_METAL_DENSITY,
) -> float:
    """Scale the metal density by (r_atom / r_solvated)^3."""
    if not (r_solvated > 0 and r_atom > 0):
        raise InvalidParameterError("radii must be positive")
    return (r_atom / r_solvated) ** 3 * rho_metal


@dataclass(frozen=True)
class EffectiveMassModel:
    particle_density: float
    fluid_density: float

    @property
    def factor(self) -> float:
        return effective_mass_factor(self.particle_density, self.fluid_density)

    def effective_mass(self, mass: float) -> float:
        return self.factor * mass


@dataclass(frozen=True)
class MediumBox:
    """Cubic lattice box. ``side`` and ``spacing`` are in units of r_C.

    ``min_solute_separation`` (units of r_C) keeps tagged sites apart within
    each branch and, in the swap scenario, away from the other branch's
    tagged sites. Zero disables the constraint.
    """

    side: float
    spacing: float = 0.2
    fluid: Species = WATER
    solutes: tuple = (SODIUM,)
    seed: int = 0
    min_solute_separation: float = 0.0

    def __post_init__(self):
        if not (self.side > 0 and self.spacing > 0):
            raise InvalidParameterError("side and spacing must be positive")
        if not self.solutes:
            raise InvalidParameterError("need at least one solute species")
        object.__setattr__(self, "solutes", tuple(self.solutes))

    @property
    def n_per_axis(self) -> int:
        return int(np.floor(self.side / self.spacing + 1e-9))

    def sites(self, r_C: float) -> np.ndarray:
        """Lattice sites in cm, ordered left to right (x, then y, then z)."""
        n = self.n_per_axis
        g = (np.arange(n) + 0.5) * self.spacing * r_C
        x, y, z = np.meshgrid(g, g, g, indexing="ij")
        return np.column_stack([x.ravel(), y.ravel(), z.ravel()])

    def rng(self, stream: int) -> np.random.Generator:
        return np.random.default_rng([self.seed, stream])

    def solute(self, k: int) -> Species:
        return self.solutes[k % len(self.solutes)]


def _pick_sites(candidates, sites, n, min_sep, avoid=None):
    """Greedily take ``n`` sites from ``candidates`` (an ordering).

    A site is accepted if it is at least ``min_sep`` from every accepted site
    and from every point in ``avoid``.
    """
    if n == 0:
        return np.zeros(0, dtype=int)
    if min_sep <= 0:
        if len(candidates) < n:
            raise InvalidParameterError(f"box has {len(candidates)} sites, need {n}")
        return np.asarray(candidates[:n], dtype=int)
    avoid_tree = cKDTree(avoid) if avoid is not None and len(avoid) else None
    chosen: list[int] = []
    for idx in candidates:
        p = sites[idx]
        if avoid_tree is not None and avoid_tree.query(p)[0] < min_sep:
            continue
        if chosen and np.min(np.linalg.norm(sites[chosen] - p, axis=1)) < min_sep:
            continue
        chosen.append(int(idx))
        if len(chosen) == n:
            return np.array(chosen, dtype=int)
    raise InvalidParameterError(
        f"box too small: placed {len(chosen)} of {n} tagged particles "
        f"with separation {min_sep} r_C"
    )


def _labels(box: MediumBox, n_sites: int, tagged: np.ndarray) -> list:
    species = [box.fluid] * n_sites
    for k, idx in enumerate(tagged):
        species[idx] = box.solute(k)
    return species


def generate_swap_scenario(box: MediumBox, n_solutes: int, r_C: float = 1.0) -> Superposition:
    """Ions concentrated at the left edge versus diffused through the fluid.

    Both branches occupy exactly the same lattice sites; only which sites
    carry solute labels differs. With equal solute and fluid masses the two
    smeared mass densities coincide.
    """
    sites = box.sites(r_C)
    if n_solutes < 0:
        raise InvalidParameterError("n_solutes must be >= 0")
    if len(sites) < max(n_solutes, 1):
        raise InvalidParameterError(f"box too small: {len(sites)} sites for {n_solutes} solutes")
    sep = box.min_solute_separation * r_C
    left = np.arange(len(sites))
    tag_a = _pick_sites(left, sites, n_solutes, sep)
    if sep > 0:
        order = box.rng(1).permutation(len(sites))
        tag_b = _pick_sites(order, sites, n_solutes, sep, avoid=sites[tag_a])
    else:
        tag_b = box.rng(1).choice(len(sites), size=n_solutes, replace=False)
    comp_a = Configuration(_labels(box, len(sites), tag_a), sites)
    comp_b = Configuration(_labels(box, len(sites), tag_b), sites)
    return Superposition(comp_a, comp_b)


def generate_displacement_scenario(
    box: MediumBox,
    n_tagged: int,
    r_C: float = 1.0,
    jitter: float = 0.0,
    offset=(0.0, 0.0, 0.0),
    redraw_seed: int | None = None,
) -> Superposition:
    """Tagged molecules concentrated at the left versus diffused, all moved.

    Branch A puts the tagged species on the leftmost sites, fluid elsewhere,
    each molecule displaced by a uniform jitter of half-width ``jitter``
    (units of r_C). Branch B redraws every position: the lattice is shifted
    by ``offset`` (units of r_C), jittered with an independent stream
    seeded by ``redraw_seed`` (default ``box.seed + 1``), and the tagged
    labels are spread over random sites.

    With ``n_tagged = 0``, zero offset and ``redraw_seed == box.seed`` both
    branches are identical.
    """
    sites = box.sites(r_C)
    if n_tagged < 0 or len(sites) < max(n_tagged, 1):
        raise InvalidParameterError(f"box too small: {len(sites)} sites for {n_tagged} tagged")
    sep = box.min_solute_separation * r_C
    redraw_seed = box.seed + 1 if redraw_seed is None else redraw_seed
    rng_a = np.random.default_rng([box.seed, 2])
    rng_b = np.random.default_rng([redraw_seed, 2])
    pos_a = sites + jitter * r_C * rng_a.uniform(-1, 1, sites.shape)
    pos_b = sites + np.asarray(offset, float) * r_C + jitter * r_C * rng_b.uniform(-1, 1, sites.shape)
    tag_a = _pick_sites(np.arange(len(sites)), sites, n_tagged, sep)
    tag_b = _pick_sites(box.rng(3).permutation(len(sites)), sites, n_tagged, sep)
    comp_a = Configuration(_labels(box, len(sites), tag_a), pos_a)
    comp_b = Configuration(_labels(box, len(sites), tag_b), pos_b)
    return Superposition(comp_a, comp_b)


def tagged_only(sup: Superposition, fluid: Species) -> Superposition:
    """Drop the fluid species from both branches."""

    def keep(c: Configuration) -> Configuration:
        mask = [s != fluid for s in c.species]
        return Configuration([s for s, m in zip(c.species, mask) if m], c.positions[mask])

    return Superposition(keep(sup.comp_a), keep(sup.comp_b), sup.amp_a, sup.amp_b)


def cross_mismatch(sup: Superposition) -> np.ndarray:
    """Distance from each B particle to the nearest A particle (cm)."""
    if not len(sup.comp_a):
        return np.zeros(0)
    return cKDTree(sup.comp_a.positions).query(sup.comp_b.positions)[0]
