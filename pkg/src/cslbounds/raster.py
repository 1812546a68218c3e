"""Smeared mass densities on a regular grid.

Shared by the field-quadrature rate and the stochastic simulator so both see
the same discrete densities.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from cslbounds.model import CollapseParams, Configuration, InvalidParameterError

DEFAULT_MAX_CELLS = 40_000_000


class GridError(InvalidParameterError):
    """Grid too coarse, too small, or over the memory budget."""


@dataclass(frozen=True)
class Grid:
    """Raster specification in units of ``r_C``.

    ``h`` is the cell size and ``padding`` the margin added around the
    particles' bounding box, both as multiples of ``r_C``.
    """

    h: float = 0.25
    padding: float = 6.0
    max_cells: int = DEFAULT_MAX_CELLS

    def __post_init__(self):
        if not self.h > 0:
            raise GridError(f"cell size must be positive, got {self.h}")
        if self.h > 0.5:
            raise GridError(f"cell size {self.h} r_C is coarser than r_C/2")
        if self.padding < 6.0:
            raise GridError(f"padding {self.padding} r_C is below 6 r_C")


@dataclass(frozen=True)
class GridAxes:
    origin: np.ndarray  # lower corner, cm
    h: float  # cell size, cm
    shape: tuple

    @property
    def cell_volume(self) -> float:
        return self.h ** 3

    @property
    def n_cells(self) -> int:
        return int(np.prod(self.shape))

    def centers(self, axis: int) -> np.ndarray:
        return self.origin[axis] + (np.arange(self.shape[axis]) + 0.5) * self.h


def grid_axes(configs, r_C: float, grid: Grid, n_fields: int | None = None) -> GridAxes:
    pts = [c.positions for c in configs if len(c)]
    if pts:
        allp = np.vstack(pts)
        lo, hi = allp.min(axis=0), allp.max(axis=0)
    else:
        lo = hi = np.zeros(3)
    h = grid.h * r_C
    pad = grid.padding * r_C
    lo = lo - pad
    shape = tuple(int(n) for n in np.ceil((hi + pad - lo) / h))
    axes = GridAxes(origin=lo, h=h, shape=shape)
    need = axes.n_cells * (n_fields if n_fields is not None else len(configs))
    if need > grid.max_cells:
        raise GridError(
            f"memory budget exceeded: need {need} cells, budget allows {grid.max_cells}"
        )
    return axes


def _axis_profile(coord: np.ndarray, centers: np.ndarray, r_C: float) -> np.ndarray:
    d = centers[None, :] - coord[:, None]
    return np.exp(-(d * d) / (2.0 * r_C ** 2)) / np.sqrt(2.0 * np.pi * r_C ** 2)


def rasterize(config: Configuration, axes: GridAxes, r_C: float, chunk: int = 256) -> np.ndarray:
    """Smeared density sum_i (m_i/m_N) g(x - x_i) at every cell centre.

    The Gaussian factorizes per axis, so each chunk of particles costs one
    matrix product instead of a full 3-D evaluation per particle.
    """
    nx, ny, nz = axes.shape
    mu = np.zeros((nx * ny, nz))
    if not len(config):
        return mu.reshape(axes.shape)
    w = config.weights
    pos = config.positions
    cx, cy, cz = (axes.centers(k) for k in range(3))
    for s in range(0, len(config), chunk):
        sl = slice(s, s + chunk)
        gx = _axis_profile(pos[sl, 0], cx, r_C) * w[sl, None]
        gy = _axis_profile(pos[sl, 1], cy, r_C)
        gz = _axis_profile(pos[sl, 2], cz, r_C)
        gxy = (gx[:, :, None] * gy[:, None, :]).reshape(len(gx), nx * ny)
        mu += gxy.T @ gz
    return mu.reshape(axes.shape)


@dataclass(frozen=True)
class DensityProfiles:
    """Rasterized smeared densities ``mu[k]`` for K basis configurations."""

    axes: GridAxes
    mu: np.ndarray  # (K, nx, ny, nz), cm^-3 in nucleon units
    r_C: float

    @property
    def K(self) -> int:
        return self.mu.shape[0]

    def integrals(self) -> np.ndarray:
        """Midpoint-rule integral of each profile (total mass / m_N)."""
        return self.mu.reshape(self.K, -1).sum(axis=1) * self.axes.cell_volume

    def gram(self) -> np.ndarray:
        """Overlap matrix ``h^3 sum_c mu_k mu_l`` (units cm^-3)."""
        flat = self.mu.reshape(self.K, -1)
        return (flat @ flat.T) * self.axes.cell_volume

    def decay_rate(self, params: CollapseParams, k: int = 0, l: int = 1) -> float:
        """(gamma/2) h^3 sum_c (mu_k - mu_l)^2."""
        diff = self.mu[k] - self.mu[l]
        return 0.5 * params.gamma * float(np.sum(diff * diff)) * self.axes.cell_volume


def density_profiles(configs, r_C: float, grid: Grid = Grid()) -> DensityProfiles:
    axes = grid_axes(configs, r_C, grid)
    mu = np.stack([rasterize(c, axes, r_C) for c in configs])
    return DensityProfiles(axes=axes, mu=mu, r_C=r_C)
