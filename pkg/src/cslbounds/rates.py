"""Off-diagonal decay rate of a two-branch superposition.

With the Hamiltonian switched off, the coherence between two particle
configurations A and B decays as exp(-Gamma t) with

    Gamma = (gamma/2) sum_ij w_i w_j [G(a_i-a_j) + G(b_i-b_j) - 2 G(a_i-b_j)]
          = (gamma/2) \\int (mu_A - mu_B)^2 d^3x

where ``w = m/m_N`` and ``mu`` is the smeared mass density. Four routes are
provided: the exact pair sum, a cell-list cutoff sum, grid quadrature of the
density difference, and the closed-form cluster limits.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.spatial.distance import cdist

from cslbounds.model import (
    M_NUCLEON,
    CollapseParams,
    Configuration,
    InvalidParameterError,
    Superposition,
)
from cslbounds.raster import Grid, density_profiles

# Tiny negative sums are cancellation noise; anything below
# -NEGATIVE_TOL * scale is a bug and raises.
NEGATIVE_TOL = 1e-10

# Regime thresholds in units of r_C.
CLOSE = 0.1
FAR = 3.0

# e^{-c^2/4} for c < 3 exceeds 0.1, too weak to call an approximation.
MIN_CUTOFF = 3.0
DEFAULT_CUTOFF = 6.0


class SpeciesMismatchError(InvalidParameterError):
    """The two branches do not hold the same particles."""

    def __init__(self, multiset_a, multiset_b):
        self.multiset_a = dict(multiset_a)
        self.multiset_b = dict(multiset_b)
        super().__init__(
            "components hold different mass multisets: "
            f"A={sorted(self.multiset_a.items())} B={sorted(self.multiset_b.items())}"
        )


class NegativeRateError(ArithmeticError):
    pass


@dataclass(frozen=True)
class DecayRate:
    gamma_rate: float
    method: str
    clamped: bool = False
    raw: Optional[float] = None
    error_bound: Optional[float] = None

    def __float__(self):
        return self.gamma_rate

    def relative_to(self, params: CollapseParams) -> float:
        """Gamma in units of lambda."""
        return self.gamma_rate / params.lam


def _rate_scale(sup: Superposition, params: CollapseParams) -> float:
    w = max(sup.comp_a.total_mass, sup.comp_b.total_mass) / M_NUCLEON
    return params.lam * max(w, 1.0) ** 2


def _finish(raw: float, method: str, sup, params, error_bound=None) -> DecayRate:
    if raw >= 0:
        return DecayRate(raw, method, raw=raw, error_bound=error_bound)
    if raw < -NEGATIVE_TOL * _rate_scale(sup, params):
        raise NegativeRateError(f"{method}: Gamma = {raw!r} is negative beyond rounding")
    return DecayRate(0.0, method, clamped=True, raw=raw, error_bound=error_bound)


def check_species(sup: Superposition) -> None:
    ma, mb = sup.comp_a.mass_multiset(), sup.comp_b.mass_multiset()
    if ma != mb:
        raise SpeciesMismatchError(ma, mb)


def _signed_points(sup: Superposition):
    """Stack both branches with weights +w (A) and -w (B).

    Then Gamma = (gamma/2) G(0) sum_ij c_i c_j exp(-r_ij^2 / 4 r_C^2).
    """
    x = np.vstack([sup.comp_a.positions, sup.comp_b.positions])
    c = np.concatenate([sup.comp_a.weights, -sup.comp_b.weights])
    return x, c


def gamma_exact(sup: Superposition, params: CollapseParams, chunk: int = 1024) -> DecayRate:
    """Exact O(N^2) pair sum, mass-weighted by ``m_i m_j / m_N^2``.

    Raises
    ------
    SpeciesMismatchError
        If the branches do not contain the same multiset of masses.
    """
    check_species(sup)
    x, c = _signed_points(sup)
    inv4r2 = 1.0 / (4.0 * params.r_C ** 2)
    total = 0.0
    for s in range(0, len(x), chunk):
        d2 = cdist(x[s:s + chunk], x, "sqeuclidean")
        total += float(c[s:s + chunk] @ (np.exp(-d2 * inv4r2) @ c))
    # gamma/2 * G(0) = lambda/2
    return _finish(0.5 * params.lam * total, "exact-pairwise", sup, params)


def cutoff_error_bound(sup: Superposition, params: CollapseParams, cutoff: float) -> float:
    """Absolute bound on |gamma_accelerated - gamma_exact|.

    Every dropped pair has kernel factor below exp(-c^2/4), so the error is
    at most (lambda/2) exp(-c^2/4) (sum_i |w_i|)^2 over both branches. For
    N unit masses per branch this is 2 lambda N^2 exp(-c^2/4).
    """
    _, c = _signed_points(sup)
    return 0.5 * params.lam * np.exp(-cutoff ** 2 / 4.0) * float(np.abs(c).sum()) ** 2


_OFFSETS = np.array([(i, j, k) for i in (-1, 0, 1) for j in (-1, 0, 1) for k in (-1, 0, 1)])


def _cell_list_sum(
    x: np.ndarray, c: np.ndarray, rc: float, r_C: float, chunk: int, strict: bool
) -> float:
    """sum of c_i c_j exp(-r^2/4r_C^2) over ordered pairs in adjacent cells.

    Every pair closer than ``rc`` is in adjacent cells. With ``strict`` the
    pairs beyond ``rc`` are discarded as well; otherwise they are kept.
    """
    if len(x) == 0:
        return 0.0
    cell = np.floor((x - x.min(axis=0)) / rc).astype(np.int64) + 1
    dims = cell.max(axis=0) + 2
    if float(np.prod(dims.astype(float))) > 2.0 ** 62:
        raise InvalidParameterError("configuration too extended for cell indexing")
    key = np.ravel_multi_index(cell.T, dims)
    order = np.argsort(key, kind="stable")
    ukeys, starts, counts = np.unique(key[order], return_index=True, return_counts=True)
    stride = np.array([dims[1] * dims[2], dims[2], 1])
    rc2 = rc * rc
    inv4r2 = 1.0 / (4.0 * r_C ** 2)
    total = 0.0
    for off in _OFFSETS:
        nkey = key + int(off @ stride)
        pos = np.searchsorted(ukeys, nkey)
        pos_c = np.minimum(pos, len(ukeys) - 1)
        hit = ukeys[pos_c] == nkey
        idx_i = np.nonzero(hit)[0]
        if not len(idx_i):
            continue
        st_all, cnt_all = starts[pos_c[idx_i]], counts[pos_c[idx_i]]
        for s in range(0, len(idx_i), chunk):
            ii, st, cnt = idx_i[s:s + chunk], st_all[s:s + chunk], cnt_all[s:s + chunk]
            n = int(cnt.sum())
            pi = np.repeat(ii, cnt)
            base = np.repeat(st - (np.cumsum(cnt) - cnt), cnt)
            pj = order[base + np.arange(n)]
            d = x[pi] - x[pj]
            d2 = np.einsum("ij,ij->i", d, d)
            if strict:
                keep = d2 <= rc2
                pi, pj, d2 = pi[keep], pj[keep], d2[keep]
            total += float(np.sum(c[pi] * c[pj] * np.exp(-d2 * inv4r2)))
    return total


def gamma_accelerated(
    sup: Superposition,
    params: CollapseParams,
    cutoff: float = DEFAULT_CUTOFF,
    strict: bool = False,
    chunk: int = 4096,
) -> DecayRate:
    """Pair sum over a cell list with cutoff ``cutoff * r_C``.

    Particles are binned into cubic cells of side ``cutoff * r_C`` and only
    the 27 neighbouring cells are searched, so every pair within the cutoff
    is counted. Pairs found in neighbouring cells but beyond the cutoff are
    kept unless ``strict`` is set; they cost nothing extra and shrink the
    error. Either way the dropped tail is bounded by
    :func:`cutoff_error_bound`, returned as ``error_bound``.
    """
    if cutoff < MIN_CUTOFF:
        raise InvalidParameterError(f"cutoff multiplier {cutoff} < {MIN_CUTOFF}")
    check_species(sup)
    x, c = _signed_points(sup)
    total = _cell_list_sum(x, c, cutoff * params.r_C, params.r_C, chunk, strict)
    bound = cutoff_error_bound(sup, params, cutoff)
    return _finish(0.5 * params.lam * total, "accelerated", sup, params, error_bound=bound)


def gamma_field(sup: Superposition, params: CollapseParams, grid: Grid = Grid()) -> DecayRate:
    """Midpoint-rule quadrature of (gamma/2) (mu_A - mu_B)^2 on a regular grid.

    ``grid.h`` and ``grid.padding`` are in units of r_C; h <= 1/2 and
    padding >= 6 are enforced by :class:`Grid`.
    """
    check_species(sup)
    prof = density_profiles([sup.comp_a, sup.comp_b], params.r_C, grid)
    return _finish(prof.decay_rate(params), "field-quadrature", sup, params)


@dataclass(frozen=True)
class ClusterSpec:
    """Groups of tightly bound, mutually distant particles.

    Each entry is ``(unit_mass, n, N)``: N clusters, each holding n units of
    ``unit_mass`` daltons.
    """

    clusters: tuple

    def __post_init__(self):
        cl = tuple((float(m), float(n), float(N)) for m, n, N in self.clusters)
        if not cl:
            raise InvalidParameterError("ClusterSpec needs at least one cluster")
        for m, n, N in cl:
            if not (m > 0 and n > 0 and N > 0):
                raise InvalidParameterError(f"cluster entries must be positive: {(m, n, N)}")
        object.__setattr__(self, "clusters", cl)

    @classmethod
    def of(cls, *clusters) -> "ClusterSpec":
        return cls(tuple(clusters))


def cluster_rate(spec: ClusterSpec, params: CollapseParams) -> DecayRate:
    """lambda * sum_i N_i n_i^2 for unit-mass (nucleon) clusters."""
    if any(m != M_NUCLEON for m, _, _ in spec.clusters):
        raise InvalidParameterError("cluster_rate takes nucleon clusters; use mass_cluster_rate")
    s = sum(N * n * n for _, n, N in spec.clusters)
    return DecayRate(params.lam * s, "cluster-limit")


def mass_cluster_rate(spec: ClusterSpec, params: CollapseParams) -> DecayRate:
    """(lambda/m_N^2) * sum_i N_i m_i^2 n_i^2."""
    s = sum(N * (m / M_NUCLEON) ** 2 * n * n for m, n, N in spec.clusters)
    return DecayRate(params.lam * s, "mass-cluster-limit")


class Regime(str, enum.Enum):
    NEGLIGIBLE = "negligible"
    QUADRATIC = "quadratic"
    HALF_QUADRATIC = "half-quadratic"
    LINEAR = "linear"
    GENERAL = "general"


def _pair_extent(pos: np.ndarray):
    if len(pos) < 2:
        return None, None
    d = cdist(pos, pos)
    iu = np.triu_indices(len(pos), 1)
    return float(d[iu].min()), float(d[iu].max())


@dataclass(frozen=True)
class RegimeReport:
    regime: Regime
    same_index_max: float  # max |a_i - b_i| / r_C
    cross_min: float  # min |a_i - b_j| / r_C
    intra_a: tuple  # (min, max) pair separation in A / r_C, None if < 2 particles
    intra_b: tuple
    total_weight: float = field(repr=False, default=0.0)
    sum_sq_weight: float = field(repr=False, default=0.0)

    def leading_order(self, params: CollapseParams) -> float:
        """Leading-order Gamma for the classified regime (NaN if general)."""
        lam = params.lam
        return {
            Regime.NEGLIGIBLE: 0.0,
            Regime.QUADRATIC: lam * self.total_weight ** 2,
            Regime.HALF_QUADRATIC: 0.5 * lam * self.total_weight ** 2,
            Regime.LINEAR: lam * self.sum_sq_weight,
            Regime.GENERAL: float("nan"),
        }[self.regime]


def regime_classify(sup: Superposition, params: CollapseParams) -> RegimeReport:
    """Classify the separation pattern.

    Rules, with separations in units of r_C and checked in this order:

    * negligible: every |a_i - b_i| < 0.1
    * quadratic: every |a_i - b_j| >= 3, both branches clustered (< 0.1)
    * half-quadratic: every |a_i - b_j| >= 3, one branch clustered, the other
      spread (all pairs >= 3)
    * linear: every |a_i - b_j| >= 3, both branches spread
    * otherwise general.

    A single particle is both clustered and spread; it reports quadratic.
    """
    check_species(sup)
    a, b = sup.comp_a.positions, sup.comp_b.positions
    if not len(a):
        raise InvalidParameterError("regime classification needs particles")
    r = params.r_C
    same = float(np.max(np.linalg.norm(a - b, axis=1))) / r
    cross = float(cdist(a, b).min()) / r
    ia = _pair_extent(a / r)
    ib = _pair_extent(b / r)

    def clustered(ext):
        return ext[1] is None or ext[1] < CLOSE

    def spread(ext):
        return ext[0] is None or ext[0] >= FAR

    if same < CLOSE:
        regime = Regime.NEGLIGIBLE
    elif cross >= FAR and clustered(ia) and clustered(ib):
        regime = Regime.QUADRATIC
    elif cross >= FAR and ((clustered(ia) and spread(ib)) or (spread(ia) and clustered(ib))):
        regime = Regime.HALF_QUADRATIC
    elif cross >= FAR and spread(ia) and spread(ib):
        regime = Regime.LINEAR
    else:
        regime = Regime.GENERAL
    w = sup.comp_a.weights
    return RegimeReport(regime, same, cross, ia, ib, float(w.sum()), float(w @ w))
