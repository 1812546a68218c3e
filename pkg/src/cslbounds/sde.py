"""Monte-Carlo unravelling of the CSL equation for frozen configurations.

With H = 0 the basis configurations are eigenstates of the smeared mass
density, so a superposition of K of them stays in their span and the
stochastic equation reduces to K amplitude equations

    da_k = a_k [ sqrt(gamma) int (mu_k - mubar) dW - (gamma/2) int (mu_k - mubar)^2 dt ]

with ``mubar = sum_k |a_k|^2 mu_k``. White noise in space,
E[dW(x) dW(y)] = delta(x - y) dt, is discretized on the raster used for
``mu`` with per-cell variance dt / h^3.

Only the projections ``h^3 sum_c mu_k w_c`` of a grid draw enter the update.
They are Gaussian with covariance ``dt * gram``, which lets ensemble runs
sample them directly instead of drawing the whole grid.
"""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from cslbounds.model import CollapseParams, InvalidParameterError, Superposition
from cslbounds.raster import DensityProfiles, Grid, GridAxes, GridError, density_profiles, rasterize
from cslbounds.rates import check_species

log = logging.getLogger(__name__)

#: Largest allowed dt * Gamma.
STABILITY_LIMIT = 0.01
#: Collapse criterion: one weight e^100 times the other (Gamma t ~ 100).
COLLAPSE_LOG_RATIO = 100.0
MIN_TRAJECTORIES = 100


class StabilityError(ArithmeticError):
    pass


class FitError(ArithmeticError):
    """The ensemble coherence did not show a usable exponential decay."""

    def __init__(self, message, times=None, curve=None):
        super().__init__(message)
        self.times = times
        self.curve = curve


@dataclass
class AmplitudeState:
    amplitudes: np.ndarray  # (K,) complex
    time: float = 0.0

    def __post_init__(self):
        self.amplitudes = np.asarray(self.amplitudes, dtype=complex)

    @classmethod
    def from_superposition(cls, sup: Superposition) -> "AmplitudeState":
        return cls(np.array([sup.amp_a, sup.amp_b], dtype=complex))

    @property
    def weights(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    @property
    def coherence(self) -> complex:
        return complex(self.amplitudes[0] * np.conj(self.amplitudes[1]))


@dataclass(frozen=True)
class NoiseGrid:
    """Independent Gaussian increments on every raster cell."""

    axes: GridAxes
    dt: float

    @property
    def variance(self) -> float:
        return self.dt / self.axes.cell_volume

    def draw(self, rng: np.random.Generator) -> np.ndarray:
        return rng.normal(0.0, np.sqrt(self.variance), self.axes.shape)

    def project(self, profiles: DensityProfiles, w: np.ndarray) -> np.ndarray:
        """h^3 sum_c mu_k(x_c) w_c for each k."""
        flat = profiles.mu.reshape(profiles.K, -1)
        return (flat @ w.ravel()) * self.axes.cell_volume


def reduce_to_amplitude_sde(
    sup: Superposition,
    params: CollapseParams,
    grid: Grid = Grid(),
    axes: GridAxes | None = None,
) -> DensityProfiles:
    """Rasterize the smeared density of each branch.

    If ``axes`` is given the profiles are drawn on that raster, which must
    leave at least ``grid.padding`` r_C around every particle.
    """
    check_species(sup)
    configs = [sup.comp_a, sup.comp_b]
    if axes is None:
        return density_profiles(configs, params.r_C, grid)
    if axes.h > grid.h * params.r_C * (1 + 1e-12):
        raise GridError(f"raster cell {axes.h} cm is coarser than {grid.h} r_C")
    pad = grid.padding * params.r_C
    hi = axes.origin + np.array(axes.shape) * axes.h
    for c in configs:
        if len(c) and (
            np.any(c.positions.min(axis=0) - pad < axes.origin - 1e-12 * params.r_C)
            or np.any(c.positions.max(axis=0) + pad > hi + 1e-12 * params.r_C)
        ):
            raise GridError(f"raster does not cover the particles with {grid.padding} r_C padding")
    mu = np.stack([rasterize(c, axes, params.r_C) for c in configs])
    return DensityProfiles(axes=axes, mu=mu, r_C=params.r_C)


def discrete_rate(profiles: DensityProfiles, params: CollapseParams) -> float:
    """Decay rate implied by the raster; identical to the field-quadrature rate."""
    return profiles.decay_rate(params)


def check_stability(profiles: DensityProfiles, params: CollapseParams, dt: float) -> float:
    rate = discrete_rate(profiles, params)
    if not dt > 0:
        raise StabilityError(f"dt must be positive, got {dt}")
    if dt * rate > STABILITY_LIMIT:
        raise StabilityError(
            f"dt * Gamma = {dt * rate:.3g} exceeds {STABILITY_LIMIT}; "
            f"use dt <= {STABILITY_LIMIT / rate:.3g} s"
        )
    return rate


def _rows_times(x: np.ndarray, m: np.ndarray) -> np.ndarray:
    """``x @ m.T`` row by row.

    BLAS may pick a different kernel depending on the number of rows, which
    would tie each trajectory's rounding to its batch.
    """
    return np.sum(x[..., None, :] * m, axis=-1)


def _update(a: np.ndarray, s: np.ndarray, gram: np.ndarray, gamma: float, dt: float) -> np.ndarray:
    """One Euler-Maruyama step plus renormalization, vectorized over rows.

    ``a`` is (..., K) complex and normalized, ``s`` the projected noise.
    """
    p = (a * a.conj()).real
    sbar = np.sum(p * s, axis=-1, keepdims=True)
    gp = _rows_times(p, gram)
    # h^3 sum_c (mu_k - mubar)^2 = G_kk - 2 (G p)_k + p.G.p
    spread = np.diag(gram) - 2.0 * gp + np.sum(p * gp, axis=-1, keepdims=True)
    a = a * (1.0 + np.sqrt(gamma) * (s - sbar) - 0.5 * gamma * spread * dt)
    return a / np.sqrt(np.sum((a * a.conj()).real, axis=-1, keepdims=True))


def step(
    state: AmplitudeState,
    profiles: DensityProfiles,
    params: CollapseParams,
    dt: float,
    noise: np.ndarray,
) -> AmplitudeState:
    """Advance one step given a full-grid noise draw (see :class:`NoiseGrid`).

    Raises :class:`StabilityError` when dt * Gamma exceeds the bound.
    """
    check_stability(profiles, params, dt)
    s = NoiseGrid(profiles.axes, dt).project(profiles, noise)
    a = _update(state.amplitudes, s, profiles.gram(), params.gamma, dt)
    return AmplitudeState(a, state.time + dt)


def noise_factor(gram: np.ndarray, dt: float) -> np.ndarray:
    """Matrix L with L L^T = dt * gram (symmetric square root)."""
    ev, vec = np.linalg.eigh(dt * gram)
    return vec * np.sqrt(np.clip(ev, 0.0, None))


@dataclass
class _Job:
    a0: np.ndarray
    factor: np.ndarray
    gram: np.ndarray
    gamma: float
    dt: float
    n_steps: int
    record_every: int
    seeds: list


def _run_block(job: _Job):
    """Evolve a block of trajectories; each draws from its own generator."""
    n = len(job.seeds)
    K = len(job.a0)
    xi = np.stack([np.random.default_rng(s).standard_normal((job.n_steps, K)) for s in job.seeds])
    a = np.broadcast_to(job.a0, (n, K)).copy()
    n_rec = job.n_steps // job.record_every + 1
    amps = np.empty((n, n_rec, K), dtype=complex)
    amps[:, 0] = a
    outcome = np.full(n, -1)
    ratio = np.exp(COLLAPSE_LOG_RATIO)
    for i in range(job.n_steps):
        s = _rows_times(xi[:, i, :], job.factor)
        a = _update(a, s, job.gram, job.gamma, job.dt)
        if (i + 1) % job.record_every == 0:
            amps[:, (i + 1) // job.record_every] = a
        p = (a * a.conj()).real
        open_ = outcome < 0
        if open_.any():
            outcome[open_ & (p[:, 0] >= ratio * p[:, 1])] = 0
            outcome[open_ & (p[:, 1] >= ratio * p[:, 0])] = 1
    final = np.argmax((a * a.conj()).real, axis=1)
    return amps, outcome, final


def simulate_trajectories(
    sup: Superposition,
    params: CollapseParams,
    dt: float,
    t_max: float,
    n_traj: int,
    seed: int,
    grid: Grid = Grid(),
    record_every: int = 1,
    workers: int = 1,
    block_size: int = 500,
):
    """Run ``n_traj`` independent trajectories.

    Trajectory ``i`` draws its noise from the i-th child of
    ``SeedSequence(seed)``, so results do not depend on ``block_size`` or
    ``workers``.

    Returns
    -------
    times : ndarray, shape (n_rec,)
    amplitudes : ndarray, shape (n_traj, n_rec, 2)
    collapsed_to : ndarray of int, shape (n_traj,)
        Branch index reaching the e^100 weight ratio first, -1 if none did.
    final_larger : ndarray of int, shape (n_traj,)
        Branch with the larger weight at ``t_max``.
    profiles : DensityProfiles
    """
    if n_traj < 1:
        raise InvalidParameterError("n_traj must be >= 1")
    profiles = reduce_to_amplitude_sde(sup, params, grid)
    check_stability(profiles, params, dt)
    n_steps = int(round(t_max / dt))
    if n_steps < 1:
        raise InvalidParameterError("t_max shorter than one step")
    record_every = max(1, int(record_every))
    n_steps -= n_steps % record_every
    gram = profiles.gram()
    factor = noise_factor(gram, dt)
    a0 = AmplitudeState.from_superposition(sup).amplitudes
    children = np.random.SeedSequence(seed).spawn(n_traj)
    jobs = [
        _Job(a0, factor, gram, params.gamma, dt, n_steps, record_every, children[s:s + block_size])
        for s in range(0, n_traj, block_size)
    ]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_run_block, jobs))
    else:
        parts = [_run_block(j) for j in jobs]
    amps = np.concatenate([p[0] for p in parts])
    collapsed = np.concatenate([p[1] for p in parts])
    final = np.concatenate([p[2] for p in parts])
    times = np.arange(amps.shape[1]) * record_every * dt
    return times, amps, collapsed, final, profiles


@dataclass(frozen=True)
class EnsembleDecayEstimate:
    rate: float  # 1/s
    stderr: float
    ensemble_size: int
    n_trajectories_used: int
    n_fit_points: int


@dataclass
class EnsembleResult:
    decay: EnsembleDecayEstimate
    analytic_rate: float  # discrete raster rate, the simulator's exact target
    times: np.ndarray
    mean_coherence: np.ndarray  # complex E[a_A conj(a_B)](t)
    coherence_stderr: np.ndarray
    collapse_counts: np.ndarray  # (2,)
    threshold_collapsed: int  # trajectories that met the e^100 criterion
    initial_weights: np.ndarray
    mean_weights: np.ndarray = field(repr=False)  # E[|a_k|^2](t), (n_rec, 2)
    weight_stderr: np.ndarray = field(repr=False)

    @property
    def collapse_frequencies(self) -> np.ndarray:
        return self.collapse_counts / self.collapse_counts.sum()

    def z_score(self, reference: float, reference_err: float = 0.0) -> float:
        err = np.hypot(self.decay.stderr, reference_err)
        return (self.decay.rate - reference) / err


def _fit_rate(times, ratio, weights):
    """Slope of log(ratio) through the origin: ratio(t) = exp(-Gamma t)."""
    y = np.log(ratio)
    return -np.sum(weights * times * y) / np.sum(weights * times * times)


def fit_decay(times, coherence, c0, n_groups: int = 20):
    """Fit exp(-Gamma t) to the ensemble coherence.

    ``coherence`` is (n_traj, n_rec) complex per-trajectory a_A conj(a_B).
    Points with mean above three standard errors are used, weighted by the
    inverse variance of their logarithm. The standard error comes from a
    grouped jackknife over trajectories, which accounts for the correlation
    between time points of the same trajectory.
    """
    if abs(c0) == 0:
        raise FitError("initial coherence is zero; one amplitude vanishes")
    r = (coherence / c0).real
    n = len(r)
    mean = r.mean(axis=0)
    se = r.std(axis=0, ddof=1) / np.sqrt(n)
    use = (times > 0) & (mean > 3.0 * se)
    if use.sum() < 3:
        raise FitError("fewer than 3 usable points in the decay curve", times, mean)
    # floor keeps noiseless curves (zero spread) finite
    w = np.maximum(se[use] / mean[use], 1e-12) ** -2.0
    rate = _fit_rate(times[use], mean[use], w)
    if not rate > 0:
        raise FitError(f"coherence is not decaying (fitted rate {rate:.3g})", times, mean)
    groups = np.array_split(np.arange(n), min(n_groups, n))
    sums = np.stack([r[g].sum(axis=0) for g in groups])
    total = sums.sum(axis=0)
    loo = []
    for k, g in enumerate(groups):
        m = (total - sums[k]) / (n - len(g))
        if np.any(m[use] <= 0):
            raise FitError("jackknife replicate lost positivity", times, mean)
        loo.append(_fit_rate(times[use], m[use], w))
    loo = np.array(loo)
    G = len(groups)
    stderr = float(np.sqrt((G - 1) / G * np.sum((loo - loo.mean()) ** 2)))
    return float(rate), stderr, int(use.sum())


def run_ensemble(
    sup: Superposition,
    params: CollapseParams,
    dt: float,
    t_max: float,
    n_traj: int,
    seed: int,
    grid: Grid = Grid(),
    record_every: int | None = None,
    workers: int = 1,
) -> EnsembleResult:
    """Simulate an ensemble, fit the coherence decay and tally collapses.

    A trajectory counts as collapsed onto branch k once
    ``|a_k|^2 / |a_j|^2 >= e^100``; otherwise the larger weight at ``t_max``
    decides.
    """
    if n_traj < MIN_TRAJECTORIES:
        raise InvalidParameterError(f"need at least {MIN_TRAJECTORIES} trajectories")
    if record_every is None:
        record_every = max(1, int(round(t_max / dt)) // 200)
    times, amps, collapsed, final, profiles = simulate_trajectories(
        sup, params, dt, t_max, n_traj, seed, grid, record_every, workers
    )
    coh = amps[:, :, 0] * amps[:, :, 1].conj()
    c0 = complex(sup.amp_a * np.conj(sup.amp_b))
    rate, stderr, n_pts = fit_decay(times, coh, c0)
    outcome = np.where(collapsed >= 0, collapsed, final)
    counts = np.bincount(outcome, minlength=2)
    wts = (amps * amps.conj()).real
    log.debug("fitted %.4g +- %.2g from %d points", rate, stderr, n_pts)
    return EnsembleResult(
        decay=EnsembleDecayEstimate(rate, stderr, n_traj, n_traj, n_pts),
        analytic_rate=discrete_rate(profiles, params),
        times=times,
        mean_coherence=coh.mean(axis=0),
        coherence_stderr=coh.std(axis=0, ddof=1) / np.sqrt(n_traj),
        collapse_counts=counts,
        threshold_collapsed=int(np.sum(collapsed >= 0)),
        initial_weights=np.abs(np.array([sup.amp_a, sup.amp_b])) ** 2,
        mean_weights=wts.mean(axis=0),
        weight_stderr=wts.std(axis=0, ddof=1) / np.sqrt(n_traj),
    )
