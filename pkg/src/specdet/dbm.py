"""Interacting eigenvalue flow in the cubic potential, at finite N.

Euler-Maruyama integration of

    d lam_i = -(E + lam_i^2) dt + (jt^2/N) sum_{j!=i} dt/(lam_i - lam_j)
              + sqrt(2 jt^2 / N) dB_i   [+ common trace-noise drift for c>0]

with particles that dive below the far boundary handed to an exact
deterministic free flight (drift-only solution of the quadratic blow-up,
noise and interaction are O(1/lam) out there) and re-injected from above
after the analytic transit time.  Each transit is one crossing; the
steady-state crossing rate per particle is the current that the stationary
resolvent constant predicts.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from numba import njit

from .core import FlowPhase, RandomStream
from .errors import OutOfPhase, StepCollapse
from .resolvent import (beta_from_tilde_j, dbm_stationary_density,
                        resolvent_constant, spectral_edge)

_STATUS_OK = 0
_STATUS_COLLAPSE = 1
_N_BLOCKS = 32


@dataclass(frozen=True)
class DbmConfig:
    """Parameters of one trajectory run."""

    n: int
    e: float
    tilde_j: float = 1.0
    c: float = 0.0
    dt: float = 1e-3
    t_total: float = 1000.0
    lambda_cut: float = None
    burn_in: float = None
    sample_interval: float = 0.25
    hist_bins: int = 120
    hist_range: tuple = None

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.n < 1:
            raise ValueError("need at least one particle")
        scale = max(1.0, math.sqrt(abs(self.e)))
        if self.lambda_cut is None:
            object.__setattr__(self, "lambda_cut", 50.0 * scale)
        if self.lambda_cut < 10.0 * scale:
            raise ValueError("lambda_cut must be at least 10*max(1, sqrt|E|)")
        if self.burn_in is None:
            estar = spectral_edge(self.tilde_j)
            gap = abs(estar - self.e)
            object.__setattr__(self, "burn_in", max(20.0, 5.0 / max(gap, 1e-3)))
        if self.hist_range is None:
            rc = resolvent_constant(self.e, self.beta)
            if rc.phase is FlowPhase.CONFINED:
                lo = rc.outer_minus.real - 1.5
                hi = rc.outer_plus.real + 1.5
            else:
                w = 4.0 * max(1.0, math.sqrt(abs(self.e)) + self.beta ** (1.0 / 3.0))
                lo, hi = -w, w
            object.__setattr__(self, "hist_range", (lo, hi))

    @property
    def beta(self) -> float:
        return beta_from_tilde_j(self.tilde_j)

    @property
    def far_boundary(self) -> float:
        """Boundary of the deterministic-flight zone."""
        return 0.5 * self.lambda_cut

    @property
    def flight_time(self) -> float:
        """Exact drift-only transit time from -far to -inf plus +inf to +far."""
        lam = self.far_boundary
        e = self.e
        if e > 0.0:
            return 2.0 * (0.5 * math.pi - math.atan(lam / math.sqrt(e))) / math.sqrt(e)
        if e < 0.0:
            m = math.sqrt(-e)
            if lam <= m:
                raise ValueError("far boundary inside the potential well")
            return (1.0 / m) * math.log((lam + m) / (lam - m))
        return 2.0 / lam


@dataclass(frozen=True)
class DbmTrajectoryStats:
    config: DbmConfig
    crossings: int
    measured_current: float          # crossings / (N * measured time)
    current_stderr: float
    trz_mean: float                  # time average of (1/N) sum lam_i
    trz_stderr: float
    hist_counts: np.ndarray
    hist_edges: np.ndarray
    snapshots: int
    time_measured: float
    stationary: bool                 # first/second half currents within 2 s.e.
    reflections: int = 0             # near-degenerate pair swaps (exchangeable)
    first_passage_time: float = math.nan


@njit(cache=True)
def _pair_drift(lam, n_act, e_param, jt2, n_total, acc, sub_dt, theta):
    """Drift with tamed pair repulsion.

    A bare Euler impulse dt * (jt^2/N)/gap is unbounded as the gap closes
    and catapults particles (at small N far enough to fake barrier
    crossings); capping each pairwise impulse at theta * gap keeps the
    update stable and converges to the same flow as dt -> 0.
    """
    for i in range(n_act):
        acc[i] = -(e_param + lam[i] * lam[i])
    inv_n = jt2 / n_total
    cap_fac = theta / sub_dt
    for i in range(n_act):
        li = lam[i]
        for j in range(i + 1, n_act):
            gap = li - lam[j]
            w = inv_n / gap
            cap = cap_fac * abs(gap)
            if w > cap:
                w = cap
            elif w < -cap:
                w = -cap
            acc[i] += w
            acc[j] -= w


@njit(cache=True)
def _dbm_kernel(lam0, e_param, jt, c, n_total, dt, n_steps, burn_time,
                lam_far, t_fly, seed, sample_every, hist_lo, hist_hi, nbins,
                first_passage, block_cross, block_trz, block_time, hist):
    """Integrate one trajectory.  Returns
    (status, reflections, crossings, snapshots, first_passage_time, t_end)."""
    np.random.seed(seed)
    jt2 = jt * jt
    n = n_total
    lam = lam0.copy()
    n_act = n
    fly_return = np.full(n, -1.0)
    acc = np.zeros(n)
    tmp = np.zeros(n)
    bin_w = (hist_hi - hist_lo) / nbins
    n_blocks = block_cross.size
    t_meas_total = n_steps * dt - burn_time
    block_dt = t_meas_total / n_blocks if t_meas_total > 0 else dt
    crossings = 0
    snapshots = 0
    reflections = 0
    noise_amp_base = math.sqrt(2.0 * jt2 / n)
    common_amp_base = jt * math.sqrt(c / n) if c > 0.0 else 0.0

    t = 0.0
    for step in range(n_steps):
        # release finished flights at the top of the active range
        released = False
        for k in range(n):
            if 0.0 <= fly_return[k] <= t:
                lam[n_act] = lam_far * (1.0 + 0.005 * (n - n_act))
                n_act += 1
                fly_return[k] = -1.0
                released = True
        if released:
            lam[:n_act] = np.sort(lam[:n_act])

        # tamed Euler step.  The GOE noise puts the flow at the marginal
        # Dyson index, where gaps recurrently touch zero no matter how small
        # the step; a touch is resolved by re-sorting (particles are
        # exchangeable, so this reflects the gap process) and counted.  For
        # small packs the touch is first chased down with halved substeps --
        # there the escape dynamics is sensitive to how a touch resolves and
        # the extra work is negligible; for large packs touches are so
        # frequent that only aggregates matter and the cascade would
        # dominate the runtime.
        max_sub = 64 if n_act <= 16 else 1
        nsub = 1
        while True:
            for i in range(n_act):
                tmp[i] = lam[i]
            sub_dt = dt / nsub
            amp = noise_amp_base * math.sqrt(sub_dt)
            camp = common_amp_base * math.sqrt(sub_dt)
            ok = True
            for _s in range(nsub):
                _pair_drift(tmp, n_act, e_param, jt2, n, acc, sub_dt, 0.4)
                common = camp * np.random.normal() if camp > 0.0 else 0.0
                for i in range(n_act):
                    tmp[i] += sub_dt * acc[i] + amp * np.random.normal() + common
                for i in range(1, n_act):
                    if tmp[i] < tmp[i - 1]:
                        ok = False
                        break
                if not ok:
                    if nsub < max_sub:
                        break
                    tmp[:n_act] = np.sort(tmp[:n_act])
                    reflections += 1
                    ok = True
            if ok:
                break
            nsub *= 2
        for i in range(n_act):
            if not np.isfinite(tmp[i]):
                return (_STATUS_COLLAPSE, reflections, crossings, snapshots,
                        math.nan, t, 0.0)
            lam[i] = tmp[i]
        t += dt

        # hand divers to the deterministic flight
        n_out = 0
        while n_out < n_act and lam[n_out] < -lam_far:
            n_out += 1
        if n_out > 0:
            if first_passage:
                return (_STATUS_OK, reflections, crossings + n_out, snapshots,
                        t, t, 1e300)
            slot = 0
            for _k in range(n_out):
                while fly_return[slot] >= 0.0:
                    slot += 1
                fly_return[slot] = t + t_fly
            if t > burn_time:
                crossings += n_out
                blk = int((t - burn_time) / block_dt)
                if blk >= n_blocks:
                    blk = n_blocks - 1
                block_cross[blk] += n_out
            for j in range(n_out, n_act):
                lam[j - n_out] = lam[j]
            n_act -= n_out

        # measurements
        if t > burn_time:
            blk = int((t - burn_time) / block_dt)
            if blk >= n_blocks:
                blk = n_blocks - 1
            s = 0.0
            for i in range(n_act):
                s += lam[i]
            block_trz[blk] += (s / n) * dt
            block_time[blk] += dt
            if step % sample_every == 0:
                for i in range(n_act):
                    b = int((lam[i] - hist_lo) / bin_w)
                    if 0 <= b < nbins:
                        hist[b] += 1
                snapshots += 1
    gap_mean = (lam[n_act - 1] - lam[0]) / max(n_act - 1, 1) if n_act > 1 else 1e300
    return _STATUS_OK, reflections, crossings, snapshots, math.nan, t, gap_mean


def _quantiles_of(xs: np.ndarray, dens: np.ndarray, n: int) -> np.ndarray:
    cdf = np.concatenate([[0.0], np.cumsum(0.5 * (dens[1:] + dens[:-1]) * np.diff(xs))])
    cdf /= cdf[-1]
    targets = (np.arange(n) + 0.5) / n
    return np.interp(targets, cdf, xs)


def _initial_positions(cfg: DbmConfig) -> np.ndarray:
    """Quantiles of the infinite-N stationary density.

    A literal simultaneous infall from the cutoff compresses the particle
    gaps by exp(-2 int lam dtau), i.e. by orders of magnitude, which makes
    the first contact with the droplet arbitrarily stiff.  Starting at the
    stationary quantiles reaches the same steady state; the burn-in window
    is discarded either way.
    """
    rc = resolvent_constant(cfg.e, cfg.beta)
    if rc.phase is FlowPhase.CONFINED:
        return droplet_positions(cfg)
    w = 0.8 * cfg.far_boundary
    xs = np.linspace(-w, w, 6001)
    dens = dbm_stationary_density(xs, cfg.e, cfg.beta)
    return _quantiles_of(xs, dens, cfg.n)


def droplet_positions(cfg: DbmConfig) -> np.ndarray:
    """Quantiles of the stationary droplet density (confined phase only)."""
    rc = resolvent_constant(cfg.e, cfg.beta)
    if rc.phase is not FlowPhase.CONFINED:
        raise OutOfPhase("droplet start requires the confined phase")
    gm, gp = rc.outer_minus.real, rc.outer_plus.real
    xs = np.linspace(gm, gp, 4001)
    dens = dbm_stationary_density(xs, cfg.e, cfg.beta)
    return _quantiles_of(xs, dens, cfg.n)


def _run_kernel(cfg: DbmConfig, lam0: np.ndarray, seed: int, n_steps: int,
                burn_time: float, first_passage: bool):
    block_cross = np.zeros(_N_BLOCKS, dtype=np.int64)
    block_trz = np.zeros(_N_BLOCKS)
    block_time = np.zeros(_N_BLOCKS)
    hist = np.zeros(cfg.hist_bins, dtype=np.int64)
    sample_every = max(1, int(round(cfg.sample_interval / cfg.dt)))
    (status, reflections, crossings, snapshots, fp_time, t_end,
     gap_mean) = _dbm_kernel(
        lam0, cfg.e, cfg.tilde_j, cfg.c, cfg.n, cfg.dt, n_steps, burn_time,
        cfg.far_boundary, cfg.flight_time, seed, sample_every,
        cfg.hist_range[0], cfg.hist_range[1], cfg.hist_bins,
        first_passage, block_cross, block_trz, block_time, hist)
    if status == _STATUS_COLLAPSE:
        raise StepCollapse("non-finite particle position; dt far too coarse")
    # touches happen on most steps at the marginal Dyson index no matter
    # how small dt is; the genuine coarseness failure is a noise kick
    # comparable to the mean particle spacing
    noise_amp = math.sqrt(2.0 * cfg.tilde_j ** 2 * cfg.dt / cfg.n)
    if not first_passage and noise_amp > 0.5 * gap_mean:
        raise StepCollapse(
            f"per-step noise {noise_amp:.3g} exceeds half the mean gap "
            f"{gap_mean:.3g}; dt too coarse for this density")
    return (block_cross, block_trz, block_time, hist, crossings, snapshots,
            fp_time, t_end, reflections)


def dbm_simulate(cfg: DbmConfig, stream: RandomStream) -> DbmTrajectoryStats:
    """Run one trajectory from the high-entry initial condition."""
    n_steps = int(round(cfg.t_total / cfg.dt))
    if n_steps * cfg.dt <= cfg.burn_in:
        raise ValueError("t_total must exceed the burn-in window")
    lam0 = _initial_positions(cfg)
    (block_cross, block_trz, block_time, hist, crossings, snapshots,
     _fp, t_end, reflections) = _run_kernel(cfg, lam0, stream.scalar_seed(),
                                            n_steps, cfg.burn_in, False)
    time_meas = float(np.sum(block_time))
    rates = block_cross / (cfg.n * np.maximum(block_time, 1e-300))
    current = crossings / (cfg.n * time_meas)
    cur_se = float(np.std(rates, ddof=1) / math.sqrt(_N_BLOCKS))
    trz_blocks = block_trz / np.maximum(block_time, 1e-300)
    trz = float(np.sum(block_trz) / time_meas)
    trz_se = float(np.std(trz_blocks, ddof=1) / math.sqrt(_N_BLOCKS))
    half = _N_BLOCKS // 2
    r1 = float(np.sum(block_cross[:half])) / (cfg.n * max(float(np.sum(block_time[:half])), 1e-300))
    r2 = float(np.sum(block_cross[half:])) / (cfg.n * max(float(np.sum(block_time[half:])), 1e-300))
    se_diff = 2.0 * cur_se   # each half carries sqrt(2) times the full-run s.e.
    stationary = abs(r1 - r2) <= 2.0 * se_diff + 1e-12
    edges = np.linspace(cfg.hist_range[0], cfg.hist_range[1], cfg.hist_bins + 1)
    return DbmTrajectoryStats(config=cfg, crossings=int(crossings),
                              measured_current=float(current),
                              current_stderr=cur_se, trz_mean=trz,
                              trz_stderr=trz_se, hist_counts=hist,
                              hist_edges=edges, snapshots=int(snapshots),
                              time_measured=time_meas, stationary=bool(stationary),
                              reflections=int(reflections))


def dbm_density(stats: DbmTrajectoryStats) -> tuple[np.ndarray, np.ndarray]:
    """Normalized empirical density (unit mass over the histogram window)."""
    edges = stats.hist_edges
    widths = np.diff(edges)
    total = float(np.sum(stats.hist_counts))
    if total == 0:
        raise ValueError("empty histogram: no post-burn-in snapshots")
    dens = stats.hist_counts / (total * widths)
    return edges, dens


def dbm_trz_average(stats: DbmTrajectoryStats) -> tuple[float, float]:
    """Time-averaged (1/N) sum of active positions, with batch-means error.

    Flying particles are excluded: their 1/lam^2 population is symmetric at
    the truncation, so the principal-value mean is unaffected to O(cut^-3).
    """
    return stats.trz_mean, stats.trz_stderr


def _passage_chunk(args) -> np.ndarray:
    cfg, base, lo, hi, t_max, lam0 = args
    n_steps = int(round(t_max / cfg.dt))
    out = np.full(hi - lo, np.nan)
    for k in range(lo, hi):
        (_bc, _bt, _bl, _h, _cr, _sn, fp_time, _t_end, _refl) = _run_kernel(
            cfg, lam0, base.child(k).scalar_seed(), n_steps, t_max * 2.0, True)
        out[k - lo] = fp_time
    return out


def first_passage_ensemble(cfg: DbmConfig, trials: int, stream: RandomStream,
                           t_max: float, workers: int = 1) -> np.ndarray:
    """First reinjection times from the stationary droplet (confined phase).

    Returns one time per trial; censored trials (no escape before t_max)
    come back as NaN and are reported via a warning.  Trials are keyed by
    stream child index, so results are independent of the worker count.
    """
    rc = resolvent_constant(cfg.e, cfg.beta)
    if rc.phase is not FlowPhase.CONFINED:
        raise OutOfPhase("first passage requires E < E*")
    lam0 = droplet_positions(cfg)
    if workers <= 1:
        times = _passage_chunk((cfg, stream, 0, trials, t_max, lam0))
    else:
        from concurrent.futures import ProcessPoolExecutor
        bounds = np.linspace(0, trials, workers * 4 + 1).astype(int)
        jobs = [(cfg, stream, int(lo), int(hi), t_max, lam0)
                for lo, hi in zip(bounds[:-1], bounds[1:]) if hi > lo]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            times = np.concatenate(list(pool.map(_passage_chunk, jobs)))
    censored = int(np.count_nonzero(np.isnan(times)))
    if censored:
        warnings.warn(f"{censored}/{trials} first-passage trials censored at t_max={t_max}")
    return times
