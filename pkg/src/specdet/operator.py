"""Disorder sampling, exact log-determinants, and Monte Carlo moments.

One realization of the block operator is M GOE(N) blocks plus M scalar
trace-noise values.  Its log-determinant is evaluated by independent
methods (dense symmetric factorization, block-pivot chain recursion) whose
agreement is part of the acceptance gate; negative-pivot counts track the
spectral counting function.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np
import scipy.linalg

from .core import (Boundary, ContinuumParams, ModelParams, MomentumGrid,
                   RandomStream, canonicalize, kinetic_eigenvalues,
                   laplacian_matrix)
from .errors import BlockSingular, ExactSingularity, SizeGuard

_DENSE_GUARD = 4096


@dataclass(frozen=True)
class OperatorRealization:
    """One sampled disorder instance; arrays are read-only by convention."""

    params: ModelParams
    goe: np.ndarray   # (M, N, N) symmetric blocks, semicircle support [-2, 2]
    xi: np.ndarray    # (M,) scalar trace noise, variance c/N
    stream: RandomStream

    @property
    def w_blocks(self) -> np.ndarray:
        """Disorder blocks W(x) = J (H(x) + xi(x) I)."""
        p = self.params
        eye = np.eye(p.N)
        return p.J * (self.goe + self.xi[:, None, None] * eye)


def sample_operator(params: ModelParams, stream: RandomStream) -> OperatorRealization:
    """Draw one realization; bit-reproducible for a given (seed, stream)."""
    rng = stream.generator()
    n, m = params.N, params.M
    raw = rng.standard_normal((m, n, n))
    goe = (raw + np.swapaxes(raw, 1, 2)) / math.sqrt(2.0 * n)
    if params.c > 0.0:
        xi = rng.standard_normal(m) * math.sqrt(params.c / n)
    else:
        xi = np.zeros(m)
    return OperatorRealization(params=params, goe=goe, xi=xi, stream=stream)


def free_logdet(params: ModelParams) -> float:
    """log det of the disorder-free operator at E = 0, from the Laplacian
    spectrum (never by factorization)."""
    p = canonicalize(params)
    vals = p.mu + kinetic_eigenvalues(p)
    if np.any(vals <= 0.0):
        raise ValueError("free operator not positive definite")
    return p.N * float(np.sum(np.log(vals)))


def assemble_dense(real: OperatorRealization, E: float,
                   max_dense: int = _DENSE_GUARD) -> np.ndarray:
    """Full (N M) x (N M) symmetric matrix of the operator minus E."""
    p = canonicalize(replace(real.params, E=real.params.E + E))
    n, m = p.N, p.M
    if n * m > max_dense:
        raise SizeGuard(f"dense assembly refused: {n * m} > {max_dense} rows")
    lap = laplacian_matrix(p.grid())
    mat = np.kron(p.mu * np.eye(m) - p.t * lap, np.eye(n))
    w = real.w_blocks
    for x in range(m):
        mat[x * n:(x + 1) * n, x * n:(x + 1) * n] += w[x]
    return mat


@dataclass(frozen=True)
class LogDetResult:
    log_abs_det: float
    sign_flips: int      # number of negative pivots = eigenvalues below 0
    method: str


def logdet_dense(mat: np.ndarray) -> LogDetResult:
    """log|det| and inertia of a symmetric matrix by Bunch-Kaufman LDL."""
    _, d, _ = scipy.linalg.ldl(mat)
    n = d.shape[0]
    log_abs = 0.0
    neg = 0
    i = 0
    while i < n:
        if i + 1 < n and d[i, i + 1] != 0.0:
            a, b, c = d[i, i], d[i, i + 1], d[i + 1, i + 1]
            det2 = a * c - b * b
            if abs(det2) < 1e-300:
                raise ExactSingularity("zero 2x2 pivot in LDL factorization")
            log_abs += math.log(abs(det2))
            if det2 < 0.0:
                neg += 1
            elif a + c < 0.0:
                neg += 2
            i += 2
        else:
            v = d[i, i]
            if abs(v) < 1e-300:
                raise ExactSingularity("zero pivot in LDL factorization")
            log_abs += math.log(abs(v))
            if v < 0.0:
                neg += 1
            i += 1
    return LogDetResult(log_abs_det=log_abs, sign_flips=neg, method="dense-ldl")


def _diag_blocks(real: OperatorRealization, E: float) -> np.ndarray:
    """Diagonal blocks A_x = (mu - E + 2t) I + W(x) of the d=1 chain.

    A single periodic site has no bonds at all, so no elastic shift there.
    """
    p = real.params
    lap_diag = 0.0 if (p.boundary is Boundary.PERIODIC and p.L == 1) else 2.0
    shift = (p.mu - p.E - E) + lap_diag * p.t
    blocks = real.w_blocks.copy()
    idx = np.arange(p.N)
    blocks[:, idx, idx] += shift
    return blocks


def _chain_pivots(blocks: np.ndarray, t: float):
    """Yield the block-LU pivots M_x = A_x - t^2 M_{x-1}^(-1)."""
    m_prev = None
    for a in blocks:
        m_x = a if m_prev is None else a - t * t * np.linalg.inv(m_prev)
        yield m_x
        m_prev = m_x


def logdet_block_recursion(real: OperatorRealization, E: float,
                           count_inertia: bool = True,
                           _retried: bool = False) -> LogDetResult:
    """d=1 log-determinant by the block-pivot chain.

    Dirichlet chains factor exactly; periodic chains use a bordered
    elimination whose Schur block closes the ring, matching the dense
    periodic determinant.
    """
    p = real.params
    if p.d != 1:
        raise ValueError("block recursion is for d=1 chains")
    t = p.t
    blocks = _diag_blocks(real, E)
    m = p.M
    try:
        if p.boundary is Boundary.DIRICHLET or m <= 2:
            log_abs, neg = _chain_logdet(blocks, t, count_inertia,
                                         periodic=(p.boundary is Boundary.PERIODIC))
        else:
            log_abs, neg = _periodic_logdet(blocks, t, count_inertia)
    except np.linalg.LinAlgError as exc:
        if _retried:
            raise BlockSingular(str(exc)) from exc
        warnings.warn("singular block pivot; retrying with 1e-12 energy shift")
        return logdet_block_recursion(real, E + 1e-12, count_inertia, _retried=True)
    return LogDetResult(log_abs_det=log_abs, sign_flips=neg, method="block-recursion")


def _neg_count(mat: np.ndarray) -> int:
    return int(np.count_nonzero(np.linalg.eigvalsh(mat) < 0.0))


def _chain_logdet(blocks: np.ndarray, t: float, count_inertia: bool,
                  periodic: bool = False) -> tuple[float, int]:
    m = blocks.shape[0]
    if m == 1:
        a = blocks[0]
        sign, log_abs = np.linalg.slogdet(a)
        if sign == 0.0:
            raise np.linalg.LinAlgError("singular single block")
        return float(log_abs), (_neg_count(a) if count_inertia else -1)
    if periodic and m == 2:
        # both bonds act between the two sites: effective coupling -2t
        top = np.concatenate([blocks[0], -2.0 * t * np.eye(blocks.shape[1])], axis=1)
        bot = np.concatenate([-2.0 * t * np.eye(blocks.shape[1]), blocks[1]], axis=1)
        full = np.concatenate([top, bot], axis=0)
        res = logdet_dense(full)
        return res.log_abs_det, (res.sign_flips if count_inertia else -1)
    log_abs = 0.0
    neg = 0
    for m_x in _chain_pivots(blocks, t):
        sign, ld = np.linalg.slogdet(m_x)
        if sign == 0.0:
            raise np.linalg.LinAlgError("singular block pivot")
        log_abs += float(ld)
        if count_inertia:
            neg += _neg_count(m_x)
    return log_abs, (neg if count_inertia else -1)


def _periodic_logdet(blocks: np.ndarray, t: float, count_inertia: bool) -> tuple[float, int]:
    """Bordered elimination: interior chain 1..M-1 plus the closing site."""
    m, n, _ = blocks.shape
    interior = blocks[:m - 1]
    eye = np.eye(n)
    log_abs = 0.0
    neg = 0
    # forward pass: pivots and the transported first-column block
    m_prev = None
    z = None            # Z_x = t M_{x-1}^(-1) Z_{x-1}, Z_1 = -t I
    for x, a in enumerate(interior):
        if x == 0:
            m_x = a
            z = -t * eye
        else:
            inv_prev = np.linalg.inv(m_prev)
            m_x = a - t * t * inv_prev
            z = t * inv_prev @ z
        sign, ld = np.linalg.slogdet(m_x)
        if sign == 0.0:
            raise np.linalg.LinAlgError("singular block pivot")
        log_abs += float(ld)
        if count_inertia:
            neg += _neg_count(m_x)
        m_prev = m_x
    inv_last = np.linalg.inv(m_prev)
    # y_{M-1} from the row-1 border column: forward transport only
    y_last_from_first = inv_last @ z
    # (T^-1)_{1,1} via the reversed chain
    mt_prev = None
    for a in interior[::-1]:
        mt_prev = a if mt_prev is None else a - t * t * np.linalg.inv(mt_prev)
    corner_11 = np.linalg.inv(mt_prev)
    # Schur block of the closing site:
    #   S = A_M - t^2 [(T^-1)_{11} + (T^-1)_{M-1,M-1}] + t (Y1 + Y1^T)
    s = blocks[-1] - t * t * (corner_11 + inv_last) \
        + t * (y_last_from_first + y_last_from_first.T)
    sign, ld = np.linalg.slogdet(s)
    if sign == 0.0:
        raise np.linalg.LinAlgError("singular closing Schur block")
    log_abs += float(ld)
    if count_inertia:
        neg += _neg_count(s)
    return log_abs, (neg if count_inertia else -1)


# ---------------------------------------------------------------------------
# Spectral counting function, batched over energies (d=1 chains).

def _neg_count_batch(mats: np.ndarray) -> np.ndarray:
    return np.count_nonzero(np.linalg.eigvalsh(mats) < 0.0, axis=-1)


def eigencount_chain(real: OperatorRealization, energies) -> np.ndarray:
    """Number of eigenvalues strictly below each energy, for a d=1 chain.

    Sylvester inertia of the block pivots, evaluated for all energies in one
    batched sweep; handles both boundaries.
    """
    p = real.params
    if p.d != 1:
        raise ValueError("chain counting is for d=1")
    energies = np.asarray(energies, dtype=float)
    ne = energies.size
    n, m, t = p.N, p.M, p.t
    eye = np.eye(n)
    w = real.w_blocks
    lap_diag = 0.0 if (p.boundary is Boundary.PERIODIC and p.L == 1) else 2.0
    shift = (p.mu - p.E) + lap_diag * t
    # diag blocks per energy: (ne, m, n, n)
    diag = w[None, :, :, :] + (shift - energies)[:, None, None, None] * eye
    counts = np.zeros(ne, dtype=np.int64)
    if p.boundary is Boundary.DIRICHLET or m <= 2:
        if m == 1:
            return _neg_count_batch(diag[:, 0])
        if p.boundary is Boundary.PERIODIC and m == 2:
            full = np.zeros((ne, 2 * n, 2 * n))
            full[:, :n, :n] = diag[:, 0]
            full[:, n:, n:] = diag[:, 1]
            full[:, :n, n:] = -2.0 * t * eye
            full[:, n:, :n] = -2.0 * t * eye
            return _neg_count_batch(full)
        piv = diag[:, 0]
        counts += _neg_count_batch(piv)
        for x in range(1, m):
            piv = diag[:, x] - t * t * np.linalg.inv(piv)
            counts += _neg_count_batch(piv)
        return counts
    # periodic, m >= 3: bordered elimination with forward-transported border
    piv = diag[:, 0]
    z = np.broadcast_to(-t * eye, (ne, n, n)).copy()
    counts += _neg_count_batch(piv)
    for x in range(1, m - 1):
        inv_prev = np.linalg.inv(piv)
        piv = diag[:, x] - t * t * inv_prev
        z = t * inv_prev @ z
        counts += _neg_count_batch(piv)
    inv_last = np.linalg.inv(piv)
    y = inv_last @ z
    piv_rev = diag[:, m - 2]
    for x in range(m - 3, -1, -1):
        piv_rev = diag[:, x] - t * t * np.linalg.inv(piv_rev)
    corner_11 = np.linalg.inv(piv_rev)
    s = diag[:, m - 1] - t * t * (corner_11 + inv_last) \
        + t * (y + np.swapaxes(y, 1, 2))
    counts += _neg_count_batch(s)
    return counts


def eigencount_dense(real: OperatorRealization, energies,
                     max_dense: int = _DENSE_GUARD) -> np.ndarray:
    """Counting function from a full diagonalization (oracle for tests)."""
    eigs = np.linalg.eigvalsh(assemble_dense(real, 0.0, max_dense))
    energies = np.asarray(energies, dtype=float)
    return np.searchsorted(np.sort(eigs), energies, side="left").astype(np.int64)


def logdet_realization(real: OperatorRealization, E: float = 0.0) -> float:
    """log|det| by the cheapest exact route for the realization's shape."""
    p = real.params
    if p.d == 0:
        a = real.w_blocks[0] + (p.mu - p.E - E) * np.eye(p.N)
        sign, ld = np.linalg.slogdet(a)
        if sign == 0.0:
            raise ExactSingularity("singular d=0 block")
        return float(ld)
    if p.d == 1:
        return logdet_block_recursion(real, E, count_inertia=False).log_abs_det
    return logdet_dense(assemble_dense(real, E)).log_abs_det


# ---------------------------------------------------------------------------
# Monte Carlo moments.

@dataclass(frozen=True)
class MomentEstimate:
    """Log-domain moment estimate with batch-means error bars."""

    q: float
    sample_count: int
    sigma_hat: float          # log(mean of exp(q N M e_i)) / (N M)
    stderr: float             # batch-means standard error of sigma_hat
    e_mean: float
    e_std: float
    histogram: tuple          # (counts, bin_edges) of the e samples


def _logmeanexp(x: np.ndarray) -> float:
    m = float(np.max(x))
    return m + math.log(float(np.mean(np.exp(x - m))))


def _e_samples_chunk(args) -> np.ndarray:
    params, seed, stream_lo, stream_hi, free = args
    vals = np.empty(stream_hi - stream_lo)
    base = RandomStream(seed, 0)
    for i in range(stream_lo, stream_hi):
        real = sample_operator(params, base.child(i))
        vals[i - stream_lo] = (logdet_realization(real, 0.0) - free) \
            / (params.N * params.M)
    return vals


def moment_e_samples(params: ModelParams, samples: int, stream: RandomStream,
                     workers: int = 1) -> np.ndarray:
    """Free-energy density samples e_i over independent realizations.

    Work items are keyed by stream child index, so the result is identical
    for any worker count.
    """
    p = canonicalize(params)
    free = free_logdet(p)
    if workers <= 1:
        return _e_samples_chunk((p, stream.seed, 0, samples, free))
    bounds = np.linspace(0, samples, workers + 1).astype(int)
    jobs = [(p, stream.seed, int(lo), int(hi), free)
            for lo, hi in zip(bounds[:-1], bounds[1:]) if hi > lo]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        parts = list(pool.map(_e_samples_chunk, jobs))
    return np.concatenate(parts)


def moment_mc(params: ModelParams, q_list, samples: int, stream: RandomStream,
              workers: int = 1, n_batches: int = 32, e_bins: int = 60):
    """Estimate the reduced-moment growth rates for each q.

    Accumulation is in the log domain (the summands span hundreds of
    e-folds); error bars are batch means over contiguous sample blocks.
    """
    if samples < 2:
        raise ValueError("need at least 2 samples")
    p = canonicalize(params)
    scale = p.N * p.M
    e = moment_e_samples(p, samples, stream, workers)
    hist = np.histogram(e, bins=e_bins)
    out = []
    nb = min(n_batches, samples // 2)
    splits = np.array_split(e, nb)
    for q in np.atleast_1d(np.asarray(q_list, dtype=float)):
        if q == 0.0:
            sigma, se = 0.0, 0.0
        else:
            x = q * scale * e
            sigma = _logmeanexp(x) / scale
            batch_vals = np.array([_logmeanexp(q * scale * b) / scale for b in splits])
            se = float(np.std(batch_vals, ddof=1) / math.sqrt(nb))
        out.append(MomentEstimate(q=float(q), sample_count=samples,
                                  sigma_hat=float(sigma), stderr=se,
                                  e_mean=float(np.mean(e)), e_std=float(np.std(e)),
                                  histogram=hist))
    return out


# ---------------------------------------------------------------------------

def map_continuum_to_lattice(cont: ContinuumParams, a: float, n: int,
                             boundary: Boundary = Boundary.PERIODIC) -> ModelParams:
    """Discretize the continuum model at lattice spacing a.

    t = tilde_t / a^2 and J^2 = tilde_j^2 / a, so lattice spectra converge
    to the continuum formulas as a -> 0.
    """
    if a <= 0:
        raise ValueError("spacing must be positive")
    sites = cont.length / a
    L = int(round(sites))
    if abs(sites - L) > 1e-9 * max(1.0, sites):
        warnings.warn(f"length/a = {sites} is not integral; rounding to {L} sites")
    return ModelParams(d=1, N=n, L=max(L, 1), t=cont.tilde_t / a ** 2,
                       J=cont.tilde_j / math.sqrt(a), c=cont.c,
                       mu=cont.mu, E=cont.E, boundary=boundary)


def _dos_chunk(args) -> np.ndarray:
    params, seed, lo, hi, edges = args
    base = RandomStream(seed, 0)
    acc = np.zeros(len(edges), dtype=np.int64)
    for i in range(lo, hi):
        real = sample_operator(params, base.child(i))
        acc += eigencount_chain(real, edges)
    return acc


def dos_histogram(params: ModelParams, bin_edges, realizations: int,
                  stream: RandomStream, workers: int = 1) -> np.ndarray:
    """Disorder-averaged spectral density per site per channel.

    Binned from the exact counting function at the bin edges; returns the
    density array (len(bin_edges) - 1 values).
    """
    p = canonicalize(params)
    edges = np.asarray(bin_edges, dtype=float)
    if workers <= 1:
        acc = _dos_chunk((p, stream.seed, 0, realizations, edges))
    else:
        bounds = np.linspace(0, realizations, workers + 1).astype(int)
        jobs = [(p, stream.seed, int(lo), int(hi), edges)
                for lo, hi in zip(bounds[:-1], bounds[1:]) if hi > lo]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            acc = sum(pool.map(_dos_chunk, jobs))
    counts = np.diff(acc) / realizations
    return counts / (p.N * p.M * np.diff(edges))
