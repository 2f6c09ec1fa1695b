"""Transfer-matrix flow: determinants, node counting, Lyapunov spectra.

The two-step recursion Psi_{x+1} = (A_x/t) Psi_x - Psi_{x-1} (Psi_0 = 0,
Psi_1 = 1) carries the chain determinant: det(H - E) = t^(NM) det Psi_{M+1}.
The flow matrix Z_x = t Psi_{x+1} Psi_x^(-1) is the discrete analogue of the
log-derivative matrix; each of its negative eigenvalues is one explosion
(an eigenvalue shooting to -infinity and re-entering at +infinity), so the
accumulated count equals the spectral counting function below E.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from numba import njit

from .core import Boundary, ModelParams, RandomStream, canonicalize
from .errors import DegenerateFlow
from .operator import OperatorRealization, _diag_blocks, MomentEstimate, _logmeanexp


@dataclass(frozen=True)
class FlowResult:
    log_abs_det: float
    sign_flips: int       # explosion count = eigenvalues below E
    method: str


def riccati_logdet(real: OperatorRealization, E: float,
                   count_nodes: bool = True, _retried: bool = False) -> FlowResult:
    """Chain log-determinant from the renormalized two-step flow.

    Per-step rescaling by the largest matrix entry keeps the propagation
    finite on chains of arbitrary length; the rescale factors are positive
    so they never touch sign information.
    """
    p = real.params
    if p.d != 1 or p.boundary is not Boundary.DIRICHLET:
        raise ValueError("flow determinant is for d=1 Dirichlet chains")
    t = p.t
    blocks = _diag_blocks(real, E)
    n, m = p.N, p.M
    psi_prev = np.zeros((n, n))
    psi = np.eye(n)
    acc = 0.0    # running sum of log|det R| of the per-step renormalizations
    nodes = 0
    for x in range(m):
        psi_next = (blocks[x] / t) @ psi - psi_prev
        if count_nodes:
            try:
                z = t * np.linalg.solve(psi.T, psi_next.T).T
            except np.linalg.LinAlgError as exc:
                if _retried:
                    raise DegenerateFlow("det Psi hit zero twice") from exc
                warnings.warn("degenerate flow; retrying with 1e-12 energy shift")
                return riccati_logdet(real, E + 1e-12, count_nodes, _retried=True)
            nodes += int(np.count_nonzero(np.linalg.eigvalsh(0.5 * (z + z.T)) < 0.0))
        # renormalize the solution pair by the R factor of the leading block:
        # keeps the columns independent on arbitrarily long chains (a plain
        # magnitude rescale cannot) while logging the determinant exactly
        qmat, r = np.linalg.qr(psi_next)
        rd = np.abs(np.diag(r))
        if np.any(rd < 1e-300) or not np.all(np.isfinite(rd)):
            if _retried:
                raise DegenerateFlow("det Psi passed through zero")
            warnings.warn("degenerate flow; retrying with 1e-12 energy shift")
            return riccati_logdet(real, E + 1e-12, count_nodes, _retried=True)
        acc += float(np.sum(np.log(rd)))
        try:
            psi_prev = np.linalg.solve(r.T, psi.T).T
        except np.linalg.LinAlgError as exc:
            if _retried:
                raise DegenerateFlow("singular renormalization factor") from exc
            warnings.warn("degenerate flow; retrying with 1e-12 energy shift")
            return riccati_logdet(real, E + 1e-12, count_nodes, _retried=True)
        psi = qmat
    total = acc + n * m * math.log(t)
    return FlowResult(log_abs_det=total, sign_flips=nodes if count_nodes else -1,
                      method="riccati-flow")


# ---------------------------------------------------------------------------
# Lyapunov spectra by frame reorthogonalization.

@dataclass(frozen=True)
class LyapunovSpectrumResult:
    """Partial sums of the leading Lyapunov exponents, per lattice site."""

    partial_sums: np.ndarray   # partial_sums[n-1] = gamma_1 + ... + gamma_n
    chain_length: int
    reorth_interval: int

    @property
    def exponents(self) -> np.ndarray:
        return np.diff(self.partial_sums, prepend=0.0)


def lyapunov_sums(params: ModelParams, E: float, chain_length: int,
                  stream: RandomStream, reorth_interval: int = 10,
                  discard: int = 100) -> LyapunovSpectrumResult:
    """Benettin frame propagation of the chain transfer map.

    Pushes a 2N x N frame through the two-step recursion, QR-renormalizing
    every reorth_interval steps and accumulating log |R_ii|; the initial
    `discard` steps let the frame align before accumulation starts.
    """
    p = canonicalize(params)
    if p.d != 1:
        raise ValueError("transfer map is for d=1")
    n, t = p.N, p.t
    rng = stream.generator()
    shift = p.mu + 2.0 * t
    eye = np.eye(n)

    frame = np.zeros((2 * n, n))
    frame[:n] = eye     # top rows: Psi_{x+1}; bottom rows: Psi_x
    sums = np.zeros(n)

    def advance(steps: int, accumulate: bool) -> None:
        nonlocal frame, sums
        done = 0
        while done < steps:
            todo = min(512, steps - done)
            raw = rng.standard_normal((todo, n, n))
            goe = (raw + np.swapaxes(raw, 1, 2)) / math.sqrt(2.0 * n)
            xis = rng.standard_normal(todo) * math.sqrt(p.c / n) if p.c > 0.0 \
                else np.zeros(todo)
            for k in range(todo):
                a = p.J * (goe[k] + xis[k] * eye)
                a[np.diag_indices(n)] += shift - E
                top = (a / t) @ frame[:n] - frame[n:]
                frame[n:] = frame[:n]
                frame[:n] = top
                done += 1
                at_end = done == steps
                if (done % reorth_interval == 0) or at_end:
                    qmat, r = np.linalg.qr(frame)
                    frame = qmat
                    if accumulate:
                        sums += np.log(np.abs(np.diag(r)))

    advance(discard, accumulate=False)
    advance(chain_length, accumulate=True)
    partial = np.cumsum(sums) / chain_length
    return LyapunovSpectrumResult(partial_sums=partial, chain_length=chain_length,
                                  reorth_interval=reorth_interval)


def free_chain_rate(params: ModelParams, E: float) -> float:
    """Per-site growth rate of the disorder-free chain (all channels equal)."""
    p = canonicalize(params)
    b = (p.mu - E + 2.0 * p.t) / p.t
    if b <= 2.0:
        return 0.0
    return math.log(0.5 * (b + math.sqrt(b * b - 4.0)))


def free_massless_logdet(params: ModelParams) -> float:
    """log det of the massless free Dirichlet chain: t^(NM) (M+1)^N."""
    p = params
    return p.N * (p.M * math.log(p.t) + math.log(p.M + 1.0))


# ---------------------------------------------------------------------------
# Generalized Lyapunov exponent by Monte Carlo over chains.

@njit(cache=True)
def _chain_logdet_kernel(goe: np.ndarray, xi: np.ndarray, shift: float,
                         t: float, J: float, reorth: int = 6) -> float:
    """log|det Psi_{M+1}| + N M log t for one pre-drawn disorder chain.

    QR renormalization every few steps keeps the columns independent over
    long chains; between factorizations a scalar magnitude rescale guards
    against overflow.
    """
    m, n, _ = goe.shape
    psi_prev = np.zeros((n, n))
    psi = np.eye(n)
    acc = 0.0
    for x in range(m):
        a = J * goe[x].copy()
        for i in range(n):
            a[i, i] += J * xi[x] + shift
        psi_next = (a / t) @ psi - psi_prev
        if (x + 1) % reorth == 0 or x == m - 1:
            qmat, r = np.linalg.qr(psi_next)
            for i in range(n):
                acc += math.log(abs(r[i, i]))
            psi_prev = np.linalg.solve(r.T.copy(), psi.T.copy()).T.copy()
            psi = qmat.copy()
        else:
            s = np.max(np.abs(psi_next))
            psi_prev = psi / s
            psi = psi_next / s
            acc += n * math.log(s)
    return acc + n * m * math.log(t)


def chain_logdet_samples(params: ModelParams, E: float, chain_length: int,
                         samples: int, stream: RandomStream) -> np.ndarray:
    """log|det(H - E)| over independent Dirichlet chains of given length."""
    p = canonicalize(params)
    if p.d != 1:
        raise ValueError("chains are d=1")
    n = p.N
    shift = p.mu - E + 2.0 * p.t
    out = np.empty(samples)
    for s in range(samples):
        rng = stream.child(s).generator()
        raw = rng.standard_normal((chain_length, n, n))
        goe = (raw + np.swapaxes(raw, 1, 2)) / math.sqrt(2.0 * n)
        if p.c > 0.0:
            xi = rng.standard_normal(chain_length) * math.sqrt(p.c / n)
        else:
            xi = np.zeros(chain_length)
        out[s] = _chain_logdet_kernel(goe, xi, shift, p.t, p.J)
    return out


def gle_mc(params: ModelParams, q: float, E: float, chain_length: int,
           samples: int, stream: RandomStream, n_batches: int = 32) -> MomentEstimate:
    """Monte Carlo generalized Lyapunov exponent per site.

    (1/(N M)) log < |det(H-E)|^q / det(free massless chain)^q >, accumulated
    in the log domain; divide by the lattice spacing for the continuum rate.
    """
    p = canonicalize(params)
    work = ModelParams(d=1, N=p.N, L=chain_length, t=p.t, J=p.J, c=p.c,
                       mu=p.mu, E=0.0, boundary=Boundary.DIRICHLET)
    scale = work.N * work.M
    free0 = free_massless_logdet(work)
    vals = chain_logdet_samples(work, E, chain_length, samples, stream) - free0
    if q == 0.0:
        return MomentEstimate(q=0.0, sample_count=samples, sigma_hat=0.0, stderr=0.0,
                              e_mean=float(np.mean(vals)) / scale,
                              e_std=float(np.std(vals)) / scale,
                              histogram=np.histogram(vals / scale, bins=40))
    x = q * vals
    lam = _logmeanexp(x) / scale
    nb = min(n_batches, samples // 2)
    batches = np.array_split(x, nb)
    bvals = np.array([_logmeanexp(b) / scale for b in batches])
    se = float(np.std(bvals, ddof=1) / math.sqrt(nb))
    return MomentEstimate(q=q, sample_count=samples, sigma_hat=float(lam), stderr=se,
                          e_mean=float(np.mean(vals)) / scale,
                          e_std=float(np.std(vals)) / scale,
                          histogram=np.histogram(vals / scale, bins=40))
