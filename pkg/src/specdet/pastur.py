"""Self-consistent resolvent of the disorder-averaged kinetic operator.

The mean resolvent g(lam) = i r_lam of K = -t*Laplacian + J*(GOE blocks)
solves the fixed point

    g = int_k 1 / (lam + t*Delta(k) - J^2 g),

with the branch fixed by Im g >= 0 on the Im lam = 0^- side, so that the
spectral density is rho_K(lam) = Im g / pi.  From g we build the
log-potential f(xi) = int rho_K(alpha) ln|alpha + J xi| d_alpha that drives
every saddle-point quantity.  Only the combination

    f(xi + mu/J) - int_k ln(mu - t*Delta(k))

is finite in the continuum, so that regularized combination is what the
public entry point returns.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from .core import ModelParams, MomentumGrid, canonicalize, kinetic_eigenvalues, laplacian_eigenvalues
from .errors import NonConvergence, QuadratureFailure
from .resolvent import (dos_continuum_d1, dos_diff_continuum_d1, spectral_edge,
                        double_root, beta_from_tilde_j)

_MAX_ITER = 10_000
_TOL = 1e-12
_DAMPING = 0.5


@dataclass(frozen=True)
class Continuum1D:
    """Grid marker: momentum integrals done in closed form for the d=1
    continuum at unit elastic coefficient (t folded into the lattice map)."""

    tilde_t: float = 1.0

    def __post_init__(self):
        if self.tilde_t != 1.0:
            raise ValueError("continuum closed forms assume unit elastic coefficient")


def resolve_grid(params: ModelParams, grid=None):
    return params.grid() if grid is None else grid


def _omega(params: ModelParams, grid) -> np.ndarray:
    """Kinetic eigenvalues -t*Delta(k) >= 0 for a lattice grid."""
    if isinstance(grid, MomentumGrid):
        return -params.t * laplacian_eigenvalues(grid)
    return kinetic_eigenvalues(params)


def _fixed_point(lam_c: complex, omega: np.ndarray, j2: float, g0: complex,
                 tol: float, max_iter: int) -> tuple[complex, float]:
    """Damped fixed point with Newton polish; returns (g, residual)."""
    g = g0
    resid = np.inf
    for it in range(max_iter):
        m = np.mean(1.0 / (lam_c - omega - j2 * g))
        resid = abs(m - g)
        if resid < 1e-4:
            break
        g = (1.0 - _DAMPING) * g + _DAMPING * m
    for _ in range(60):
        denom = lam_c - omega - j2 * g
        f = np.mean(1.0 / denom) - g
        resid = abs(f)
        if resid < tol:
            return g, resid
        fp = j2 * np.mean(1.0 / denom ** 2) - 1.0
        if fp == 0:
            break
        step = f / fp
        # keep Newton from jumping branches near the band edge
        if abs(step) > 1.0 + abs(g):
            step *= (1.0 + abs(g)) / abs(step)
        g = g - step
    return g, resid


def pastur_resolvent(lam, params: ModelParams, grid=None, side: int = -1,
                     tol: float = _TOL, max_iter: int = _MAX_ITER) -> complex:
    """Solve the self-consistency equation for g = i r_lam.

    lam may be complex; a real lam is approached from Im lam = side * 0
    (side=-1, the default, makes Im g = pi * rho_K >= 0).  Raises
    NonConvergence if the tolerance is not met or the branch flips.
    """
    grid = resolve_grid(params, grid)
    omega = _omega(params, grid)
    j2 = params.J ** 2
    lam = complex(lam)
    scale = params.J + math.sqrt(float(np.max(omega))) if omega.size else params.J

    if lam.imag != 0.0:
        g0 = np.mean(1.0 / (lam - omega))
        g, resid = _fixed_point(lam, omega, j2, g0, tol, max_iter)
        if resid >= tol:
            raise NonConvergence(f"pastur fixed point residual {resid:.3e}", resid)
        return g

    # real axis: continue from a finite imaginary offset down to zero
    etas = [0.05 * scale * 10.0 ** (-k) for k in range(10)] + [0.0]
    g = None
    for eta in etas:
        lam_c = complex(lam.real, side * eta)
        g0 = g if g is not None else np.mean(1.0 / (lam_c - omega))
        g, resid = _fixed_point(lam_c, omega, j2, g0, tol, max_iter)
    if resid >= tol:
        raise NonConvergence(f"pastur residual {resid:.3e} at lam={lam.real}", resid)
    # a genuine branch flip gives Im g of order -1; tiny negatives are the
    # real solution outside the spectrum seen through roundoff
    if side < 0 and g.imag < -1e-6 * max(1.0, abs(g)):
        raise NonConvergence(f"branch misselection: Im g = {g.imag:.3e} < 0")
    if side < 0:
        g = complex(g.real, max(g.imag, 0.0))
    return g


def spectral_density(lam, params: ModelParams, grid=None) -> float:
    """rho_K(lam) = Im(i r_lam)/pi on the Im lam = 0^- side."""
    return pastur_resolvent(lam, params, grid).imag / math.pi


def log_potential_slope(xi: float, params: ModelParams, grid=None) -> float:
    """f'(xi) = -J Re(i r) at lam = -J xi (principal-value derivative)."""
    g = pastur_resolvent(-params.J * xi, params, grid)
    return -params.J * g.real


# ---------------------------------------------------------------------------
# Support of the density (needed as quadrature limits).

_SUPPORT_CACHE: dict = {}


def _support_key(params: ModelParams, grid):
    return (params.d, params.L, params.t, params.J, params.boundary, grid)


def density_support(params: ModelParams, grid=None, n_scan: int = 400) -> list[tuple[float, float]]:
    """Intervals on which rho_K > 0, located by scan + bisection.

    Independent of mu, E and c, so results are cached per kinetic operator.
    """
    grid = resolve_grid(params, grid)
    key = _support_key(params, grid)
    if key in _SUPPORT_CACHE:
        return _SUPPORT_CACHE[key]
    omega = _omega(params, grid)
    j = params.J
    lo = -2.5 * j - 1e-9
    hi = float(np.max(omega)) + 2.5 * j + 1e-9
    xs = np.linspace(lo, hi, n_scan)
    pos = np.array([spectral_density(x, params, grid) > 1e-10 for x in xs])

    def refine(p_lo, p_hi):
        # indicator differs between the two points; bisect the jump
        f_lo = spectral_density(p_lo, params, grid) > 1e-10
        for _ in range(48):
            m = 0.5 * (p_lo + p_hi)
            if (spectral_density(m, params, grid) > 1e-10) == f_lo:
                p_lo = m
            else:
                p_hi = m
            if abs(p_hi - p_lo) < 1e-12 * (hi - lo):
                break
        return 0.5 * (p_lo + p_hi)

    intervals = []
    i = 0
    while i < n_scan:
        if pos[i]:
            left = xs[i] if i == 0 else refine(xs[i - 1], xs[i])
            k = i
            while k + 1 < n_scan and pos[k + 1]:
                k += 1
            right = xs[k] if k == n_scan - 1 else refine(xs[k + 1], xs[k])
            intervals.append((left, right))
            i = k + 1
        else:
            i += 1
    if not intervals:
        raise NonConvergence("no spectral support detected in scan window")
    _SUPPORT_CACHE[key] = intervals
    return intervals


# ---------------------------------------------------------------------------
# d=0 closed-form log-potential (semicircle of radius 2J).

def log_potential_d0(u: float, J: float) -> float:
    """f(u) = log J + u^2/4 - 1/2 inside the band, matched branch outside."""
    au = abs(u)
    if au <= 2.0:
        return math.log(J) + u * u / 4.0 - 0.5
    r = math.sqrt(au * au - 4.0)
    return math.log(J) + (u * u - 2.0) / 4.0 - au * r / 4.0 \
        + math.log((au + r) / 2.0)


def log_potential_slope_d0(u: float) -> float:
    au = abs(u)
    if au <= 2.0:
        return u / 2.0
    return math.copysign((au - math.sqrt(au * au - 4.0)) / 2.0, u)


# ---------------------------------------------------------------------------
# Regularized combination F(xi) = f(xi + mu/J) - int_k ln(mu - t Delta(k)).

def _f_lattice(u: float, params: ModelParams, grid) -> float:
    """f(u) for a lattice grid by quadrature of the self-consistent density."""
    j = params.J
    total = 0.0
    for (a, b) in density_support(params, grid):
        sing = -j * u
        pts = [sing] if a < sing < b else None

        def integrand(alpha):
            return spectral_density(alpha, params, grid) * math.log(abs(alpha + j * u))

        val, err = quad(integrand, a, b, points=pts, limit=400,
                        epsabs=1e-10, epsrel=1e-9)
        if err > 1e-6 * max(1.0, abs(val)):
            raise QuadratureFailure(f"log-potential quadrature error {err:.2e}")
        total += val
    return total


def _free_log_term(params: ModelParams, grid) -> float:
    """int_k ln(mu - t Delta(k)) over a lattice grid."""
    omega = _omega(params, grid)
    vals = params.mu_eff + omega
    if np.any(vals <= 0):
        raise ValueError("free operator not positive: mu - t Delta(k) <= 0")
    return float(np.mean(np.log(vals)))


def _f_reg_continuum_d1(u: float, mu: float, J: float) -> float:
    """f(u) - int dk/2pi log(mu + k^2) for the d=1 continuum, both pieces
    regularized against the free density rho_0 = theta(a)/(2 pi sqrt(a))."""
    edge = spectral_edge(J)
    sing = -J * u

    def rho(alpha):
        return dos_continuum_d1(alpha, J)

    def diff_tail(alpha):
        return dos_diff_continuum_d1(alpha, J) * math.log(abs(alpha + J * u))

    pieces = []
    # from the edge to 0: full density
    pts = [sing] if edge < sing < 0.0 else None
    val, err = quad(lambda a: rho(a) * math.log(abs(a + J * u)), edge, 0.0,
                    points=pts, limit=400, epsabs=1e-11, epsrel=1e-10)
    pieces.append((val, err))
    # from 0 to a finite cut: density minus free density
    cut = max(4.0 * abs(J * u), 40.0 * (J / 2.0) ** (4.0 / 3.0), 1.0)
    pts = [sing] if 0.0 < sing < cut else None
    val, err = quad(diff_tail, 0.0, cut, points=pts, limit=400,
                    epsabs=1e-11, epsrel=1e-10)
    pieces.append((val, err))
    # far tail: the difference decays as alpha^(-7/2); integrate on a log
    # scale and truncate at `big` (leaves < 1e-12 behind)
    big = 2e4 * max(1.0, (J / 2.0) ** (4.0 / 3.0), abs(J * u))
    val, err = quad(lambda s: diff_tail(cut * math.exp(s)) * cut * math.exp(s),
                    0.0, math.log(big / cut), limit=200, epsabs=1e-12, epsrel=1e-10)
    pieces.append((val, err))
    total = sum(v for v, _ in pieces)
    toterr = sum(e for _, e in pieces)
    if toterr > 1e-6:
        raise QuadratureFailure(f"continuum log-potential quadrature error {toterr:.2e}")
    # free-density counterterms: int rho_0 [ln(a + Ju) - ln(a + mu)] = sqrt(Ju) - sqrt(mu)
    free = (math.sqrt(J * u) if J * u > 0.0 else 0.0) - math.sqrt(mu)
    return total + free


def f_integral(xi: float, params: ModelParams, grid=None) -> float:
    """Regularized log-potential F(xi) = f(xi + mu/J) - int_k ln(mu - t Delta).

    Only this combination stays finite in the continuum; on lattices both
    terms exist separately and are combined exactly.
    """
    p = canonicalize(params)
    grid = resolve_grid(p, grid)
    u = xi + p.mu / p.J
    if isinstance(grid, Continuum1D):
        return _f_reg_continuum_d1(u, p.mu, p.J)
    if p.d == 0:
        return log_potential_d0(u, p.J) - math.log(p.mu)
    return _f_lattice(u, p, grid) - _free_log_term(p, grid)


# ---------------------------------------------------------------------------
# Closed-form slope of the continuum log-potential (via the double root).

def log_potential_slope_continuum_d1(u: float, J: float) -> float:
    """f'(u) = (Ju - Re z_a(Ju)^2)/J for the d=1 continuum density."""
    a = J * u
    za = double_root(a, beta_from_tilde_j(J))
    return (a - (za * za).real) / J
