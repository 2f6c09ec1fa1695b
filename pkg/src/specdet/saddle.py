"""Saddle-point equations for the tilt field driving the moment growth rate.

The optimal uniform tilt xi* solves xi = q f'(xi + mu/J); equivalently, with
mu_q = mu + (1 - 1/q) J xi and an auxiliary y >= 0,

    xi = J q int_k (mu_q + w_k) / ((mu_q + w_k)^2 + J^4 y^2),
    y  = y  int_k J^2        / ((mu_q + w_k)^2 + J^4 y^2),

with w_k = -t Delta(k).  Two branches exist: the simple one (y = 0) and the
complex one (y > 0); the boundary is mu = mu_b(q), expressed through the
Larkin mass mu_c.  Both branches are solved by bracketed root finding in the
single unknown mu_q, which is monotone and robust.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .core import ModelParams, canonicalize
from .errors import NoRealRoot, NoRoot, NonConvergence, OutOfPhase
from .pastur import Continuum1D, _omega, f_integral, resolve_grid
from .core import SaddlePhase


# ---------------------------------------------------------------------------
# Momentum integrals.  For lattices these are plain means over the kinetic
# eigenvalues; for the d=1 continuum they come from
# int dk/2pi (k^2 + w)^(-1) = 1/(2 sqrt(w)) continued to complex w.

def _s1(mu_q: float, omega) -> float:
    """int_k 1/(mu_q + w_k); requires mu_q + w_k > 0."""
    if isinstance(omega, Continuum1D):
        return 1.0 / (2.0 * math.sqrt(mu_q))
    return float(np.mean(1.0 / (mu_q + omega)))


def _s2(mu_q: float, omega) -> float:
    """int_k 1/(mu_q + w_k)^2."""
    if isinstance(omega, Continuum1D):
        return 1.0 / (4.0 * mu_q ** 1.5)
    return float(np.mean(1.0 / (mu_q + omega) ** 2))


def _c_pair(mu_q: float, y2j4: float, omega) -> tuple[float, float]:
    """(int_k (mu_q+w)/((mu_q+w)^2 + Y), int_k 1/((mu_q+w)^2 + Y)), Y = J^4 y^2."""
    if isinstance(omega, Continuum1D):
        w = complex(mu_q, math.sqrt(y2j4))
        v = 1.0 / (2.0 * np.sqrt(w))
        return v.real, -v.imag / math.sqrt(y2j4)
    denom = (mu_q + omega) ** 2 + y2j4
    return float(np.mean((mu_q + omega) / denom)), float(np.mean(1.0 / denom))


def _omega_floor(omega) -> float:
    """Lower limit of admissible mu_q for positive-spectrum integrals."""
    if isinstance(omega, Continuum1D):
        return 0.0
    return -float(np.min(omega))


def _grid_omega(params: ModelParams, grid):
    grid = resolve_grid(params, grid)
    if isinstance(grid, Continuum1D):
        return grid
    return _omega(params, grid)


# ---------------------------------------------------------------------------

def larkin_mass(params: ModelParams, grid=None) -> float:
    """Unique mu_c > floor solving 1 = J^2 int_k (mu_c + w_k)^(-2)."""
    p = canonicalize(params)
    omega = _grid_omega(p, grid)
    if isinstance(omega, Continuum1D):
        return (p.J / 2.0) ** (4.0 / 3.0)
    j2 = p.J ** 2
    floor = _omega_floor(omega)

    def h(mu_c):
        return j2 * _s2(mu_c, omega) - 1.0

    lo = floor + 1e-12 * max(1.0, abs(floor), p.J)
    while h(lo) < 0.0:
        lo = floor + 0.5 * (lo - floor)
        if lo - floor < 1e-300:
            raise NoRoot("disorder too weak: replicon integral never reaches 1")
    hi = floor + max(10.0 * p.J, 1.0)
    while h(hi) > 0.0:
        hi = floor + 4.0 * (hi - floor)
        if hi > 1e12 * max(1.0, p.J):
            raise NoRoot("no Larkin mass in bracket")
    return brentq(h, lo, hi, xtol=1e-14, rtol=8.9e-16)


def phase_boundary_mu_b(q: float, params: ModelParams, grid=None) -> float:
    """mu_b(q) = mu_c - (q - 1) J^2 int_k (mu_c + w_k)^(-1)."""
    if q <= -1:
        raise OutOfPhase("requires q > -1")
    p = canonicalize(params)
    omega = _grid_omega(p, grid)
    if isinstance(omega, Continuum1D):
        return (3.0 - 2.0 * q) * (p.J / 2.0) ** (4.0 / 3.0)
    mu_c = larkin_mass(p, grid)
    return mu_c - (q - 1.0) * p.J ** 2 * _s1(mu_c, omega)


@dataclass(frozen=True)
class SaddleSolution:
    """Solution of the coupled tilt equations at one (q, mu)."""

    q: float
    xi_star: float
    y: float
    mu_q: float
    phase: SaddlePhase
    sigma_q: float


def _solve_simple(q: float, mu: float, j: float, omega) -> tuple[float, float]:
    """Simple branch: returns (xi_star, mu_q); largest admissible root."""
    if q == 0.0:
        return 0.0, mu

    def resid(mu_q):
        return mu_q - mu - (q - 1.0) * j * j * _s1(mu_q, omega)

    floor = _omega_floor(omega)
    eps = 1e-13 * max(1.0, j, abs(mu))
    if q >= 1.0:
        # resid is increasing: unique root above the floor
        lo = floor + eps
        while resid(lo) > 0.0:
            eps *= 0.1
            lo = floor + eps
            if eps < 1e-280:
                raise NoRoot("simple branch: no bracket above spectrum floor")
        hi = max(mu, floor) + 10.0 * j * j * max(q, 1.0) + 1.0
        while resid(hi) < 0.0:
            hi = floor + 4.0 * (hi - floor)
        mu_q = brentq(resid, lo, hi, xtol=1e-14, rtol=8.9e-16)
    else:
        # two roots may exist; the physical one is the largest
        res = minimize_scalar(resid, bounds=(floor + eps, max(mu, floor + 1.0) + 10.0 * j * j + 1.0),
                              method="bounded", options={"xatol": 1e-12})
        mu_star = res.x
        if resid(mu_star) > 0.0:
            raise NoRealRoot(f"simple branch: no real root (mu < existence threshold) at q={q}, mu={mu}")
        hi = max(mu, mu_star) + 10.0 * j * j + 1.0
        while resid(hi) < 0.0:
            hi = 4.0 * hi + 1.0
        mu_q = brentq(resid, mu_star, hi, xtol=1e-14, rtol=8.9e-16)
    xi = q * j * _s1(mu_q, omega)
    return xi, mu_q


def _solve_complex(q: float, mu: float, j: float, omega, mu_c: float):
    """Complex branch: returns (xi_star, y, mu_q) with y > 0, or None."""
    j2 = j * j

    def y2j4_of(mu_q):
        # root of  J^2 C2(mu_q, Y) = 1  in Y (decreasing in Y)
        def g(logy):
            return j2 * _c_pair(mu_q, math.exp(logy), omega)[1] - 1.0
        hi = math.log(j2 * j2 * 10.0)
        while g(hi) > 0.0:
            hi += 2.0
        lo = hi - 4.0
        while g(lo) < 0.0:
            lo -= 4.0
            if lo < -700:
                return 0.0
        return math.exp(brentq(g, lo, hi, xtol=1e-13, rtol=8.9e-16))

    def resid(mu_q):
        y2j4 = y2j4_of(mu_q)
        c1, _ = _c_pair(mu_q, y2j4, omega)
        xi = q * j * c1
        return mu + (1.0 - 1.0 / q) * j * xi - mu_q if q != 0.0 else mu - mu_q

    hi = mu_c * (1.0 - 1e-10) if mu_c > 0 else mu_c - 1e-10
    r_hi = resid(hi)
    if r_hi > 0.0:
        return None
    lo = hi - max(1.0, abs(mu), j2)
    for _ in range(80):
        if resid(lo) > 0.0:
            break
        lo -= max(1.0, abs(mu), j2)
    else:
        return None
    mu_q = brentq(resid, lo, hi, xtol=1e-14, rtol=8.9e-16)
    y2j4 = y2j4_of(mu_q)
    c1, _ = _c_pair(mu_q, y2j4, omega)
    xi = q * j * c1
    y = math.sqrt(y2j4) / j2
    return xi, y, mu_q


def saddle_solve(q: float, params: ModelParams, grid=None) -> SaddleSolution:
    """Solve the tilt equations, selecting the branch by the phase boundary
    (and, where both branches exist, by the lower action)."""
    if q <= -1:
        raise OutOfPhase("requires q > -1")
    p = canonicalize(params)
    omega = _grid_omega(p, grid)
    grid_r = resolve_grid(p, grid)
    mu = p.mu
    j = p.J
    mu_c = larkin_mass(p, grid)
    mu_b = phase_boundary_mu_b(q, p, grid)

    def action(xi):
        return 0.5 * xi * xi - q * f_integral(xi, p, grid_r)

    if q == 0.0:
        phase = SaddlePhase.SIMPLE if mu >= mu_b else SaddlePhase.COMPLEX
        from .pastur import spectral_density as _sd
        if isinstance(grid_r, Continuum1D):
            from .resolvent import dos_continuum_d1
            y0 = math.pi * float(dos_continuum_d1(-mu, j))
        else:
            y0 = math.pi * _sd(-mu, p, grid_r)
        return SaddleSolution(q=0.0, xi_star=0.0, y=y0, mu_q=mu, phase=phase, sigma_q=0.0)

    candidates = []
    if mu >= mu_b:
        xi, mu_q = _solve_simple(q, mu, j, omega)
        candidates.append((xi, 0.0, mu_q, SaddlePhase.SIMPLE))
    else:
        sol = _solve_complex(q, mu, j, omega, mu_c)
        if sol is not None and sol[1] > 0.0:
            candidates.append((sol[0], sol[1], sol[2], SaddlePhase.COMPLEX))
        # near or past degeneracies the simple branch may win; try it too
        try:
            xi, mu_q = _solve_simple(q, mu, j, omega)
            candidates.append((xi, 0.0, mu_q, SaddlePhase.SIMPLE))
        except (NoRoot, NoRealRoot):
            pass
    if not candidates:
        raise NonConvergence(f"no saddle branch solvable at q={q}, mu={mu}")
    if len(candidates) > 1:
        candidates.sort(key=lambda cand: action(cand[0]))
    xi, y, mu_q, phase = candidates[0]
    sigma = -0.5 * xi * xi + q * f_integral(xi, p, grid_r)
    return SaddleSolution(q=q, xi_star=xi, y=y, mu_q=mu_q, phase=phase, sigma_q=sigma)
