"""Moment growth rates, large-deviation rate function, and Lyapunov shifts.

sigma_q is the large-(N, volume) growth rate of the reduced determinant
moments.  Closed forms exist for d=0 (both phases) and for the d=1 continuum
simple phase; the d=1 complex phase integrates d sigma/d mu from its value at
the phase boundary; generic lattices go through the saddle solver.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad, solve_ivp
from scipy.optimize import brentq, root

from .core import ModelParams, canonicalize, SaddlePhase
from .errors import (IntegrationError, NonConvergence, NoRealRoot, OutOfPhase,
                     OutOfRange)
from .pastur import (Continuum1D, f_integral, log_potential_d0,
                     log_potential_slope, log_potential_slope_continuum_d1,
                     log_potential_slope_d0, resolve_grid)
from .saddle import larkin_mass, phase_boundary_mu_b, saddle_solve


# ---------------------------------------------------------------------------
# d = 0 closed forms.

def sigma_q_d0(q: float, mu: float, J: float) -> float:
    if q <= -1:
        raise OutOfRange("requires q > -1")
    if mu <= 0:
        raise OutOfPhase("d=0 closed forms require mu > 0")
    if q == 0.0:
        return 0.0
    mu_b = (2.0 - q) * J
    if mu >= mu_b:
        if abs(q - 1.0) < 1e-9:
            # expand the 0/0 ratio around q = 1
            dq = q - 1.0
            return dq * J * J / (2.0 * mu * mu) \
                + (mu * mu - J * J) * J * J * dq * dq / (2.0 * mu ** 4)
        disc = math.sqrt(mu * mu + 4.0 * J * J * (q - 1.0))
        t1 = -q * (mu * mu - mu * disc) / (4.0 * J * J * (q - 1.0))
        t2 = q * math.log(1.0 + disc / mu)
        return t1 + t2 - 0.5 * q * (1.0 + 2.0 * math.log(2.0))
    return q * mu * mu / (2.0 * (2.0 - q) * J * J) + q * math.log(J / mu) - 0.5 * q


def xi_star_d0(q: float, mu: float, J: float) -> float:
    """Optimal tilt in d=0 (both phases, continuous across mu_b)."""
    if q == 0.0:
        return 0.0
    if mu >= (2.0 - q) * J:
        return 2.0 * J * q / (mu + math.sqrt(mu * mu + 4.0 * J * J * (q - 1.0)))
    return (q / (2.0 - q)) * mu / J


def e_typ_d0(mu: float, J: float) -> float:
    if mu <= 0:
        raise OutOfPhase("requires mu > 0")
    base = -0.5 + mu * mu / (4.0 * J * J)
    if mu < 2.0 * J:
        return base + math.log(J / mu)
    r = math.sqrt(mu * mu / (J * J) - 4.0)
    return base - mu * r / (4.0 * J) + math.log(0.5 * (1.0 + math.sqrt(1.0 - 4.0 * J * J / (mu * mu))))


def var_e_d0(mu: float, J: float) -> float:
    if mu <= 2.0 * J:
        return mu * mu / (4.0 * J * J)
    # mu^2 - mu sqrt(mu^2 - 4J^2) cancels badly at large mu; expand it as
    # 4J^2 / (1 + sqrt(1 - 4J^2/mu^2)) instead
    x = 4.0 * J * J / (mu * mu)
    return 2.0 / (1.0 + math.sqrt(1.0 - x)) - 1.0


def rate_scaling_phi(x):
    """Scaling function of the d=0 rate function, phi(x) = 1 + 2x - sqrt(1+4x)."""
    x = np.asarray(x, dtype=float)
    out = 1.0 + 2.0 * x - np.sqrt(1.0 + 4.0 * x)
    return out if out.ndim else float(out)


# ---------------------------------------------------------------------------
# d = 1 continuum.

def larkin_mass_d1(J: float) -> float:
    return (J / 2.0) ** (4.0 / 3.0)


def mu_b_d1(q: float, J: float) -> float:
    return (3.0 - 2.0 * q) * larkin_mass_d1(J)


def mu_q_d1_simple(q: float, mu: float, J: float) -> float:
    """Root of mu_q - (J^2/2)(q-1)/sqrt(mu_q) = mu on the physical branch."""
    c = 0.5 * J * J * (q - 1.0)
    if abs(c) < 1e-300:
        return mu
    # v = sqrt(mu_q):  v^3 - mu v - c = 0
    roots = np.roots([1.0, 0.0, -mu, -c])
    real = roots[np.abs(roots.imag) < 1e-9 * (1.0 + np.abs(roots.real))].real
    real = real[real > 0.0]
    if real.size == 0:
        raise NoRealRoot(f"no positive root for mu_q at q={q}, mu={mu}")
    return float(np.max(real)) ** 2


def sigma_q_d1_simple(q: float, mu: float, J: float) -> float:
    """Closed-form growth rate in the d=1 continuum simple phase."""
    if q <= -1:
        raise OutOfRange("requires q > -1")
    if q == 0.0:
        return 0.0
    if mu <= 0:
        raise OutOfPhase("requires mu > 0")
    mu_b = mu_b_d1(q, J)
    if mu < mu_b - 1e-12 * (abs(mu_b) + 1.0):
        if q < 1.0:
            mu_star3 = 3.0 * (1.0 - q) ** (2.0 / 3.0) * larkin_mass_d1(J)
            if mu < mu_star3:
                raise NoRealRoot(f"mu={mu} below existence threshold {mu_star3}")
        raise OutOfPhase(f"simple phase requires mu >= mu_b = {mu_b}")
    mu_q = mu_q_d1_simple(q, mu, J)
    return q * (math.sqrt(mu_q) - math.sqrt(mu) - J * J * (q - 1.0) / (8.0 * mu_q))


def sigma_q_d1_transition(q: float, J: float) -> float:
    """Value at mu = mu_b: q (1 - sqrt(3-2q) - (q-1)/2) (J/2)^(2/3)."""
    return q * (1.0 - math.sqrt(3.0 - 2.0 * q) - 0.5 * (q - 1.0)) * (J / 2.0) ** (2.0 / 3.0)


class _ComplexBranch:
    """Solver for the complex-phase saddle of the d=1 continuum.

    Works in the complex variable w = mu_q + i J^2 y; with v = 1/(2 sqrt(w))
    the saddle conditions read

        Re w = mu + (q-1) J^2 Re v,      Im w = -J^2 Im v,

    valid also when mu_q goes negative (deep complex phase).  Writing
    w = R exp(i theta) with theta in (0, pi), the second condition gives
    R in closed form, R(theta) = (J^2 / (4 cos(theta/2)))^(2/3), leaving a
    single bracketed root solve in theta.
    """

    def __init__(self, q: float, J: float):
        self.q = q
        self.J = J
        self.J2 = J * J

    def _radius(self, theta: float) -> float:
        return (self.J2 / (4.0 * math.cos(0.5 * theta))) ** (2.0 / 3.0)

    def _mismatch(self, theta: float, mu: float) -> float:
        r = self._radius(theta)
        return r * math.cos(theta) \
            - (self.q - 1.0) * self.J2 * math.cos(0.5 * theta) / (2.0 * math.sqrt(r)) \
            - mu

    def solve(self, mu: float) -> complex:
        lo, hi = 1e-14, math.pi - 1e-13
        f_lo = self._mismatch(lo, mu)
        if f_lo <= 0.0:
            # at theta -> 0 the mismatch is mu_b - mu, positive inside the
            # complex phase; exactly at the boundary the root sits at theta=0
            if f_lo > -1e-9 * (abs(mu) + 1.0):
                theta = lo
            else:
                raise NonConvergence(f"no complex saddle at mu={mu} (mismatch {f_lo:.3e})")
        else:
            theta = brentq(self._mismatch, lo, hi, args=(mu,), xtol=1e-15, rtol=8.9e-16)
        r = self._radius(theta)
        return complex(r * math.cos(theta), r * math.sin(theta))

    def xi_star(self, mu: float) -> float:
        w = self.solve(mu)
        v = 1.0 / (2.0 * np.sqrt(w))
        return self.q * self.J * v.real


def xi_star_d1(q: float, mu: float, J: float) -> float:
    """Optimal tilt for the d=1 continuum at any 0 < mu."""
    if mu >= mu_b_d1(q, J):
        if q == 0.0:
            return 0.0
        mu_q = mu_q_d1_simple(q, mu, J)
        return 0.5 * q * J / math.sqrt(mu_q)
    return _ComplexBranch(q, J).xi_star(mu)


def sigma_q_d1_complex(q: float, mu: float, J: float, rtol: float = 1e-9) -> float:
    """Complex-phase growth rate by integrating d sigma/d mu from mu_b.

    d sigma/d mu = xi*(mu)/J - (q/2) mu^(-1/2), anchored at the transition
    value; the saddle is re-solved at every integrator evaluation.
    """
    if q <= -1:
        raise OutOfRange("requires q > -1")
    mu_b = mu_b_d1(q, J)
    tol = 1e-12 * (abs(mu_b) + 1.0)
    if not 0.0 < mu <= mu_b + tol:
        raise OutOfPhase(f"complex phase requires 0 < mu < mu_b = {mu_b}")
    if q == 0.0:
        return 0.0
    anchor = sigma_q_d1_transition(q, J)
    if mu >= mu_b - tol:
        return anchor
    branch = _ComplexBranch(q, J)

    def rhs(m, _y):
        return [branch.xi_star(m) / J - 0.5 * q / math.sqrt(m)]

    sol = solve_ivp(rhs, (mu_b, mu), [anchor], method="RK45",
                    rtol=rtol, atol=1e-12, dense_output=False)
    if not sol.success:
        raise IntegrationError(f"sigma integration failed: {sol.message}")
    return float(sol.y[0, -1])


def sigma_q_d1(q: float, mu: float, J: float) -> float:
    if mu >= mu_b_d1(q, J):
        return sigma_q_d1_simple(q, mu, J)
    return sigma_q_d1_complex(q, mu, J)


def e_typ_d1_saddle(mu: float, J: float) -> float:
    """Typical value via the q->0 limit of the simple-phase chain (mu > 3 mu_c)."""
    mu_c = larkin_mass_d1(J)
    if mu <= 3.0 * mu_c:
        raise OutOfPhase("saddle-chain form requires mu > 3 (J/2)^(4/3)")
    # q = 0 cubic: v^3 - mu v + J^2/2 = 0, largest positive root
    roots = np.roots([1.0, 0.0, -mu, 0.5 * J * J])
    real = roots[np.abs(roots.imag) < 1e-9].real
    real = real[real > 0.0]
    if real.size == 0:
        raise NoRealRoot("no positive root in the q=0 cubic")
    mu_0 = float(np.max(real)) ** 2
    return math.sqrt(mu_0) - math.sqrt(mu) + J * J / (8.0 * mu_0)


def e_typ_d1_dos(mu: float, J: float) -> float:
    """Typical value from the density-of-states integral (valid for all mu > 0)."""
    if mu <= 0:
        raise OutOfPhase("requires mu > 0")
    from .resolvent import _g_minus_free_scaled
    scale = (J / 2.0) ** (4.0 / 3.0)
    mut = mu / scale

    def g(lam):
        s = math.sqrt(1.0 + lam ** 3)
        return (1.0 + s) ** (2.0 / 3.0) - abs(1.0 - s) ** (2.0 / 3.0)

    def integrand(lam):
        # for lam > 0 evaluate the free-density-subtracted combination in a
        # cancellation-safe form
        if lam > 0:
            return 0.75 * _g_minus_free_scaled(lam) * math.log(abs(mut + 3.0 * lam))
        return 0.75 * g(lam) * math.log(abs(mut + 3.0 * lam))

    sing = -mut / 3.0
    pts = sorted({0.0} | ({sing} if -1.0 < sing < 0.0 else set()))
    val1, err1 = quad(integrand, -1.0, 1.0, points=pts, limit=400,
                      epsabs=1e-12, epsrel=1e-11)
    val2, err2 = quad(lambda s: integrand(math.exp(s)) * math.exp(s),
                      0.0, math.log(1e6), limit=200, epsabs=1e-12, epsrel=1e-11)
    return math.sqrt(3.0) / (2.0 * math.pi) * (J / 2.0) ** (2.0 / 3.0) * (val1 + val2)


# ---------------------------------------------------------------------------
# Master dispatch.

def sigma_q(q: float, params: ModelParams, grid=None) -> float:
    """Moment growth rate; closed forms where available, saddle solver else."""
    if q <= -1:
        raise OutOfRange("requires q > -1")
    p = canonicalize(params)
    grid_r = resolve_grid(p, grid)
    if isinstance(grid_r, Continuum1D):
        return sigma_q_d1(q, p.mu, p.J)
    if p.d == 0:
        return sigma_q_d0(q, p.mu, p.J)
    return saddle_solve(q, p, grid_r).sigma_q


def e_typ(params: ModelParams, grid=None) -> float:
    """Typical free-energy density (the q -> 0 slope of sigma_q)."""
    p = canonicalize(params)
    grid_r = resolve_grid(p, grid)
    if isinstance(grid_r, Continuum1D):
        if p.mu > 3.0 * larkin_mass_d1(p.J):
            return e_typ_d1_saddle(p.mu, p.J)
        return e_typ_d1_dos(p.mu, p.J)
    if p.d == 0:
        return e_typ_d0(p.mu, p.J)
    return f_integral(0.0, p, grid_r)


def var_e(params: ModelParams, grid=None) -> float:
    """Gaussian variance of the free-energy density near its typical value."""
    p = canonicalize(params)
    grid_r = resolve_grid(p, grid)
    if isinstance(grid_r, Continuum1D):
        return log_potential_slope_continuum_d1(p.mu / p.J, p.J) ** 2
    if p.d == 0:
        return var_e_d0(p.mu, p.J)
    return log_potential_slope(p.mu / p.J, p, grid_r) ** 2


@dataclass(frozen=True)
class RatePoint:
    e: float
    q: float
    phi: float


def rate_function(e: float, params: ModelParams, grid=None) -> RatePoint:
    """Large-deviation rate of the free-energy density.

    phi(e) = (1/2) xi^2 where xi inverts the regularized log-potential at
    the requested level; d=0 dispatches to the closed scaling form below
    the branch point.
    """
    p = canonicalize(params)
    grid_r = resolve_grid(p, grid)
    if p.d == 0 and not isinstance(grid_r, Continuum1D):
        return _rate_function_d0(e, p.mu, p.J)
    return _rate_function_generic(e, p, grid_r)


def _rate_function_d0(e: float, mu: float, J: float) -> RatePoint:
    et = e_typ_d0(mu, J)
    de = e - et
    e_c = 0.5 + math.log(J / mu)
    if e < e_c:
        x = J * J * de / (mu * mu)
        if x <= -5.0 / 36.0:
            raise OutOfRange(f"e={e} maps to q <= -1")
        phi = float(rate_scaling_phi(x))
        qv = 2.0 - 2.0 / math.sqrt(1.0 + 4.0 * x)
        return RatePoint(e=e, q=qv, phi=phi * mu * mu / (J * J))
    # simple branch: invert the closed-form potential on u >= 2
    target = de + log_potential_d0(mu / J, J) - math.log(mu)

    def h(u):
        return log_potential_d0(u, J) - math.log(mu) - target

    lo = 2.0
    if h(lo) > 0.0:
        # e_c boundary: u = 2 exactly
        u = 2.0
    else:
        hi = max(4.0, 2.0 * mu / J)
        while h(hi) < 0.0:
            hi *= 2.0
            if hi > 1e12:
                raise OutOfRange("level not attainable on the outer branch")
        u = brentq(h, lo, hi, xtol=1e-15, rtol=8.9e-16)
    xi = u - mu / J
    qv = xi / log_potential_slope_d0(u)
    if qv <= -1.0:
        raise OutOfRange(f"e={e} maps to q={qv} <= -1")
    return RatePoint(e=e, q=qv, phi=0.5 * xi * xi)


def _rate_function_generic(e: float, p: ModelParams, grid_r) -> RatePoint:
    target_de = e - e_typ(p, grid_r)
    f0 = f_integral(0.0, p, grid_r)

    def h(xi):
        return f_integral(xi, p, grid_r) - f0 - target_de

    if abs(target_de) < 1e-15:
        return RatePoint(e=e, q=0.0, phi=0.0)
    step = 0.25
    lo, hi = (0.0, step) if target_de > 0 else (-step, 0.0)
    for _ in range(60):
        if target_de > 0 and h(hi) >= 0.0:
            break
        if target_de < 0 and h(lo) <= 0.0:
            break
        step *= 2.0
        lo, hi = (0.0, step) if target_de > 0 else (-step, 0.0)
    else:
        raise OutOfRange("level not attainable")
    xi = brentq(h, lo, hi, xtol=1e-13, rtol=8.9e-16)
    u = xi + p.mu / p.J
    if isinstance(grid_r, Continuum1D):
        slope = log_potential_slope_continuum_d1(u, p.J)
    else:
        slope = log_potential_slope(u, p, grid_r)
    qv = xi / slope if slope != 0 else math.inf
    if qv <= -1.0:
        raise OutOfRange(f"e={e} maps to q={qv} <= -1")
    return RatePoint(e=e, q=qv, phi=0.5 * xi * xi)


# ---------------------------------------------------------------------------

def generalized_lyapunov(q: float, E: float, J: float) -> float:
    """Growth rate of the q-th moment of the solution volume, d=1 continuum.

    Equals the moment growth rate at mu = -E plus the free-operator shift
    q sqrt(mu) theta(mu); the shift is proportional to q so that the q = 0
    normalization Lambda(0, E) = 0 holds identically.
    """
    if q <= -1:
        raise OutOfRange("requires q > -1")
    mu = -E
    if mu <= 0:
        raise OutOfRange("implemented for E < 0 (positive effective mass)")
    return sigma_q_d1(q, mu, J) + q * math.sqrt(mu)
