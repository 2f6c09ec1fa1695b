"""Stationary-resolvent analytics for the eigenvalue flow in a cubic potential.

The steady state of the interacting Riccati-eigenvalue flow is governed by
the quartic

    P(z) = (z^2 + E)^2 - beta (z - Jconst),    beta = 2 * tilde_j**2,

whose double root z_a fixes the integration constant Jconst(E).  Everything
in this module (densities of states, stationary droplet density, barrier
heights, spectral tails) follows from that root structure.  With a = -E the
transition sits at a* = (3/4) beta^(2/3): for a > a* the droplet is confined
and Jconst is real; for a < a* there is a finite particle current and
Im Jconst > 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from .errors import OutOfPhase, QuadratureFailure
from .core import FlowPhase

_EDGE_TOL = 1e-12


def beta_from_tilde_j(tilde_j: float) -> float:
    return 2.0 * tilde_j ** 2


def spectral_edge(tilde_j: float) -> float:
    """Left spectral edge E* = -(3/4)(2 tilde_j^2)^(2/3) = -3 (tilde_j/2)^(4/3)."""
    return -0.75 * (2.0 * tilde_j ** 2) ** (2.0 / 3.0)


def critical_depth(beta: float) -> float:
    """a* = (3/4) beta^(2/3); confinement threshold of the well depth a = -E."""
    return 0.75 * beta ** (2.0 / 3.0)


def _signed_cbrt(x: float) -> float:
    return math.copysign(abs(x) ** (1.0 / 3.0), x)


def double_root(a: float, beta: float) -> complex:
    """Double root z_a of P: solves P(z_a) = P'(z_a) = 0, P'(z) = 4z^3 - 4az - beta.

    Real (the most negative of the three real roots) for a > a*; for a < a*
    it is the root with positive imaginary part, evaluated by the explicit
    Cardano expression to keep the branch choice deterministic.
    """
    if beta <= 0:
        raise ValueError("beta must be > 0")
    astar = critical_depth(beta)
    if a >= astar * (1.0 - _EDGE_TOL) and a <= astar * (1.0 + _EDGE_TOL):
        return complex(-0.5 * beta ** (1.0 / 3.0))
    if a > astar:
        # three real roots; the physical double root is the most negative one
        # (trigonometric form avoids complex cancellation)
        p = a / 3.0
        phi = math.acos(beta / (8.0 * p ** 1.5))
        roots = [2.0 * math.sqrt(p) * math.cos((phi - 2.0 * math.pi * k) / 3.0)
                 for k in range(3)]
        return complex(min(roots))
    s = math.sqrt(1.0 - (a / astar) ** 3)
    t1 = (1.0 + s) ** (1.0 / 3.0)
    t2 = _signed_cbrt(1.0 - s)
    w = (-0.5 + 0.5j * math.sqrt(3.0)) * t1 - (0.5 + 0.5j * math.sqrt(3.0)) * t2
    return 0.5 * beta ** (1.0 / 3.0) * w


@dataclass(frozen=True)
class ResolventConstant:
    """Integration constant Jconst(E) of the stationary resolvent, with roots.

    P(z) factors as (z - double_root)^2 (z - outer_minus)(z - outer_plus).
    In the confined phase all roots are real with
    double_root < outer_minus < outer_plus and the droplet support is
    [outer_minus, outer_plus].
    """

    E: float
    beta: float
    value: complex
    double_root: complex
    outer_minus: complex
    outer_plus: complex
    phase: FlowPhase

    @property
    def current(self) -> float:
        """Steady-state particle current j = Im(Jconst)/pi (0 when confined)."""
        return self.value.imag / math.pi

    def quartic(self, z) -> complex:
        return (z * z + self.E) ** 2 - self.beta * (z - self.value)


def resolvent_constant(E: float, beta: float) -> ResolventConstant:
    """Jconst(E) together with the factored root structure of P."""
    a = -E
    za = double_root(a, beta)
    jc = za - beta / (16.0 * za * za)
    disc = np.sqrt(complex(2.0 * (a - za * za)))
    gm = -za - disc
    gp = -za + disc
    if a >= critical_depth(beta):
        phase = FlowPhase.CONFINED
        jc = complex(jc.real)
        za = complex(za.real)
        gm, gp = complex(gm.real), complex(gp.real)
    else:
        phase = FlowPhase.CURRENT
    return ResolventConstant(E=E, beta=beta, value=jc, double_root=za,
                             outer_minus=gm, outer_plus=gp, phase=phase)


# ---------------------------------------------------------------------------
# Density of states of the d=1 continuum operator without the trace noise.

def dos_continuum_d1(alpha, tilde_j: float):
    """Mean spectral density (per unit length per channel) at energy alpha.

    Vanishes below the edge alpha* = -3 (tilde_j/2)^(4/3) with a square-root
    onset and decays as 1/(2 pi sqrt(alpha)) at large alpha.  Vectorized in
    alpha.
    """
    alpha = np.asarray(alpha, dtype=float)
    scale = 3.0 * (tilde_j / 2.0) ** (4.0 / 3.0)
    lam = alpha / scale
    out = np.zeros_like(lam)
    mask = lam > -1.0
    if np.any(mask):
        s = np.sqrt(1.0 + lam[mask] ** 3)
        w = np.cbrt(1.0 + s) + np.cbrt(1.0 - s)
        arg = np.clip((2.0 / w) ** 3 - 1.0, 0.0, None)
        rc = 0.25 * w * w * np.sqrt(arg)
        out[mask] = rc / (2.0 * np.pi * (tilde_j / 2.0) ** (2.0 / 3.0))
    return out if out.ndim else float(out)


def _g_minus_free_scaled(lam: float) -> float:
    """g(lam) - (4/3) lam^(-1/2) for lam > 0, where g is the scaled density.

    Direct evaluation of g loses all digits at large lam (two huge cube
    roots cancel); beyond lam = 50 the asymptotic tail -(10/81) lam^(-7/2)
    is exact to better than 1e-12.
    """
    if lam > 50.0:
        return -(10.0 / 81.0) * lam ** -3.5
    s = math.sqrt(1.0 + lam ** 3)
    g = (1.0 + s) ** (2.0 / 3.0) - abs(1.0 - s) ** (2.0 / 3.0)
    return g - (4.0 / 3.0) / math.sqrt(lam)


def dos_diff_continuum_d1(alpha: float, tilde_j: float) -> float:
    """rho_K(alpha) - rho_free(alpha) for alpha > 0, cancellation-safe."""
    if alpha <= 0:
        raise ValueError("defined for alpha > 0 (free density support)")
    beta = beta_from_tilde_j(tilde_j)
    lam = alpha / (3.0 * (tilde_j / 2.0) ** (4.0 / 3.0))
    return math.sqrt(3.0) / (4.0 * math.pi * beta ** (1.0 / 3.0)) \
        * _g_minus_free_scaled(lam)


def dos_continuum_d1_cardano(alpha, tilde_j: float):
    """Equivalent closed form via the derivative of Im Jconst (cross-check)."""
    alpha = np.asarray(alpha, dtype=float)
    beta = beta_from_tilde_j(tilde_j)
    lam = alpha / (3.0 * (tilde_j / 2.0) ** (4.0 / 3.0))
    out = np.zeros_like(lam)
    mask = lam > -1.0
    if np.any(mask):
        s = np.sqrt(1.0 + lam[mask] ** 3)
        term = (1.0 + s) ** (2.0 / 3.0) - np.abs(1.0 - s) ** (2.0 / 3.0)
        out[mask] = math.sqrt(3.0) / (4.0 * np.pi * beta ** (1.0 / 3.0)) * term
    return out if out.ndim else float(out)


def dbm_stationary_density(lam, E: float, beta: float):
    """Stationary eigenvalue density of the flow at energy E (vectorized).

    Confined phase: (2/(beta pi)) (lam - z_a) sqrt((lam - g-)(g+ - lam)) on
    [g-, g+], zero outside; at the transition this degenerates to the
    (lam - g-)^(3/2) law.  Current phase: (2/(beta pi)) |Im sqrt(P(lam))|,
    the branch that keeps the density non-negative.  Normalized to unit mass.
    """
    rc = resolvent_constant(E, beta)
    lam = np.asarray(lam, dtype=float)
    if rc.phase is FlowPhase.CONFINED:
        gm, gp, za = rc.outer_minus.real, rc.outer_plus.real, rc.double_root.real
        out = np.zeros_like(lam)
        mask = (lam >= gm) & (lam <= gp)
        if np.any(mask):
            x = lam[mask]
            out[mask] = (2.0 / (beta * np.pi)) * (x - za) * np.sqrt(
                np.clip((x - gm) * (gp - x), 0.0, None))
        return out if out.ndim else float(out)
    p = (lam.astype(complex) ** 2 + E) ** 2 - beta * (lam - rc.value)
    out = (2.0 / (beta * np.pi)) * np.abs(np.sqrt(p).imag)
    return out if out.ndim else float(out)


def stationary_density_support(E: float, beta: float) -> tuple[float, float]:
    """Support of the confined droplet; raises in the current phase."""
    rc = resolvent_constant(E, beta)
    if rc.phase is not FlowPhase.CONFINED:
        raise OutOfPhase("support is the whole real axis in the current phase")
    return rc.outer_minus.real, rc.outer_plus.real


# ---------------------------------------------------------------------------
# Barrier crossing.

def barrier_height(E: float, beta: float) -> float:
    """Effective barrier U blocking the leftmost eigenvalue, confined phase.

    Exact closed form; barrier_height_quadrature integrates the defining
    force profile and is kept as the independent cross-check.
    """
    a = -E
    astar = critical_depth(beta)
    if a <= astar:
        raise OutOfPhase(f"barrier requires E < E* = {-astar}; got E = {E}")
    za = double_root(a, beta).real
    inner = 4.0 * (-za) ** 1.5 / math.sqrt(beta) - math.sqrt(2.0)
    inner = max(inner, 0.0)
    return (2.0 / 3.0) * a * math.sqrt(6.0 * za * za - 2.0 * a) \
        - beta * math.asinh(math.sqrt(inner) / 2.0 ** 0.75)


def barrier_height_quadrature(E: float, beta: float) -> float:
    """U = int_{z_a}^{g-} (lam - z_a) sqrt((g- - lam)(g+ - lam)) dlam."""
    a = -E
    if a <= critical_depth(beta):
        raise OutOfPhase(f"barrier requires E < E*; got E = {E}")
    rc = resolvent_constant(E, beta)
    za = rc.double_root.real
    gm = rc.outer_minus.real
    gp = rc.outer_plus.real

    def force(lam):
        return (lam - za) * np.sqrt(np.clip((gm - lam) * (gp - lam), 0.0, None))

    val, err = quad(force, za, gm, epsabs=1e-14, epsrel=1e-13, limit=300)
    if err > 1e-9 * max(1.0, abs(val)):
        raise QuadratureFailure(f"barrier quadrature error {err:.2e}")
    return val


def dos_tail_estimate(alpha: float, N: int, tilde_j: float) -> float:
    """Arrhenius-order tail of the density of states below the edge.

    exp(-N U / tilde_j^2) with U evaluated at well depth a = -alpha.
    Exponential order only; no prefactor is claimed.
    """
    beta = beta_from_tilde_j(tilde_j)
    estar = spectral_edge(tilde_j)
    if alpha >= estar:
        raise OutOfPhase(f"tail estimate requires alpha < E* = {estar}")
    u = barrier_height(alpha, beta)
    return math.exp(-N * u / tilde_j ** 2)
