import math

import numpy as np
import pytest

from specdet.core import ModelParams, canonicalize
from specdet.errors import NoRealRoot, OutOfPhase, OutOfRange
from specdet.pastur import Continuum1D, f_integral
from specdet.sigma import (e_typ, e_typ_d0, e_typ_d1_dos, e_typ_d1_saddle,
                           generalized_lyapunov, larkin_mass_d1, mu_b_d1,
                           mu_q_d1_simple, rate_function, rate_scaling_phi,
                           sigma_q, sigma_q_d0, sigma_q_d1_complex,
                           sigma_q_d1_simple, sigma_q_d1_transition, var_e,
                           var_e_d0, xi_star_d0, xi_star_d1)


# ---------------------------------------------------------------------------
# d = 0 closed forms.

def test_sigma_d0_reference_value():
    assert sigma_q_d0(1.0, 0.5, 1.0) == \
        pytest.approx(0.125 + math.log(2.0) - 0.5, abs=1e-14)


def test_sigma_d0_simple_phase_q1_zero():
    for mu in [1.5, 2.0, 5.0]:
        assert sigma_q_d0(1.0, mu, 1.0) == 0.0


def test_sigma_d0_near_q1_expansion():
    mu, j = 2.0, 1.0
    for dq in [1e-3, -1e-3, 5e-3]:
        expected = dq * j * j / (2 * mu * mu) \
            + (mu * mu - j * j) * j * j * dq * dq / (2 * mu ** 4)
        assert sigma_q_d0(1.0 + dq, mu, j) == pytest.approx(expected, abs=3e-8)


def test_sigma_d0_transition_value_formula():
    for q in [0.4, 0.9, 1.3, 1.8]:
        val = sigma_q_d0(q, (2.0 - q), 1.0)
        expected = -0.5 * q * (q + 2.0 * math.log(2.0 - q) - 1.0)
        assert val == pytest.approx(expected, abs=1e-11)


def test_sigma_d0_continuous_across_boundary():
    for q in [0.5, 1.0, 1.5]:
        mu_b = (2.0 - q) * 1.0
        below = sigma_q_d0(q, mu_b * (1 - 1e-9), 1.0)
        above = sigma_q_d0(q, mu_b * (1 + 1e-9), 1.0)
        assert below == pytest.approx(above, abs=1e-7)
        assert xi_star_d0(q, mu_b * (1 - 1e-9), 1.0) == \
            pytest.approx(xi_star_d0(q, mu_b * (1 + 1e-9), 1.0), abs=1e-7)


def test_sigma_d0_derivative_identities():
    # d sigma/d mu = xi*/J - q/mu and d sigma/d q = e at the saddle
    q, mu, j = 0.8, 1.7, 1.0
    h = 1e-6
    dmu = (sigma_q_d0(q, mu + h, j) - sigma_q_d0(q, mu - h, j)) / (2 * h)
    assert dmu == pytest.approx(xi_star_d0(q, mu, j) / j - q / mu, abs=1e-8)


def test_sigma_q2_degenerate_flatness():
    # at q=2, mu -> 0 the action is exactly constant inside the band
    from specdet.pastur import log_potential_d0
    xis = np.linspace(-1.9, 1.9, 41)
    s = 0.5 * xis ** 2 - 2.0 * np.array([log_potential_d0(x, 1.0) for x in xis])
    assert np.max(s) - np.min(s) < 1e-12


def test_e_typ_d0_branches():
    assert e_typ_d0(0.5, 1.0) == pytest.approx(-0.5 + 0.0625 + math.log(2.0),
                                               abs=1e-14)
    # continuity at mu = 2J
    assert e_typ_d0(2.0 - 1e-9, 1.0) == pytest.approx(e_typ_d0(2.0 + 1e-9, 1.0),
                                                      abs=1e-7)


def test_var_e_d0():
    assert var_e_d0(2.0, 1.0) == pytest.approx(1.0, abs=1e-12)
    # mu -> infinity: variance decays as J^2/mu^2
    mu = 1e4
    assert var_e_d0(mu, 1.0) == pytest.approx(1.0 / mu ** 2, rel=1e-6)
    # continuous at 2J, but with a square-root cusp from above: the
    # one-sided deviation scales as sqrt(delta)
    assert var_e_d0(2.0 - 1e-9, 1.0) == pytest.approx(var_e_d0(2.0 + 1e-9, 1.0),
                                                      abs=1e-4)


def test_var_matches_rate_curvature():
    p = ModelParams(d=0, N=1, L=1, J=1.0, mu=0.5)
    et = e_typ_d0(0.5, 1.0)
    de = 1e-5
    phi = rate_function(et + de, p).phi
    assert 2.0 * phi * var_e(p) / de ** 2 == pytest.approx(1.0, abs=1e-3)


# ---------------------------------------------------------------------------
# Rate function.

def test_rate_scaling_phi():
    assert rate_scaling_phi(2.0) == pytest.approx(2.0, abs=1e-15)
    x = np.array([1e-4, 1e-3])
    assert np.allclose(rate_scaling_phi(x), 2 * x ** 2 - 4 * x ** 3, rtol=1e-2)


def test_rate_function_at_typical_value():
    p = ModelParams(d=0, N=1, L=1, J=1.0, mu=0.5)
    rp = rate_function(e_typ_d0(0.5, 1.0), p)
    assert rp.phi == pytest.approx(0.0, abs=1e-12)
    assert rp.q == pytest.approx(0.0, abs=1e-9)


def test_rate_function_legendre_both_branches():
    from scipy.optimize import minimize_scalar
    p = ModelParams(d=0, N=1, L=1, J=1.0, mu=0.5)
    e_c = 0.5 + math.log(2.0)
    for e_val in [0.3, 0.8, e_c + 0.3]:   # complex side, complex side, simple side
        rp = rate_function(e_val, p)
        neg = lambda q: -(q * e_val - sigma_q_d0(q, 0.5, 1.0))
        best = minimize_scalar(neg, bounds=(-0.95, 12.0), method="bounded",
                               options={"xatol": 1e-13})
        assert rp.phi == pytest.approx(-neg(best.x), abs=1e-7)


def test_rate_function_out_of_range():
    p = ModelParams(d=0, N=1, L=1, J=1.0, mu=0.5)
    with pytest.raises(OutOfRange):
        rate_function(0.05, p)     # maps below q = -1


def test_rate_function_canonicalization_invariance():
    p1 = ModelParams(d=0, N=1, L=1, J=1.0, mu=1.5, E=1.0)
    p2 = canonicalize(p1)
    rp1, rp2 = rate_function(0.4, p1), rate_function(0.4, p2)
    assert rp1.phi == pytest.approx(rp2.phi, abs=1e-14)


# ---------------------------------------------------------------------------
# d = 1 continuum chain.

def test_d1_simple_q1():
    for mu in [0.5, 1.0, 3.0]:
        assert mu_q_d1_simple(1.0, mu, 1.0) == pytest.approx(mu, abs=1e-12)
        assert sigma_q_d1_simple(1.0, mu, 1.0) == pytest.approx(0.0, abs=1e-12)


def test_d1_transition_values():
    for j in [1.0, 1.7]:
        for q in [0.3, 0.8, 1.2, 1.45]:
            got = sigma_q_d1_simple(q, mu_b_d1(q, j), j)
            assert got == pytest.approx(sigma_q_d1_transition(q, j), abs=1e-11)


def test_d1_mu_q_at_zero_mass():
    got = mu_q_d1_simple(2.0, 1e-13, 1.0)
    assert got == pytest.approx((2.0) ** (2.0 / 3.0) * 0.5 ** (4.0 / 3.0),
                                rel=1e-6)


def test_d1_simple_errors():
    with pytest.raises(OutOfPhase):
        sigma_q_d1_simple(1.2, 0.1 * mu_b_d1(1.2, 1.0), 1.0)
    with pytest.raises(NoRealRoot):
        sigma_q_d1_simple(0.3, 0.05 * larkin_mass_d1(1.0), 1.0)


def test_d1_complex_continuity_and_direct_action():
    for j in [1.0, 1.7]:
        for q in [0.5, 1.0, 1.4]:
            mb = mu_b_d1(q, j)
            assert sigma_q_d1_complex(q, mb * (1 - 1e-9), j) == \
                pytest.approx(sigma_q_d1_transition(q, j), abs=1e-8)
    # ODE route equals the direct action evaluation (independent quadrature)
    for q, frac in [(1.0, 0.4), (0.6, 0.3)]:
        j = 1.0
        mu = frac * mu_b_d1(q, j)
        xi = xi_star_d1(q, mu, j)
        p = ModelParams(d=1, N=1, L=1, J=j, mu=mu)
        direct = -0.5 * xi * xi + q * f_integral(xi, p, Continuum1D())
        assert sigma_q_d1_complex(q, mu, j) == pytest.approx(direct, abs=2e-7)


def test_d1_complex_q_to_zero():
    # sigma -> 0 and d sigma/d q -> e_typ as q -> 0
    j, mu = 1.0, 0.5 * mu_b_d1(0.0, 1.0)
    h = 1e-4
    assert sigma_q_d1_complex(h, mu, j) / h == \
        pytest.approx(e_typ_d1_dos(mu, j), abs=1e-3)


def test_i_identity_at_zero():
    # the closed identity behind the complex branch: value 1/2 at zero tilt
    assert 1.0 / (2.0 * np.sqrt(1.0 + 0.0j)) == pytest.approx(0.5)
    # and through the branch radius: R(theta->0) equals the Larkin mass
    from specdet.sigma import _ComplexBranch
    br = _ComplexBranch(0.5, 1.0)
    assert br._radius(1e-12) == pytest.approx(larkin_mass_d1(1.0), rel=1e-9)


def test_e_typ_d1_two_routes():
    for j, mu_fac in [(1.0, 3.2), (1.0, 5.0), (1.7, 4.0)]:
        mu = mu_fac * larkin_mass_d1(j)
        assert e_typ_d1_saddle(mu, j) == pytest.approx(e_typ_d1_dos(mu, j),
                                                       abs=1e-6)


def test_e_typ_d1_limit_at_boundary():
    j = 1.0
    mu3 = 3.0 * larkin_mass_d1(j)
    e_c = (1.5 - math.sqrt(3.0)) * (j / 2.0) ** (2.0 / 3.0)
    assert e_typ_d1_saddle(mu3 * (1 + 1e-9), j) == pytest.approx(e_c, abs=1e-4)


def test_dispatch_sigma_q():
    p0 = ModelParams(d=0, N=1, L=1, J=1.0, mu=0.5)
    assert sigma_q(1.0, p0) == pytest.approx(sigma_q_d0(1.0, 0.5, 1.0), abs=1e-14)
    pc = ModelParams(d=1, N=1, L=1, J=1.0, mu=2.0)
    assert sigma_q(1.0, pc, Continuum1D()) == pytest.approx(0.0, abs=1e-12)


def test_sigma_q_canonicalization_property():
    rng = np.random.default_rng(11)
    for _ in range(10):
        mu = float(rng.uniform(0.3, 3.0))
        e_shift = float(rng.uniform(-1.0, 1.0))
        q = float(rng.uniform(0.2, 1.8))
        j = float(rng.uniform(0.5, 2.0))
        p = ModelParams(d=0, N=1, L=1, J=j, mu=mu + e_shift, E=e_shift)
        assert sigma_q(q, p) == pytest.approx(sigma_q(q, canonicalize(p)),
                                              abs=1e-13)


def test_sigma_q1_zero_any_d_simple_phase():
    # lattice path: nontrivial identity through the numeric quadratures
    p = ModelParams(d=1, N=1, L=8, t=1.0, J=1.0, mu=3.0)
    assert sigma_q(1.0, p) == pytest.approx(0.0, abs=1e-7)


# ---------------------------------------------------------------------------
# Generalized Lyapunov exponent.

def test_generalized_lyapunov_values():
    # q=1 below the band: only the free shift survives
    assert generalized_lyapunov(1.0, -0.8, 1.0) == \
        pytest.approx(math.sqrt(0.8), abs=1e-12)
    # normalization at q=0 (the shift is proportional to q)
    assert generalized_lyapunov(1e-13, -0.8, 1.0) == pytest.approx(0.0, abs=1e-10)
    with pytest.raises(OutOfRange):
        generalized_lyapunov(1.0, 0.5, 1.0)
