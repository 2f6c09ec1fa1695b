import numpy as np
import pytest
from scipy.integrate import quad

from specdet.core import FlowPhase
from specdet.errors import OutOfPhase
from specdet.resolvent import (barrier_height, barrier_height_quadrature,
                               beta_from_tilde_j, critical_depth,
                               dbm_stationary_density, dos_continuum_d1,
                               dos_continuum_d1_cardano, dos_diff_continuum_d1,
                               dos_tail_estimate, double_root,
                               resolvent_constant, spectral_edge,
                               stationary_density_support)

BETA = 2.0  # tilde_j = 1


def test_spectral_edge_values():
    assert spectral_edge(2.0) == pytest.approx(-3.0, abs=1e-14)
    # the two printed forms of the edge agree
    for j in [0.5, 1.0, 2.0, 3.7]:
        assert spectral_edge(j) == pytest.approx(-3.0 * (j / 2.0) ** (4.0 / 3.0),
                                                 rel=1e-15)


def test_double_root_defining_conditions():
    rng = np.random.default_rng(0)
    for beta in [0.5, 2.0, 7.0]:
        astar = critical_depth(beta)
        for a in list(rng.uniform(-2.0, 3.0 * astar, 12)) + [astar]:
            za = double_root(float(a), beta)
            dp = 4.0 * za ** 3 - 4.0 * a * za - beta
            assert abs(dp) < 1e-10
    # transition value
    za = double_root(critical_depth(BETA), BETA)
    assert za == pytest.approx(-0.5 * BETA ** (1.0 / 3.0), abs=1e-12)


def test_double_root_vs_polynomial_solver():
    for a in [2.0 * critical_depth(BETA), 0.3, -1.0]:
        za = double_root(a, BETA)
        roots = np.roots([4.0, 0.0, -4.0 * a, -BETA])
        assert min(abs(roots - za)) < 1e-9


def test_double_root_branches():
    astar = critical_depth(BETA)
    assert double_root(1.5 * astar, BETA).imag == 0.0
    assert double_root(0.5 * astar, BETA).imag > 0.0


def test_resolvent_constant_factorization():
    rng = np.random.default_rng(1)
    pts = rng.standard_normal(20) + 1j * rng.standard_normal(20)
    for E in [-3.0, -1.3, spectral_edge(1.0), 0.0, 1.5]:
        rc = resolvent_constant(E, BETA)
        for z in pts:
            lhs = rc.quartic(z)
            rhs = ((z - rc.double_root) ** 2 * (z - rc.outer_minus)
                   * (z - rc.outer_plus))
            assert abs(lhs - rhs) < 1e-10


def test_resolvent_constant_phases():
    estar = spectral_edge(1.0)
    conf = resolvent_constant(estar - 0.5, BETA)
    assert conf.phase is FlowPhase.CONFINED
    assert conf.value.imag == 0.0
    assert conf.double_root.real < conf.outer_minus.real < conf.outer_plus.real
    cur = resolvent_constant(estar + 0.5, BETA)
    assert cur.phase is FlowPhase.CURRENT
    assert cur.value.imag > 0.0
    assert cur.double_root.imag > 0.0


def test_dos_two_forms_agree_pointwise():
    # exactly at the branch point both forms are analytically zero but carry
    # sqrt(eps)-level float noise, so start a hair inside the band
    alphas = np.linspace(spectral_edge(1.0) + 1e-6, 30.0, 700)
    d1 = dos_continuum_d1(alphas, 1.0)
    d2 = dos_continuum_d1_cardano(alphas, 1.0)
    assert np.max(np.abs(d1 - d2)) < 1e-12
    assert dos_continuum_d1(spectral_edge(1.0) - 1e-12, 1.0) == 0.0


def test_dos_edge_and_tail():
    j = 1.3
    edge = spectral_edge(j)
    assert dos_continuum_d1(edge, j) == 0.0
    assert dos_continuum_d1(edge - 0.5, j) == 0.0
    big = 1e8
    assert dos_continuum_d1(big, j) * 2.0 * np.pi * np.sqrt(big) == \
        pytest.approx(1.0, abs=1e-4)


def test_dos_edge_exponent_half():
    j = 1.0
    edge = spectral_edge(j)
    eps = np.geomspace(1e-6, 1e-3, 10)
    rho = dos_continuum_d1(edge + eps, j)
    slope = np.polyfit(np.log(eps), np.log(rho), 1)[0]
    assert abs(slope - 0.5) < 0.03


def test_dos_diff_matches_direct_and_decays():
    # stable difference equals the direct difference where that is accurate
    for a in [0.5, 2.0, 10.0]:
        direct = dos_continuum_d1(a, 1.0) - 1.0 / (2.0 * np.pi * np.sqrt(a))
        assert dos_diff_continuum_d1(a, 1.0) == pytest.approx(direct, abs=1e-12)
    assert abs(dos_diff_continuum_d1(1e6, 1.0)) < 1e-12


def test_stationary_density_normalized_both_phases():
    estar = spectral_edge(1.0)
    lo, hi = stationary_density_support(estar - 1.0, BETA)
    mass, _ = quad(lambda x: dbm_stationary_density(x, estar - 1.0, BETA), lo, hi)
    assert mass == pytest.approx(1.0, abs=1e-6)
    mass, _ = quad(lambda x: dbm_stationary_density(x, estar + 1.0, BETA),
                   -np.inf, np.inf, limit=300)
    assert mass == pytest.approx(1.0, abs=1e-6)


def test_stationary_density_tail_current_phase():
    E = 0.4
    rc = resolvent_constant(E, BETA)
    for lam in [80.0, -80.0, 300.0]:
        val = dbm_stationary_density(lam, E, BETA) * lam ** 2 * np.pi
        assert val == pytest.approx(rc.value.imag, rel=2e-2)


def test_critical_support_and_exponent():
    estar = spectral_edge(1.0)
    lo, hi = stationary_density_support(estar, BETA)
    assert lo == pytest.approx(-0.5 * BETA ** (1.0 / 3.0), abs=1e-9)
    assert hi == pytest.approx(1.5 * BETA ** (1.0 / 3.0), abs=1e-9)
    eps = np.geomspace(1e-6, 1e-4, 8)
    rho = dbm_stationary_density(lo + eps, estar, BETA)
    slope = np.polyfit(np.log(eps), np.log(rho), 1)[0]
    assert abs(slope - 1.5) < 0.02


def test_barrier_closed_equals_quadrature():
    estar = spectral_edge(1.0)
    for de in np.linspace(0.05, 8.0, 25):
        e_val = estar - de
        assert barrier_height(e_val, BETA) == \
            pytest.approx(barrier_height_quadrature(e_val, BETA), abs=1e-10)


def test_barrier_asymptotics():
    estar = spectral_edge(1.0)
    eps = np.geomspace(1e-4, 1e-2, 10)
    u = np.array([barrier_height(estar - d, BETA) for d in eps])
    slope = np.polyfit(np.log(eps), np.log(u), 1)[0]
    assert abs(slope - 1.25) < 0.02
    pref = np.exp(np.polyfit(np.log(eps), np.log(u), 1)[1])
    assert pref == pytest.approx(0.8 * np.sqrt(2.0) * 3.0 ** 0.25
                                 * BETA ** (1.0 / 6.0), rel=0.02)
    deep = np.geomspace(1e2, 1e4, 10)
    u = np.array([barrier_height(-d, BETA) for d in deep])
    slope = np.polyfit(np.log(deep), np.log(u), 1)[0]
    assert abs(slope - 1.5) < 0.02
    assert u[-1] == pytest.approx((4.0 / 3.0) * deep[-1] ** 1.5, rel=0.01)


def test_barrier_out_of_phase():
    with pytest.raises(OutOfPhase):
        barrier_height(spectral_edge(1.0) + 0.1, BETA)


def test_dos_tail_estimate():
    estar = spectral_edge(1.0)
    # barrier vanishes at the edge
    assert dos_tail_estimate(estar - 1e-9, 10, 1.0) == pytest.approx(1.0, abs=1e-6)
    # log-estimate linear in N
    import math
    l1 = math.log(dos_tail_estimate(estar - 0.5, 10, 1.0))
    l2 = math.log(dos_tail_estimate(estar - 0.5, 20, 1.0))
    assert l2 == pytest.approx(2.0 * l1, rel=1e-12)
    with pytest.raises(OutOfPhase):
        dos_tail_estimate(estar + 0.1, 10, 1.0)
