import math

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.optimize import minimize_scalar

from specdet.core import Boundary, ModelParams, SaddlePhase
from specdet.pastur import (Continuum1D, f_integral, log_potential_d0,
                            log_potential_slope, log_potential_slope_continuum_d1,
                            pastur_resolvent, spectral_density)
from specdet.saddle import larkin_mass, phase_boundary_mu_b, saddle_solve

P0 = ModelParams(d=0, N=1, L=1, J=1.0, mu=0.5)


def semicircle_log_potential(u, J=1.0):
    pts = [-u] if abs(u) < 2.0 else None
    val, _ = quad(lambda a: np.sqrt(4 * J * J - a * a) / (2 * np.pi * J * J)
                  * np.log(abs(a + J * u)), -2 * J, 2 * J, points=pts, limit=300)
    return val


def test_pastur_semicircle_density():
    for lam in [-1.5, 0.0, 0.3, 1.9]:
        rho = spectral_density(lam, P0)
        assert rho == pytest.approx(np.sqrt(4.0 - lam * lam) / (2.0 * np.pi),
                                    abs=1e-10)
    assert spectral_density(2.5, P0) == pytest.approx(0.0, abs=1e-10)


def test_pastur_free_limit():
    # J -> 0: the resolvent collapses onto the free one
    p = ModelParams(d=1, N=1, L=8, t=1.0, J=1e-8, mu=1.0)
    lam = 5.0 + 0.3j
    from specdet.core import kinetic_eigenvalues
    free = np.mean(1.0 / (lam - kinetic_eigenvalues(p)))
    assert pastur_resolvent(lam, p) == pytest.approx(free, abs=1e-7)


def test_log_potential_d0_closed_vs_quadrature():
    for u in [0.0, 0.4, 1.2, 1.99, 2.0, 2.3, 4.0, -1.5, -3.0]:
        assert log_potential_d0(u, 1.0) == \
            pytest.approx(semicircle_log_potential(u), abs=1e-8)
    # f and f' are continuous at the band edge; the outer branch carries a
    # (u-2)^(3/2) term, so one-sided differences only agree to O(sqrt(h))
    h = 1e-8
    left = (log_potential_d0(2.0, 1.0) - log_potential_d0(2.0 - h, 1.0)) / h
    right = (log_potential_d0(2.0 + h, 1.0) - log_potential_d0(2.0, 1.0)) / h
    assert left == pytest.approx(right, abs=2e-4)


def test_f_integral_generic_lattice_matches_d0_closed():
    # a single periodic site has no kinetic term at all, so the generic
    # lattice quadrature must reproduce the d=0 closed form
    p_trivial = ModelParams(d=1, N=1, L=1, J=1.0, mu=0.5,
                            boundary=Boundary.PERIODIC)
    for xi in [0.0, 0.5, 1.7]:
        generic = f_integral(xi, p_trivial)
        closed = log_potential_d0(xi + 0.5, 1.0) - math.log(0.5)
        assert generic == pytest.approx(closed, abs=2e-6)


def test_f_integral_continuum_slope_consistency():
    # finite differences of the regularized potential against the closed
    # slope from the double root
    p = ModelParams(d=1, N=1, L=1, J=1.0, mu=1.2)
    cont = Continuum1D()
    h = 1e-5
    for xi in [0.0, 0.4, 1.0]:
        fd = (f_integral(xi + h, p, cont) - f_integral(xi - h, p, cont)) / (2 * h)
        u = xi + p.mu / p.J
        assert fd == pytest.approx(log_potential_slope_continuum_d1(u, p.J),
                                   abs=5e-7)


def test_log_potential_slope_lattice_matches_fd():
    p = ModelParams(d=1, N=1, L=6, t=1.0, J=1.2, mu=2.0)
    h = 1e-5
    u = p.mu / p.J
    fd = (f_integral(h, p) - f_integral(-h, p)) / (2 * h)
    assert fd == pytest.approx(log_potential_slope(u, p), abs=5e-6)


def test_larkin_mass_values():
    assert larkin_mass(P0) == pytest.approx(1.0, abs=1e-12)
    pc = ModelParams(d=1, N=1, L=1, J=2.0, mu=1.0)
    assert larkin_mass(pc, Continuum1D()) == pytest.approx(1.0, abs=1e-14)
    assert larkin_mass(ModelParams(d=1, N=1, L=1, J=1.0, mu=1.0), Continuum1D()) \
        == pytest.approx((0.5) ** (4.0 / 3.0), abs=1e-14)


def test_phase_boundary_values():
    assert phase_boundary_mu_b(1.0, P0) == pytest.approx(1.0, abs=1e-12)
    assert phase_boundary_mu_b(0.3, P0) == pytest.approx(1.7, abs=1e-12)
    pc = ModelParams(d=1, N=1, L=1, J=1.0, mu=1.0)
    cont = Continuum1D()
    assert phase_boundary_mu_b(0.0, pc, cont) == \
        pytest.approx(3.0 * 0.5 ** (4.0 / 3.0), abs=1e-14)
    assert phase_boundary_mu_b(1.0, pc, cont) == \
        pytest.approx(larkin_mass(pc, cont), abs=1e-14)


def sigma_oracle_d0(q, mu, J=1.0):
    def action(xi):
        return 0.5 * xi * xi - q * (semicircle_log_potential(xi + mu / J, J)
                                    - np.log(mu))
    res = minimize_scalar(action, bounds=(-1.0, 8.0), method="bounded",
                          options={"xatol": 1e-12})
    return -action(res.x), res.x


@pytest.mark.parametrize("q,mu", [(1.0, 2.0), (0.5, 0.5), (1.0, 0.5),
                                  (1.5, 0.5), (2.5, 0.3)])
def test_saddle_solve_d0_vs_minimization_oracle(q, mu):
    p = ModelParams(d=0, N=1, L=1, J=1.0, mu=mu)
    sol = saddle_solve(q, p)
    sig, xi = sigma_oracle_d0(q, mu)
    assert sol.xi_star == pytest.approx(xi, abs=2e-4)
    assert sol.sigma_q == pytest.approx(sig, abs=1e-7)


def test_saddle_mu_q_relation_and_example():
    p = ModelParams(d=0, N=1, L=1, J=1.0, mu=2.0)
    sol = saddle_solve(1.0, p)
    assert sol.xi_star == pytest.approx(0.5, abs=1e-12)
    assert sol.phase is SaddlePhase.SIMPLE
    assert sol.mu_q == pytest.approx(p.mu + (1 - 1 / sol.q) * p.J * sol.xi_star,
                                     abs=1e-12)


def test_saddle_complex_phase_d0_closed_relations():
    q, mu, j = 1.0, 0.5, 1.0
    sol = saddle_solve(q, ModelParams(d=0, N=1, L=1, J=j, mu=mu))
    assert sol.phase is SaddlePhase.COMPLEX
    assert sol.xi_star == pytest.approx(q / (2 - q) * mu / j, abs=1e-10)
    y2 = (1.0 - mu * mu / ((2 - q) ** 2 * j * j)) / (j * j)
    assert sol.y ** 2 == pytest.approx(y2, abs=1e-10)
    assert sol.mu_q == pytest.approx(mu / (2 - q), abs=1e-10)


def test_saddle_y_equals_pi_rho_at_evaluation_point():
    p = ModelParams(d=1, N=1, L=8, t=1.0, J=2.0, mu=0.8)
    sol = saddle_solve(1.0, p)
    assert sol.phase is SaddlePhase.COMPLEX
    lam = -p.J * sol.xi_star - p.mu
    assert sol.y == pytest.approx(math.pi * spectral_density(lam, p), abs=1e-9)


def test_saddle_q0():
    sol = saddle_solve(0.0, P0)
    assert sol.xi_star == 0.0 and sol.sigma_q == 0.0


def test_saddle_positive_branch_q_above_2():
    # small mu at q > 2: the positive minimum is selected
    p = ModelParams(d=0, N=1, L=1, J=1.0, mu=1e-3)
    sol = saddle_solve(2.5, p)
    assert sol.xi_star > 0
    assert sol.phase is SaddlePhase.SIMPLE


def test_pastur_lattice_density_converges_to_continuum():
    # fine lattice mapped from the continuum: the self-consistent density
    # approaches the closed form (long ring so the momentum grid is dense)
    from specdet.core import ContinuumParams
    from specdet.operator import map_continuum_to_lattice
    from specdet.resolvent import dos_continuum_d1, spectral_edge
    cont = ContinuumParams(tilde_t=1.0, tilde_j=1.0, c=0.0, mu=0.0, E=0.0,
                           length=400.0)
    a = 0.05
    lat = map_continuum_to_lattice(cont, a, 1)
    edge = spectral_edge(1.0)
    for alpha in [edge + 0.5, 0.0, 1.5, 4.0]:
        lattice_rho = spectral_density(alpha, lat) / a
        assert lattice_rho == pytest.approx(float(dos_continuum_d1(alpha, 1.0)),
                                            rel=0.03, abs=2e-3)
