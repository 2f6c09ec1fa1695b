"""Moments of spectral determinants of matrix-valued random operators.

Closed-form growth rates and rate functions, exact chain determinants and
node counting, and finite-N eigenvalue-flow simulation, cross-validated
against each other.
"""

__version__ = "0.1.0"

from .core import (Boundary, ContinuumParams, FlowPhase, ModelParams,
                   MomentumGrid, RandomStream, SaddlePhase, canonicalize,
                   laplacian_eigenvalues)
from .resolvent import (barrier_height, barrier_height_quadrature,
                        dbm_stationary_density, dos_continuum_d1,
                        dos_tail_estimate, double_root, resolvent_constant,
                        spectral_edge)
from .pastur import Continuum1D, f_integral, pastur_resolvent, spectral_density
from .saddle import larkin_mass, phase_boundary_mu_b, saddle_solve
from .sigma import (e_typ, generalized_lyapunov, rate_function, sigma_q,
                    sigma_q_d1_complex, sigma_q_d1_simple, var_e)
from .operator import (assemble_dense, dos_histogram, logdet_block_recursion,
                       logdet_dense, map_continuum_to_lattice, moment_mc,
                       sample_operator)
from .riccati import gle_mc, lyapunov_sums, riccati_logdet
from .dbm import (DbmConfig, dbm_density, dbm_simulate, dbm_trz_average,
                  first_passage_ensemble)

__all__ = [
    "Boundary", "ContinuumParams", "FlowPhase", "ModelParams", "MomentumGrid",
    "RandomStream", "SaddlePhase", "canonicalize", "laplacian_eigenvalues",
    "barrier_height", "barrier_height_quadrature", "dbm_stationary_density",
    "dos_continuum_d1", "dos_tail_estimate", "double_root",
    "resolvent_constant", "spectral_edge", "Continuum1D", "f_integral",
    "pastur_resolvent", "spectral_density", "larkin_mass",
    "phase_boundary_mu_b", "saddle_solve", "e_typ", "generalized_lyapunov",
    "rate_function", "sigma_q", "sigma_q_d1_complex", "sigma_q_d1_simple",
    "var_e", "assemble_dense", "dos_histogram", "logdet_block_recursion",
    "logdet_dense", "map_continuum_to_lattice", "moment_mc", "sample_operator",
    "gle_mc", "lyapunov_sums", "riccati_logdet", "DbmConfig", "dbm_density",
    "dbm_simulate", "dbm_trz_average", "first_passage_ensemble",
]
