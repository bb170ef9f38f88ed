"""Periodic homogenisation of one-dimensional stable-like nonlocal operators.

Dense finite-volume discretisations of ``L f(x) = p.v. int (f(y) - f(x))
K(x/eps, y/eps) |x - y|^(-1-alpha) dy`` on an interval and on the unit torus,
cell-problem correctors, Dirichlet solves, a killed-chain Monte Carlo check and
convergence-rate studies against the homogenised operator.

Hot loops are numba-compiled; set ``STABLEHOMOG_BACKEND=numpy`` to use the
pure numpy implementations instead.
"""

from ._accel import BACKEND
from .kernel import (KernelSpec, QuadratureSettings, additive_cosine, constant_kernel,
                     drift_F, drift_F_eps, k_bar, k_bar_of_x, kernel_from_config,
                     product_cosine, validate_kernel)
from .discretize import (DomainGrid, GeneratorMatrix, TorusGrid, assemble_domain_generator,
                         assemble_torus_generator, killing_rate)
from .cell import CellCorrectors, compute_correctors, semigroup_oracle, solve_cell_problem
from .dirichlet import (DirichletProblem, DirichletSolution, expected_exit_time,
                        getoor_exact_solution, green_matrix, solve_dirichlet)
from .corrector import TwoScaleExpansion, assemble_v_eps, eval_cutoff
from .mc import McEstimate, exit_time_sweep, feynman_kac_estimate, simulate_exit
from .experiments import (ConvergenceReport, StudyConfig, fit_rate, l1_error, l2_error,
                          run_corrector_diagnostic, run_theorem1_study, run_theorem2_study)

__version__ = "0.1.0"
