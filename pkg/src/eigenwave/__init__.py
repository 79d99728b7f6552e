"""Matrix-free eigensolver for discretized Laplacians via time-filtered wave solves."""

from .errors import (ConfigError, ConvergenceError, EigenWaveError,
                     InvariantError, NumericalError, ResourceLimitError,
                     SolverError, StabilityError)
from .grid import (BCKind, BoundaryConditionSpec, GridFunction, StructuredGrid,
                   active_slab, build_grid, ip_weights, n_active, pack_active,
                   scatter_active)
from .laplacian import (DiscreteLaplacian, assemble_dense, axis_symbol,
                        fill_ghost, unpack_active)
from .filters import (FilterSpec, SchemeKind, adjusted_omega, alpha_d, beta,
                      beta_discrete, beta_tilde_d, lambda_tilde, sigma_weights,
                      sinc)
from .wavesolve import (DefiniteSolver, ImplicitMatrix, LinearSolverSpec,
                        MultigridHierarchy, SolverKind, WaveState,
                        advance_step, first_step, march, mg_vcycle,
                        solve_definite_system, stable_dt_explicit)
from .waveop import EigenWaveOperator, operator_for
from .eigensolve import (ArnoldiFactorization, EigenSolveResult, PowerResult,
                         SplitMix64, arnoldi_expand, implicit_restart_solve,
                         power_iteration, rayleigh_lambda,
                         simultaneous_iteration, small_symmetric_eig)
from .reference import (ReferenceSpectrum, SpectralCluster,
                        analytic_continuous_box, analytic_discrete_box,
                        cluster_multiplicities, dense_reference,
                        eigenspace_distance)
from .config import RunConfig, parse_config
from .harness import (RunReport, compute_metrics, cr_estimate,
                      emit_filter_curve, measured_cr, run_case, scaling_study,
                      study_sweep)

__version__ = "0.1.0"
