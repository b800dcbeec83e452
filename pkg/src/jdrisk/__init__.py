"""Two-sided jump-diffusion insurance risk toolkit.

Simulate the surplus process under stochastic investment returns, estimate
ruin and Gerber-Shiu quantities and discounted dividends by Monte Carlo,
evaluate the jump-free closed forms by quadrature, and solve the governing
integro-differential equations on a grid, with a harness that cross-checks
the routes against each other.
"""

from .model import (AssumptionsReport, JumpLaw, PenaltyFn, QuadratureError,
                    RiskParams, apply_G, apply_generator,
                    diffusion_coefficient, validate_model)
from .simulate import (BarrierStrategy, DividendEstimate, GerberShiuEstimate,
                       MCEstimate, PathBatch, PathOutcome, RuinBreakdown,
                       SimConfig, SimulationError, ThresholdStrategy,
                       estimate_barrier_dividends, estimate_gerber_shiu,
                       estimate_ruin, estimate_threshold_dividends,
                       simulate_batch, simulate_path)
from .specialfn import (AlphaBeta, DEParams, alpha_beta, canonical_de_params,
                        closed_barrier_value, closed_gerber_no_jumps,
                        closed_ruin_rho1, closed_threshold_value,
                        de_derivative_check, eval_D, eval_DE, eval_E, eval_K,
                        k_infinity)
from .idesolver import (BarrierMomentsResult, EquationSpec, Grid, GridFunction,
                        IDEConvergenceError, IDESolution,
                        ThresholdMomentsResult, barrier_equation_spec,
                        gerber_equation_spec, residual, solve_barrier_moments,
                        solve_gerber_ide, solve_linear_bvp,
                        solve_threshold_moments, threshold_equation_spec)
from .crosscheck import CrosscheckReport, run_scenario, scenario_names

__version__ = "0.1.0"
