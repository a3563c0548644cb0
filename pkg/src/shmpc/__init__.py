"""Shrinking-horizon MPC for stochastic linear systems under STL chance constraints.

The package synthesizes controllers that satisfy bounded-time signal temporal
logic specifications with a configurable probability, for discrete-time linear
systems driven by either bounded-support or Gaussian disturbances.  The
pieces: an STL parser and robustness monitor, a compiler from robustness to
max-min/min-max canonical forms over inputs and noise, expectation bounds on
the robustness objective, chance-constraint decomposition with Chernoff or
quantile linearizations, a built-in LP/MILP solver, and the closed-loop
machinery with seeded Monte Carlo verification.
"""

from .canonical import (AffineExpr, FormContext, MaxMinForm, MinMaxForm,
                        atom_of_predicate, evaluate_form, max_min_form,
                        min_max_form, prune_form)
from .chance import (AT_LEAST, AT_MOST, ChanceAtom, LinearConstraint, RiskBudget,
                     allocate_risk, decompose, linearize_bounded,
                     linearize_gaussian, normal_quantile)
from .controller import (ControlSpec, RunResult, StepRecord, VerificationSummary,
                         feasibility_floor, monte_carlo_verify, open_loop_optimize,
                         replay_open_loop, run_closed_loop, run_stream,
                         step_optimize)
from .disturbance import DisturbanceModel, sample_disturbance
from .expectation import (bounded_conservative_bound, bounded_expectation_bound,
                          gaussian_maxmin_bound, gaussian_minmax_bound,
                          gaussian_moment, hermite)
from .intervals import Interval, interval_affine, interval_sum
from .milp import (LpProblem, MilpProblem, MilpSolution, dump_problem, load_problem,
                   solve_lp, solve_milp)
from .scenario import Scenario, ScenarioError, dump_scenario, load_scenario
from .stl import (StlFormula, Predicate, horizon, parse, robustness, satisfies)
from .system import (LinearSystem, Trajectory, explicit_state,
                     propagate_state_interval, simulate, transition_matrix)

__version__ = "0.1.0"
