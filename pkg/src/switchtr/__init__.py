"""Trust-region method for optimal control with on/off controls and switching costs.

Controls take values in ``{0} u [a, b]``, priced by a convex piecewise
quadratic function on the active branch, and every on/off switch costs a
fixed amount.  Each trust-region step solves its model problem exactly by
dynamic programming over sign patterns.
"""

from .criticality import CriticalityReport, c_prox, c_switch, criticality
from .dynamics import (DECAY_PRICING, SIR_PRICING, CustomModel, DecayParams, NumericalBlowup,
                       ProblemSpec, SirParams, decay_problem, finite_difference_gradient,
                       forward_state, full_objective, gradient_adjoint, gradient_check,
                       random_admissible, sir_problem, smooth_objective)
from .grid import ControlGrid, Jump, TimeGrid, jump_set, sign_pattern, total_variation
from .pricing import (PricingFunction, continuation_min, make_pricing, prox_scalar,
                      switching_value)
from .subproblem import (BudgetError, ModelInstance, brute_force_subproblem, build_tables,
                         extract_solution, model_value)
from .trust_region import SolveReport, TrConfig, solve, step

__version__ = "0.1.0"

__all__ = [
    "BudgetError", "ControlGrid", "CriticalityReport", "CustomModel", "DECAY_PRICING",
    "DecayParams", "Jump", "ModelInstance", "NumericalBlowup", "PricingFunction", "ProblemSpec",
    "SIR_PRICING", "SirParams", "SolveReport", "TimeGrid", "TrConfig", "brute_force_subproblem",
    "build_tables", "c_prox", "c_switch", "continuation_min", "criticality", "decay_problem",
    "extract_solution", "finite_difference_gradient", "forward_state", "full_objective",
    "gradient_adjoint", "gradient_check", "jump_set", "make_pricing", "model_value",
    "prox_scalar", "random_admissible", "sign_pattern", "sir_problem", "smooth_objective",
    "solve", "step", "switching_value", "total_variation",
]
