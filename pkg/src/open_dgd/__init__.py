"""Decentralized gradient descent on a penalized consensus objective, in open systems."""
from ._accel import BACKEND, NUMBA_AVAILABLE
from .functions import (FunctionClassParams, QuadraticFunction, RotatedQuadratic2D, evaluate,
                        gradient, make_paper_pair, validate_membership)
from .network import Network, build_network, laplacian_apply, laplacian_quadratic_form
from .objective import (ProblemInstance, F_rho_gradient, F_rho_value, F_value,
                        exact_minimizer_F_rho, exact_minimizer_f)
from .dgd import DGDTrace, dgd_step, dgd_step_mixing, run
from .open_system import (Event, EventSchedule, StabilityEnvelope, adversarial_probe,
                          simulate_open, stability_radius)
from .bounds import (BoundsReport, check_localization, check_sensitivity,
                     check_stability_envelope, check_two_function_bound)
from .worstcase import SearchSpace, scaling_report, search

__version__ = "0.1.0"
