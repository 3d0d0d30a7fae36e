"""Numerical toolkit for Markov transition functions, resolvents and Ray cones."""

from .errors import SMPError
from .kernels import (GridStateSpace, SignedKernel, StatePoint, Tag, TestFunction, compose,
                      identity, norm, power)
from .resolvent import (ResolventSpec, SemigroupSpec, check_chapman_kolmogorov,
                        check_resolvent_identity, complete_monotonicity_check,
                        is_alpha_supermedian, laplace_forward, post_widder_invert,
                        supermedian_limit)
from .zoo import EXAMPLE_IDS, eval_Pt, eval_Ua, get_example

__all__ = [
    "SMPError", "GridStateSpace", "SignedKernel", "StatePoint", "Tag", "TestFunction",
    "compose", "identity", "norm", "power", "ResolventSpec", "SemigroupSpec",
    "check_chapman_kolmogorov", "check_resolvent_identity", "complete_monotonicity_check",
    "is_alpha_supermedian", "laplace_forward", "post_widder_invert", "supermedian_limit",
    "EXAMPLE_IDS", "eval_Pt", "eval_Ua", "get_example",
]
__version__ = "0.1.0"
