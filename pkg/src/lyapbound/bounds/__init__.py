"""Upper bounds on the top Lyapunov exponent and lower bounds on the bottom one."""

from .composite import (
    Nonasymptotic,
    commutative_closed_form,
    eat_verify,
    inverse_improved_bounds,
    markov_bounds,
    nonasymptotic_bounds,
)
from .convex import (
    convex_upper_fw,
    finite_set_lower,
    finite_set_upper,
    frank_wolfe,
    jensen_sdp_upper,
    semigroup_closure,
    semigroup_upper,
    trivial_bounds,
    trivial_lower,
    trivial_upper,
)
from .group import detect_family, group_parametric_bounds, in_family
from .objective import LogForm, log_form
from .rankone import rank_one_lower, rank_one_upper
from .report import LOWER, UPPER, BoundReport, DensityMatrix, UnitVector

__all__ = [
    "BoundReport", "DensityMatrix", "UnitVector", "UPPER", "LOWER", "LogForm", "log_form",
    "trivial_bounds", "trivial_upper", "trivial_lower", "jensen_sdp_upper", "convex_upper_fw",
    "frank_wolfe", "finite_set_upper", "finite_set_lower", "semigroup_closure", "semigroup_upper",
    "rank_one_upper", "rank_one_lower", "group_parametric_bounds", "detect_family", "in_family",
    "commutative_closed_form", "inverse_improved_bounds", "nonasymptotic_bounds",
    "markov_bounds", "eat_verify", "Nonasymptotic",
]
