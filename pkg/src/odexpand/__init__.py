"""Asymptotic expansions for dissipative ODE systems, with verification.

The package builds expansion terms for y' = -Ay + G(y) + f(t) when the
forcing decays coherently (exponentials, powers, or iterated logarithms),
and checks the result numerically: it integrates the ODE, measures how
fast the remainder beyond each truncation decays, and fits any free
constants attached to resonant orders.
"""

from .engine import (
    Expansion,
    ExpansionOrder,
    ExponentLadder,
    ProblemSpec,
    ValidationError,
    build_ladder,
    eval_partial_sum,
    expand,
    extend,
    symbolic_defect,
    with_kernel_fit,
)
from .expsum import ExpPolySum
from .ladder import LadderPoint, exp_zero, iter_exp, iter_log, ladder_eval
from .logpower import (
    LogPowerSum,
    ShiftedInverseCache,
    descent_op,
    shifted_inverse,
    time_derivative,
    weight_op,
)
from .multilinear import MultiLinearMap
from .numerics import (
    DecayFit,
    DuhamelCheck,
    SmallnessCertificate,
    convolution_integral,
    decay_envelope_constant,
    duhamel_check,
    fit_decay,
    fit_kernel_constants,
    integrate,
    matrix_exp_norm,
    remainder_series,
    smallness_certificate,
)
from .realify import (
    TrigLadderSum,
    TrigPolySum,
    check_conjugation_symmetry,
    complexify_map,
    from_trig_ladder,
    imag_residue,
    to_trig_ladder,
    to_trig_poly,
)
from .resolvent import (
    ZERO_FREE_CONSTANTS,
    homogeneous_modes,
    resolvent_defect,
    resolvent_solve_exp,
)
from .rk45 import StepUnderflow, Trajectory, integrate_rhs

__version__ = "0.1.0"

__all__ = [
    "DecayFit",
    "DuhamelCheck",
    "Expansion",
    "ExpansionOrder",
    "ExpPolySum",
    "ExponentLadder",
    "LadderPoint",
    "LogPowerSum",
    "MultiLinearMap",
    "ProblemSpec",
    "ShiftedInverseCache",
    "SmallnessCertificate",
    "StepUnderflow",
    "Trajectory",
    "TrigLadderSum",
    "TrigPolySum",
    "ValidationError",
    "ZERO_FREE_CONSTANTS",
    "build_ladder",
    "check_conjugation_symmetry",
    "complexify_map",
    "convolution_integral",
    "decay_envelope_constant",
    "descent_op",
    "duhamel_check",
    "eval_partial_sum",
    "exp_zero",
    "expand",
    "extend",
    "fit_decay",
    "fit_kernel_constants",
    "from_trig_ladder",
    "homogeneous_modes",
    "imag_residue",
    "integrate",
    "integrate_rhs",
    "iter_exp",
    "iter_log",
    "ladder_eval",
    "matrix_exp_norm",
    "remainder_series",
    "resolvent_defect",
    "resolvent_solve_exp",
    "shifted_inverse",
    "smallness_certificate",
    "symbolic_defect",
    "time_derivative",
    "to_trig_ladder",
    "to_trig_poly",
    "weight_op",
    "with_kernel_fit",
]
