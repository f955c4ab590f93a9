"""Regularized higher-order GSVD and cosine-sine decomposition of N matrices."""

__version__ = "0.1.0"

from .csd import (
    COMMON,
    INTERMEDIATE,
    ISOLATED,
    UNCLASSIFIED,
    HocsdResult,
    MeanOperator,
    OrthoSet,
    SubspaceReport,
    build_t_pi,
    canonicalize_hocsd,
    classify_subspaces,
    hocsd_factor,
    tau_of_p,
)
from .gsvd import (
    HogsvdResult,
    MatrixSet,
    QRStack,
    build_s_pi_direct,
    build_s_pi_via_t,
    canonicalize_hogsvd,
    hogsvd_factor,
    stack_and_qr,
    verify_reductions,
)
from .analysis import (
    PlantedInstance,
    SweepResult,
    g_pi_gradient,
    g_pi_value,
    pi_sweep,
    synthesize_instance,
    t_tilde_infinity,
    t_tilde_zero,
)
from .errors import HogsvdError
