"""Monotone games on Riemannian manifolds: geometry kernels, first-order
solvers with curvature-independent schedules, and a verification harness."""

from .errors import RieGamesError
from .manifolds import (
    SPD,
    Euclidean,
    Hyperboloid,
    Point,
    Product,
    TangentVector,
    curvature_distortion,
    dist,
    exp_map,
    inner,
    log_map,
    project_tangent,
    transport,
)
from .games import (
    GameSpec,
    StochasticOracle,
    check_monotonicity,
    gap_bound,
    gradient_norm,
    joint_gradient,
    make_min_max_distance_game,
    make_potential_distance_game,
    make_robust_karcher_game,
    sample_gradient,
    total_gap_bound,
)
from .solvers import (
    Box,
    MixedVIProblem,
    NonnegativeOrthant,
    RunTrace,
    SolverConfig,
    constrained_game_to_mixed_vi,
    mixed_vi_schedule,
    rgd_step,
    run_mixed_vi,
    run_reg,
    run_rgd,
    tangent_residual,
    theorem_schedule,
)
from .verify import (
    audit_descent,
    audit_mixed_descent,
    finite_diff_directional,
    fit_contraction,
    karcher_midpoint_oracle,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
