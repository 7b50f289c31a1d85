"""Continuous hands-off (sparse) optimal control of LTI plants.

The package discretizes the minimum L1 / elastic-net / CLOT control problem
for a single-input plant and solves the resulting convex program with a
consensus ADMM built from closed-form proximal maps.
"""

from handsoff.plant import (
    InitialValueProblem,
    PlantSpec,
    StateSpace,
    controllability_rank,
    is_normal,
    poly_from_roots,
    realize,
)
from handsoff.discretize import (
    DiscreteProblem,
    DiscreteSystem,
    build_problem,
    matrix_exponential,
    zoh_discretize,
)
from handsoff.solver import (
    InfeasibleError,
    Regularizer,
    Solution,
    SolverOptions,
    prox_clot,
    prox_en,
    prox_l1,
    project_affine,
    project_box,
    solve,
)
from handsoff.trajectory import Trajectory, simulate, state_norms
from handsoff.sparsity import (
    ControlMetrics,
    comparison_table,
    control_metrics,
    discrete_norms,
    max_step,
    sparsity_density,
)

__version__ = "0.1.0"
