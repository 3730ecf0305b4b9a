"""Set-membership information fusion for nonlinear multisensor systems."""

__version__ = "0.1.0"

from .centralized import build_blocks, fuse_update, update_containment_matrix  # noqa: E402
from .distributed import build_upsilon, fuse_distributed  # noqa: E402
from .ellipsoid import (  # noqa: E402
    Ellipsoid,
    SizeObjective,
    axis_error_bound,
    cholesky_factor,
    contains,
    min_eigenvalue,
    objective_value,
)
from .model import SystemModel, numeric_jacobian, tracking_model  # noqa: E402
from .multi import WeightBank, intersect_axis_bounds, run_parallel  # noqa: E402
from .prediction import predict, prediction_containment_matrix  # noqa: E402
from .remainder import RemainderBound, bound_remainder  # noqa: E402
from .tau import TauAssignment, TauProblem, grid_oracle, is_feasible, solve  # noqa: E402

__all__ = [
    "Ellipsoid",
    "RemainderBound",
    "SizeObjective",
    "SystemModel",
    "TauAssignment",
    "TauProblem",
    "WeightBank",
    "axis_error_bound",
    "bound_remainder",
    "build_blocks",
    "build_upsilon",
    "cholesky_factor",
    "contains",
    "fuse_distributed",
    "fuse_update",
    "grid_oracle",
    "intersect_axis_bounds",
    "is_feasible",
    "min_eigenvalue",
    "numeric_jacobian",
    "objective_value",
    "predict",
    "prediction_containment_matrix",
    "run_parallel",
    "solve",
    "tracking_model",
    "update_containment_matrix",
]
