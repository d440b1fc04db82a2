"""Robust pooling problems under uncertain inlet concentrations."""

from .pooling import (
    PoolingInstance,
    Solution,
    check_feasibility,
    load_instance,
    objective,
    parse_instance,
    profit,
)
from .uncertainty import Geometry, ScenarioPoint, UncertaintySet, kernel_covariance
from .robust import (
    CuttingPlaneConfig,
    MethodResult,
    SafetyFactorConfig,
    build_reformulation,
    cutting_plane_solve,
    nominal_solve,
    optimal_safety_factor,
    reformulation_solve,
    safety_factor_solve,
    separation,
)

__version__ = "0.1.0"

__all__ = [
    "CuttingPlaneConfig",
    "Geometry",
    "MethodResult",
    "PoolingInstance",
    "SafetyFactorConfig",
    "ScenarioPoint",
    "Solution",
    "UncertaintySet",
    "build_reformulation",
    "check_feasibility",
    "cutting_plane_solve",
    "kernel_covariance",
    "load_instance",
    "nominal_solve",
    "objective",
    "optimal_safety_factor",
    "parse_instance",
    "profit",
    "reformulation_solve",
    "safety_factor_solve",
    "separation",
]
