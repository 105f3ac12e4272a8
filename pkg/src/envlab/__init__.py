"""Envariance, environment fine-graining and measurement machines for multipartite pure states."""

from .config import Tolerances, get_tolerances, set_tolerances, tolerances
from .envariance import (
    EnvarianceVerdict,
    causality_check,
    composite_swap,
    is_envariant,
    phase_op,
    swap_op,
    verify_counter,
)
from .finegrain import (
    FineGrainingMap,
    RationalWeightPlan,
    add_ancilla_env,
    apply_map,
    finegrain_env,
    pull_back,
    rationalize,
)
from .machines import (
    MeasurementMachine,
    OutcomeStatistics,
    PostMeasurementState,
    finegrained_machine,
    local_machine,
    outcome_statistics,
    paradox_report,
    register,
    sample,
)
from .statespace import (
    DensityMatrix,
    LocalOperator,
    PureState,
    SchmidtDecomposition,
    SubsystemLayout,
    apply_operator,
    build_state,
    overlap,
    ray_distance,
    reduced_density,
    schmidt,
    state_distance,
)

__version__ = "0.1.0"

__all__ = [
    "DensityMatrix",
    "EnvarianceVerdict",
    "FineGrainingMap",
    "LocalOperator",
    "MeasurementMachine",
    "OutcomeStatistics",
    "PostMeasurementState",
    "PureState",
    "RationalWeightPlan",
    "SchmidtDecomposition",
    "SubsystemLayout",
    "Tolerances",
    "add_ancilla_env",
    "apply_map",
    "apply_operator",
    "build_state",
    "causality_check",
    "composite_swap",
    "finegrain_env",
    "finegrained_machine",
    "get_tolerances",
    "is_envariant",
    "local_machine",
    "outcome_statistics",
    "overlap",
    "paradox_report",
    "phase_op",
    "pull_back",
    "rationalize",
    "ray_distance",
    "reduced_density",
    "register",
    "sample",
    "schmidt",
    "set_tolerances",
    "state_distance",
    "swap_op",
    "tolerances",
    "verify_counter",
]
