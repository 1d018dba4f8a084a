"""Kac's random walk on SO(n) and U(n): samplers, contracting couplings,
empirical transport distances, mixing experiments and Kac-walk dimension
reduction."""

from .couplings import (
    CoupledState,
    CoupledStepRecord,
    CoupledTrace,
    coupled_density_step,
    coupled_kac_step,
    coupled_unitary_step,
    coupling_angle,
    run_coupled_walk,
)
from .dimreduce import (
    DistortionReport,
    PointCloud,
    distortion_report,
    haar_jl_baseline,
    kac_jl_transform,
    stiefel_project,
)
from .experiments import (
    ContractionReport,
    MixingCurve,
    VolumeEstimate,
    ball_volume_mc,
    cap_volume_mc,
    coupled_decay_curve,
    diameter_probe,
    local_contraction_probe,
    lower_bound_calculator,
    metric_sandwich_probe,
    mixing_curve,
)
from .geometry import (
    GroupError,
    basis_coefficient,
    canonical_angles,
    check_group_element,
    geodesic_distance,
    hs_distance,
    planar_rotation,
    skew_basis,
    tangent_project,
)
from .transport import (
    Assignment,
    CostMatrix,
    EmpiricalMeasure,
    cost_matrix,
    dual_lower_bound,
    empirical_wasserstein,
    solve_assignment,
)
from .walks import (
    AngleDensity,
    PlanarStep,
    Trajectory,
    WalkConfig,
    apply_step,
    apply_step_to_vector,
    haar_sample,
    run_walk,
    sample_density_step,
    sample_kac_step,
    sample_unitary_step,
)

__all__ = [
    "CoupledState",
    "CoupledStepRecord",
    "CoupledTrace",
    "coupled_density_step",
    "coupled_kac_step",
    "coupled_unitary_step",
    "coupling_angle",
    "run_coupled_walk",
    "DistortionReport",
    "PointCloud",
    "distortion_report",
    "haar_jl_baseline",
    "kac_jl_transform",
    "stiefel_project",
    "ContractionReport",
    "MixingCurve",
    "VolumeEstimate",
    "ball_volume_mc",
    "cap_volume_mc",
    "coupled_decay_curve",
    "diameter_probe",
    "local_contraction_probe",
    "lower_bound_calculator",
    "metric_sandwich_probe",
    "mixing_curve",
    "GroupError",
    "basis_coefficient",
    "canonical_angles",
    "check_group_element",
    "geodesic_distance",
    "hs_distance",
    "planar_rotation",
    "skew_basis",
    "tangent_project",
    "Assignment",
    "CostMatrix",
    "EmpiricalMeasure",
    "cost_matrix",
    "dual_lower_bound",
    "empirical_wasserstein",
    "solve_assignment",
    "AngleDensity",
    "PlanarStep",
    "Trajectory",
    "WalkConfig",
    "apply_step",
    "apply_step_to_vector",
    "haar_sample",
    "run_walk",
    "sample_density_step",
    "sample_kac_step",
    "sample_unitary_step",
]
