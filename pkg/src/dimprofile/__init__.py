"""Capacity-based box-dimension profiles of finite point clouds."""

from .errors import (
    DimProfileError,
    InvalidParameterError,
    NumericalError,
    ResourceLimitError,
)
from .pointset import (
    IfsMap,
    IfsSpec,
    PointSet,
    diameter,
    generate_cantor,
    generate_ifs,
    generate_segment,
    min_gap,
    product_set,
)
from .kernels import KernelMatrix, KernelSpec, assemble_matrix, gauss, phi, psi
from .capacity import (
    CapacityResult,
    DiscreteMeasure,
    SolverOptions,
    capacity_curve,
    energy,
    potential,
    solve_equilibrium,
)
from .boxcount import BoxCountResult, count_curve, mesh_count
from .profiles import (
    ProfileCurve,
    ScalingFit,
    estimate_profile,
    fit_scaling,
    profile_curve,
    verify_inequalities,
)
from .experiments import ExperimentReport
from .grassmann import (
    Subspace,
    WeightedProjection,
    project,
    sample_subspace,
    tube_probability,
    verify_tube_comparability,
    weighted_projection,
)

__version__ = "0.1.0"
