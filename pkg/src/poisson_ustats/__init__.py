"""Poisson U-statistics: simulation, chaos expansions, normal-approximation bounds.

The package covers the full pipeline for sums of a symmetric kernel over
k-tuples of distinct points of a Poisson process: sampling configurations,
evaluating and differencing the functionals, exact variance and product
formulas on simple functions, fourth-moment quantities, Wasserstein bounds
on the distance to a standard normal, and a harness that measures the decay
of that distance across intensities.
"""

from .applications import (
    convex_position_kernel,
    convex_position_mask,
    counterexample_closed_form,
    counterexample_kernel,
    gilbert_f1,
    gilbert_kernel,
    hull_vertices,
    kernel_names,
    kernel_summaries,
    line_intersection,
    line_intersection_kernel,
    make_kernel,
    orientation,
    pairwise_distance_kernel,
    sylvester_estimate,
    SylvesterResult,
)
from .chaos_algebra import (
    apply_replacement,
    cell_counts,
    CellGrid,
    chaos_kernels_simple,
    enumerate_pi,
    enumerate_pi_bar,
    is_connected,
    m_ij,
    MAX_PARTITION_VARIABLES,
    PartitionDiagram,
    product_expectation,
    SimpleFunction,
    wiener_ito,
    wiener_ito_counts,
)
from .clt_bounds import (
    BoundReport,
    default_local_constant,
    geometric_bound,
    local_bound,
    LocalTerm,
    MTerm,
    r_terms_small,
    wasserstein_bound,
)
from .distance import (
    DistanceEstimate,
    kolmogorov_to_normal,
    normal_distances,
    SampleSet,
    standardize,
    wasserstein_to_normal,
)
from .errors import (
    AssumptionViolationError,
    CapacityError,
    ConfigError,
    DegenerateFunctionalError,
    IntegrationError,
    LocalityError,
    WindowError,
)
from .harness import (
    default_window,
    emit_csv,
    emit_report,
    ExperimentConfig,
    moment_table,
    rate_experiment,
    RateFitResult,
    read_rates,
    read_records,
    ReplicateRecord,
    run_replicates,
    window_from_spec,
    window_to_spec,
)
from .point_process import (
    BallWindow,
    BoxWindow,
    IntensityModel,
    LineWindow,
    PointConfiguration,
    read_points_csv,
    sample_lines,
    sample_points,
    unit_ball_volume,
    window_measure,
    write_points_csv,
)
from .ustat_core import (
    chaos_kernel,
    chaos_kernel_map,
    check_symmetry,
    difference,
    Estimate,
    evaluate,
    expectation,
    Integrator,
    iterated_difference,
    KernelEstimate,
    ou_generator,
    ou_generator_direct,
    ou_inverse,
    UStatKernel,
    variance,
    variance_terms,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # errors
    "AssumptionViolationError",
    "CapacityError",
    "ConfigError",
    "DegenerateFunctionalError",
    "IntegrationError",
    "LocalityError",
    "WindowError",
    # point processes
    "BallWindow",
    "BoxWindow",
    "LineWindow",
    "IntensityModel",
    "PointConfiguration",
    "sample_points",
    "sample_lines",
    "read_points_csv",
    "write_points_csv",
    "window_measure",
    "unit_ball_volume",
    # functionals
    "Estimate",
    "Integrator",
    "UStatKernel",
    "KernelEstimate",
    "evaluate",
    "expectation",
    "difference",
    "iterated_difference",
    "ou_generator",
    "ou_generator_direct",
    "ou_inverse",
    "chaos_kernel",
    "chaos_kernel_map",
    "variance",
    "variance_terms",
    "check_symmetry",
    # discrete chaos algebra
    "CellGrid",
    "SimpleFunction",
    "PartitionDiagram",
    "cell_counts",
    "wiener_ito",
    "wiener_ito_counts",
    "enumerate_pi",
    "enumerate_pi_bar",
    "is_connected",
    "apply_replacement",
    "product_expectation",
    "m_ij",
    "chaos_kernels_simple",
    "MAX_PARTITION_VARIABLES",
    # normal-approximation bounds
    "MTerm",
    "LocalTerm",
    "BoundReport",
    "wasserstein_bound",
    "geometric_bound",
    "local_bound",
    "default_local_constant",
    "r_terms_small",
    # distances
    "SampleSet",
    "DistanceEstimate",
    "standardize",
    "wasserstein_to_normal",
    "kolmogorov_to_normal",
    "normal_distances",
    # model kernels
    "orientation",
    "hull_vertices",
    "convex_position_mask",
    "line_intersection",
    "gilbert_kernel",
    "gilbert_f1",
    "pairwise_distance_kernel",
    "counterexample_kernel",
    "counterexample_closed_form",
    "convex_position_kernel",
    "line_intersection_kernel",
    "sylvester_estimate",
    "SylvesterResult",
    "kernel_names",
    "kernel_summaries",
    "make_kernel",
    # experiments
    "ExperimentConfig",
    "ReplicateRecord",
    "RateFitResult",
    "window_from_spec",
    "window_to_spec",
    "default_window",
    "moment_table",
    "run_replicates",
    "rate_experiment",
    "emit_csv",
    "emit_report",
    "read_records",
    "read_rates",
]
