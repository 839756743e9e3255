"""Discrete determinantal point processes approximating continuous ensembles.

Build admissible kernel matrices over sampled point clouds (Gram
restrictions, orthonormal-polynomial projections, graph-harmonic surrogates,
thresholded random-graph estimates), sample them exactly, compute linear
statistics with exact expectations, check determinant stability bounds, and
run the benchmark experiments from configuration files.
"""

from .dpp_engine import (
    IndexSample,
    ValidatedDpp,
    enumerate_pmf,
    inclusion_probability,
    random_valid_kernel,
    sample_dpp,
    sample_dpp_many,
    validate_kernel,
)
from .estimators import (
    WeightedEstimate,
    coreset_estimate_dpp,
    coreset_estimate_iid,
    draw_with_replacement,
    quantile_relative_error,
    sensitivity_scores,
    sphere_integral_dpp,
    sphere_integral_iid,
    true_loss,
)
from .kernel_builders import (
    AdjacencyMatrix,
    ContinuousKernel,
    HarmonicDetails,
    KernelMatrix,
    MultiIndex,
    constant_kernel,
    gaussian_kernel,
    graded_monomials,
    gram_kernel,
    harmonic_kernel,
    harmonic_kernel_details,
    harmonic_kernel_family,
    kde_density,
    latent_graph,
    load_kernel,
    monomial_matrix,
    normalized_indicator_profile,
    ope_kernel,
    orthonormalize_columns,
    save_kernel,
    squared_distances,
    usvt_kernel,
    usvt_retained_rank,
)
from .point_cloud import (
    PointCloud,
    load_points,
    sample_uniform_cube,
    sample_uniform_sphere,
    save_points,
)
from .rng import SeededRng
from .statistics import (
    TestFunction,
    bound_report_csv,
    det_bound_frobenius,
    det_bound_max,
    empirical_moments,
    expected_linear_statistic,
    expected_statistic_continuous,
    kernel_error,
    linear_statistic,
    measure_error,
)

__all__ = [
    "AdjacencyMatrix",
    "ContinuousKernel",
    "HarmonicDetails",
    "IndexSample",
    "KernelMatrix",
    "MultiIndex",
    "PointCloud",
    "SeededRng",
    "TestFunction",
    "ValidatedDpp",
    "WeightedEstimate",
    "bound_report_csv",
    "constant_kernel",
    "coreset_estimate_dpp",
    "coreset_estimate_iid",
    "det_bound_frobenius",
    "det_bound_max",
    "draw_with_replacement",
    "empirical_moments",
    "enumerate_pmf",
    "expected_linear_statistic",
    "expected_statistic_continuous",
    "gaussian_kernel",
    "graded_monomials",
    "gram_kernel",
    "harmonic_kernel",
    "harmonic_kernel_details",
    "harmonic_kernel_family",
    "inclusion_probability",
    "kde_density",
    "kernel_error",
    "latent_graph",
    "linear_statistic",
    "load_kernel",
    "load_points",
    "measure_error",
    "monomial_matrix",
    "normalized_indicator_profile",
    "ope_kernel",
    "orthonormalize_columns",
    "quantile_relative_error",
    "random_valid_kernel",
    "sample_dpp",
    "sample_dpp_many",
    "sample_uniform_cube",
    "sample_uniform_sphere",
    "save_kernel",
    "save_points",
    "sensitivity_scores",
    "sphere_integral_dpp",
    "sphere_integral_iid",
    "squared_distances",
    "true_loss",
    "usvt_kernel",
    "usvt_retained_rank",
    "validate_kernel",
]
