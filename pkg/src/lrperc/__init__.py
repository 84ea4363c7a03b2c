"""Monte Carlo laboratory for long-range percolation on boxes of Z^d."""

from .clusters import ClusterForest, build_clusters, connected
from .critical import (
    BracketingError,
    CriticalEstimate,
    beta_sweep,
    find_beta_c,
    run_point,
    slope_statistic,
)
from .kernel import KernelSpec, edge_probability, kernel_value, smoothed_norm, sup_norm
from .lattice import BoxLattice, enumerate_displacement_classes
from .observables import (
    SweepRecord,
    TwoPointTable,
    XiEstimate,
    cluster_tail,
    correlation_length_estimate,
    restricted_two_point,
    spatial_average,
    susceptibility_estimate,
    susceptibility_with_stderr,
    triangle_estimate,
    two_point_estimate,
)
from .sampler import Configuration, sample_configuration
from .scaling import FitResult, collapse_check, exponent_report, fit_power_law

__version__ = "0.1.0"

__all__ = [
    "KernelSpec",
    "BoxLattice",
    "Configuration",
    "ClusterForest",
    "TwoPointTable",
    "SweepRecord",
    "XiEstimate",
    "CriticalEstimate",
    "FitResult",
    "BracketingError",
    "kernel_value",
    "edge_probability",
    "sup_norm",
    "smoothed_norm",
    "enumerate_displacement_classes",
    "sample_configuration",
    "build_clusters",
    "connected",
    "two_point_estimate",
    "spatial_average",
    "susceptibility_estimate",
    "correlation_length_estimate",
    "triangle_estimate",
    "cluster_tail",
    "restricted_two_point",
    "susceptibility_with_stderr",
    "slope_statistic",
    "run_point",
    "find_beta_c",
    "beta_sweep",
    "fit_power_law",
    "exponent_report",
    "collapse_check",
    "__version__",
]
