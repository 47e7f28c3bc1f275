"""Depth statistics for object data living in general metric spaces.

The package computes statistical depths for samples that are described
only by their pairwise distances (correlation matrices, points on
hyperspheres, histograms, plain Euclidean points), estimates deepest
objects in-sample and by box-constrained optimization over coordinate
charts, and runs depth-based permutation inference for grouped data.
"""

__version__ = "0.1.0"

from .core import (
    DistanceMatrix,
    MetricCheckReport,
    b2_matrix,
    b3_matrix,
    check_metric_axioms,
    is_between,
    oja3_kernel,
    read_distance_csv,
    write_distance_csv,
)
from .deepest import (
    CoordinateChart,
    DeepestResult,
    OptimizerConfig,
    PcaModel,
    cholesky_decode,
    cholesky_encode,
    correlation_chart,
    deepest_in_sample,
    deepest_out_of_sample,
    optimize_box,
    pca_decode,
    pca_encode,
    pca_fit,
)
from .depths import (
    DepthMethod,
    DepthReport,
    depth_all_sample,
    euclidean_oja_depth,
    mhd_depth,
    mld_depth,
    mod2_depth,
    mod3_depth,
    mod3_depth_subsampled,
    msd_depth,
)
from .errors import (
    DegenerateDecodeError,
    InsufficientSampleError,
    InvalidArgumentError,
    MetricViolationError,
    NotPositiveDefiniteError,
)
from .inference import (
    PermutationReport,
    SwapExperimentReport,
    deepest_distance_statistic,
    label_swap_experiment,
    permutation_test,
)
from .simulation import (
    CorrSimConfig,
    ExperimentReport,
    SphereSimConfig,
    gen_correlation_sample,
    gen_histogram_groups,
    gen_sphere_sample,
    random_orthogonal,
    run_location_experiment,
)
from .spaces import (
    CorrelationMatrix,
    EuclideanPoint,
    Histogram,
    ObjectSet,
    UnitVector,
    distance_matrix,
    dump_objects,
    euclidean_distance,
    load_histogram_csv,
    load_objects,
    query_distances,
    spd_distance,
    sphere_distance,
    wasserstein2_distance,
)

__all__ = [name for name in dir() if not name.startswith("_")]
