"""Kernel Stein goodness-of-fit tests for exponential random graph models."""

from .ergm import (
    CapacityError,
    ErApproximation,
    ErgmModel,
    ExactDistribution,
    GlauberSampler,
    UnsupportedStatisticError,
    conditional_edge_probs,
    e2st,
    edges_only,
    er_model,
    exact_distribution,
    glauber_sample,
    glauber_sample_edges,
    solve_a_star,
)
from .gof import (
    ConfigurationError,
    RankDeficiencyError,
    TestReport,
    degree_variance_test,
    gksd_multi_test,
    gkss_test,
    kdsd_multi_test,
    mahalanobis_test,
    mgra_tv_test,
)
from .graph import (
    EdgeListParseError,
    Graph,
    InvalidPairError,
    StatisticSpec,
    change_statistic,
    count_statistic,
    erdos_renyi,
    pair_index,
    pair_of,
    read_edge_list,
    summary_distribution,
    write_edge_list,
)
from .kernels import (
    EdgeCountKernel,
    GaussAdjKernel,
    GeometricRWKernel,
    KernelDivergenceError,
    KStepRWKernel,
    ShortestPathKernel,
    VEGKernel,
    WLKernel,
    gram,
    parse_kernel,
)
from .stein import GkssResult, gkss_full, gkss_resampled, stein_apply, stein_h

__version__ = "0.1.0"
