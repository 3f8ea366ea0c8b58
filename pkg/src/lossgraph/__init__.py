"""Bayesian structure learning for Gaussian graphical models with loss-based graph priors."""

__version__ = "0.1.0"

from .errors import (
    DomainError,
    EmptyAfterFiltering,
    EmptyList,
    LossGraphError,
    NotDecomposable,
    NotPD,
    ParseError,
    TooLarge,
    Unattainable,
)
from .fincs import (
    ScoredGraphList,
    SearchConfig,
    exact_posterior,
    global_move,
    initialize,
    local_move,
    resample_move,
    run_fincs,
    update_inclusion,
)
from .geometry import (
    CovarianceModel,
    GWishartSpec,
    iproject,
    kl_gaussian,
    min_kl_complete_to_subgraphs,
    sample_complete_gwishart,
    sample_mvn,
)
from .graphs import (
    Graph,
    JunctionTree,
    enumerate_decomposable,
    is_decomposable,
    junction_tree,
    legal_edge_moves,
    max_decomposable_subgraph,
    min_fill_triangulation,
)
from .likelihood import (
    DataMatrix,
    GraphScorer,
    LikelihoodConfig,
    log_hiw_norm_const,
    log_marginal_likelihood,
    log_mvgamma,
    log_posterior_score,
)
from .priors import PriorSpec, SizeDistribution, calibrate, log_prior, size_distribution, size_moments
