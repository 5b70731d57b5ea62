"""Latent-space network models in hyperbolic and spherical geometry."""

from .geometry import (
    DiskPoint,
    FrechetMean,
    Geometry,
    GeometryError,
    MoebiusIsometry,
    SphereIsometry,
    SpherePoint,
    frechet_mean,
    hyperbolic_distance,
    spherical_distance,
)
from .distributions import (
    GaussianParams,
    HyperbolicNormalParams,
    VmfParams,
    gaussian_log_density,
    hyp_normal_log_density,
    hyp_normal_Z,
    sample_hyp_normal,
    sample_vmf,
    vmf_log_density,
)
from .model import (
    LatentConfiguration,
    Network,
    PriorSpec,
    edge_probability,
    log_likelihood,
    log_posterior,
    sample_network,
)
from .identifiability import (
    AnchorSpec,
    DegenerateAnchorsError,
    TooFewNodesError,
    canonicalize,
    select_anchors,
    solve_hyperbolic_isometry,
    solve_sphere_isometry,
)
from .initialization import embed_mds, graph_distances, grid_search_alpha, mds_stress
from .mcmc import McmcConfig, McmcTrace, effective_sample_size, run_mcmc
from .bbvi import BbviConfig, run_bbvi
from .evaluate import posterior_predictive_probs, separation_stats, summarize_latent

__version__ = "0.1.0"
