"""Generative latent-space network model: edge probabilities, likelihood,
posterior density, and graph simulation."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .geometry import (
    Geometry,
    as_geometry,
    distance_matrix,
    hyperbolic_distance,
)
from .distributions import (
    GaussianParams,
    HyperbolicNormalParams,
    VmfParams,
    gaussian_log_density,
    hyp_normal_log_density,
    sample_hyp_normal,
    sample_vmf,
    vmf_log_density,
)

__all__ = [
    "Network",
    "LatentConfiguration",
    "PriorSpec",
    "edge_probability",
    "log_likelihood",
    "log_posterior",
    "theta_z_log_prior",
    "sample_network",
    "default_theta_z",
]


@dataclass(frozen=True)
class Network:
    """Symmetric binary adjacency with zero diagonal."""

    n: int
    adjacency: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.adjacency, dtype=bool)
        if a.shape != (self.n, self.n):
            raise ValueError(f"adjacency must be ({self.n}, {self.n}), got {a.shape}")
        if np.any(np.diag(a)):
            raise ValueError("self ties are not allowed")
        if not np.array_equal(a, a.T):
            raise ValueError("adjacency must be symmetric")
        object.__setattr__(self, "adjacency", a)

    @classmethod
    def from_edges(cls, n: int, edges) -> "Network":
        """Build from 0-based (i, j) pairs; duplicates and orientation collapse."""
        a = np.zeros((n, n), dtype=bool)
        for i, j in edges:
            if i == j:
                raise ValueError(f"self tie ({i}, {j}) is not allowed")
            if not (0 <= i < n and 0 <= j < n):
                raise ValueError(f"edge ({i}, {j}) out of range for n={n}")
            a[i, j] = a[j, i] = True
        return cls(n, a)

    @property
    def n_edges(self) -> int:
        return int(self.adjacency.sum()) // 2

    def degrees(self) -> np.ndarray:
        return self.adjacency.sum(axis=1).astype(int)

    def edge_list(self):
        """Sorted list of 0-based (i, j) pairs with i < j."""
        ii, jj = np.nonzero(np.triu(self.adjacency, k=1))
        return list(zip(ii.tolist(), jj.tolist()))

    def dyads_upper(self):
        """Index pair (rows, cols) of the strict upper triangle."""
        return np.triu_indices(self.n, k=1)

    def y_upper(self) -> np.ndarray:
        """Binary dyad labels y_ij for i < j, as floats."""
        iu = self.dyads_upper()
        return self.adjacency[iu].astype(float)


@dataclass
class LatentConfiguration:
    """Full model state: geometry, latent coordinates, base rate, and the
    latent-distribution parameters."""

    geometry: Geometry
    z: np.ndarray
    alpha: float
    theta_z: HyperbolicNormalParams | VmfParams

    def __post_init__(self):
        self.geometry = as_geometry(self.geometry)
        z = np.asarray(self.z, dtype=float)
        if z.ndim != 2 or z.shape[1] != self.geometry.ambient_dim:
            raise ValueError(
                f"z must be (N, {self.geometry.ambient_dim}) for {self.geometry.value}"
            )
        if self.geometry is Geometry.HYPERBOLIC:
            if np.any(np.sum(z * z, axis=1) >= 1.0):
                raise ValueError("hyperbolic coordinates must lie inside the unit disk")
            if not isinstance(self.theta_z, HyperbolicNormalParams):
                raise TypeError("hyperbolic geometry needs HyperbolicNormalParams")
        else:
            norms = np.linalg.norm(z, axis=1)
            if np.any(np.abs(norms - 1.0) > 1e-9):
                raise ValueError("spherical coordinates must be unit vectors")
            z = z / norms[:, None]
            if not isinstance(self.theta_z, VmfParams):
                raise TypeError("spherical geometry needs VmfParams")
        self.z = z

    @property
    def n(self) -> int:
        return self.z.shape[0]

    def distance_matrix(self) -> np.ndarray:
        return distance_matrix(self.z, self.geometry)


@dataclass(frozen=True)
class PriorSpec:
    """Priors for the posterior: Gaussian on alpha plus hyperparameters for
    the theta_z prior (uniform-in-hyperbolic-ball mean with flat truncated
    sigma on the disk; uniform mean with Gamma kappa on the sphere)."""

    alpha_prior: GaussianParams = field(default_factory=lambda: GaussianParams(0.0, 10.0))
    mu_radius: float = 1.0
    sigma_max: float = 5.0
    kappa_shape: float = 1.0
    kappa_scale: float = 10.0

    def __post_init__(self):
        for name in ("mu_radius", "sigma_max", "kappa_shape", "kappa_scale"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be finite and positive, got {v}")


def default_theta_z(geometry, sigma_z: float = 1.3, kappa_z: float = 3.0):
    """Default latent-distribution parameters, mean at the canonical anchor."""
    geometry = as_geometry(geometry)
    if geometry is Geometry.HYPERBOLIC:
        return HyperbolicNormalParams(np.zeros(2), sigma_z)
    return VmfParams(np.array([0.0, 0.0, 1.0]), kappa_z)


def edge_probability(alpha, dist):
    """p_ij = logit^{-1}(alpha - d); vectorized and saturation-safe."""
    return expit(np.asarray(alpha, dtype=float) - np.asarray(dist, dtype=float))


def _bernoulli_log_terms(y, eta):
    """y * eta - log(1 + e^eta), the stable Bernoulli log-pmf in the logit."""
    return y * eta - np.logaddexp(0.0, eta)


def log_likelihood(y: Network, cfg: LatentConfiguration) -> float:
    """log p(Y | Z, alpha) = sum_{i<j} y eta - log(1 + e^eta), eta = alpha - d."""
    if cfg.n != y.n:
        raise ValueError(f"configuration has {cfg.n} nodes, network has {y.n}")
    iu = y.dyads_upper()
    d = cfg.distance_matrix()[iu]
    eta = cfg.alpha - d
    return float(np.sum(_bernoulli_log_terms(y.y_upper(), eta)))


def latent_log_prior(cfg: LatentConfiguration) -> float:
    """sum_i log f_G(z_i | theta_z)."""
    if cfg.geometry is Geometry.HYPERBOLIC:
        return float(np.sum(hyp_normal_log_density(cfg.z, cfg.theta_z)))
    return float(np.sum(vmf_log_density(cfg.z, cfg.theta_z)))


def theta_z_log_prior(theta_z, priors: PriorSpec, geometry) -> float:
    """log p(gamma): the prior density of the latent-distribution parameters.

    Hyperbolic: the mean is uniform in the hyperbolic ball of radius
    ``mu_radius`` (constant density w.r.t. the hyperbolic area element) and
    sigma is flat on (0, sigma_max]. Spherical: the mean is uniform on S^2
    and kappa is Gamma(kappa_shape, kappa_scale).
    """
    geometry = as_geometry(geometry)
    if geometry is Geometry.HYPERBOLIC:
        r = float(hyperbolic_distance(np.zeros(2), theta_z.mu))
        if r > priors.mu_radius or not (0.0 < theta_z.sigma <= priors.sigma_max):
            return -np.inf
        log_p_mu = -math.log(2.0 * math.pi * (math.cosh(priors.mu_radius) - 1.0))
        log_p_sigma = -math.log(priors.sigma_max)
        return log_p_mu + log_p_sigma
    k, a, s = theta_z.kappa, priors.kappa_shape, priors.kappa_scale
    if k <= 0.0:
        return -np.inf
    log_p_mu = -math.log(4.0 * math.pi)
    log_p_kappa = (
        (a - 1.0) * math.log(k) - k / s - math.lgamma(a) - a * math.log(s)
    )
    return log_p_mu + log_p_kappa


def log_posterior(y: Network, cfg: LatentConfiguration, priors: PriorSpec) -> float:
    """Unnormalized log posterior: likelihood + latent prior + alpha prior
    + theta_z hyperprior."""
    return (
        log_likelihood(y, cfg)
        + latent_log_prior(cfg)
        + float(gaussian_log_density(cfg.alpha, priors.alpha_prior))
        + theta_z_log_prior(cfg.theta_z, priors, cfg.geometry)
    )


def sample_network(geometry, n: int, alpha: float, theta_z, rng):
    """Draw latent coordinates iid from f_G and a graph from the edge model.

    Returns the sampled network together with the generating configuration.
    """
    geometry = as_geometry(geometry)
    if n < 2:
        raise ValueError("need at least 2 nodes")
    if geometry is Geometry.HYPERBOLIC:
        z = sample_hyp_normal(theta_z, n, rng)
    else:
        z = sample_vmf(theta_z, n, rng)
    cfg = LatentConfiguration(geometry, z, float(alpha), theta_z)
    p = edge_probability(alpha, cfg.distance_matrix())
    a = np.zeros((n, n), dtype=bool)
    # dyads sampled in Algorithm-1 order: row i, then columns j > i
    for i in range(n - 1):
        draws = rng.random(n - 1 - i)
        a[i, i + 1 :] = draws < p[i, i + 1 :]
    a = a | a.T
    return Network(n, a), cfg
