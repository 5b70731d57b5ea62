"""Posterior and variational summaries: predictive link probabilities,
separation statistics, and Frechet-mean latent summaries."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

from .geometry import Geometry, as_geometry, distance_matrix, frechet_mean
from .model import Network, edge_probability

__all__ = [
    "DyadPrediction",
    "SeparationStats",
    "LatentSummary",
    "SingleClassError",
    "posterior_predictive_probs",
    "predictive_from_variational",
    "separation_stats",
    "summarize_latent",
]


class SingleClassError(ValueError):
    """Separation statistics need both linked and unlinked dyads."""


@dataclass(frozen=True)
class DyadPrediction:
    i: int
    j: int
    y: int
    mean_p: float


def posterior_predictive_probs(alpha_samples, z_samples, y: Network, geometry) -> list[DyadPrediction]:
    """Mean over samples of p_ij for every dyad, labeled by the data.

    ``alpha_samples`` is (L,) and ``z_samples`` (L, N, dim); for variational
    fits draw joint samples from q first (see ``predictive_from_variational``).
    """
    geometry = as_geometry(geometry)
    alpha_samples = np.asarray(alpha_samples, dtype=float)
    z_samples = np.asarray(z_samples, dtype=float)
    if alpha_samples.ndim != 1 or z_samples.shape[0] != alpha_samples.shape[0]:
        raise ValueError("need matching numbers of alpha and latent samples")
    if alpha_samples.size < 1:
        raise ValueError("need at least one posterior sample")
    iu = np.triu_indices(y.n, k=1)
    mean_p = np.zeros(iu[0].size)
    for a, z in zip(alpha_samples, z_samples):
        d = distance_matrix(z, geometry)[iu]
        mean_p += edge_probability(a, d)
    mean_p /= alpha_samples.size
    adj = y.adjacency
    return [
        DyadPrediction(int(i), int(j), int(adj[i, j]), float(p))
        for i, j, p in zip(iu[0], iu[1], mean_p)
    ]


def predictive_from_variational(state, y: Network, n_draws: int = 500, rng=None) -> list[DyadPrediction]:
    """Predictive table from a fitted variational state via joint q draws."""
    rng = rng if rng is not None else np.random.default_rng(0)
    alpha, z = state.sample(n_draws, rng)
    return posterior_predictive_probs(alpha, z, y, state.geometry)


@dataclass(frozen=True)
class SeparationStats:
    mean_p_link: float
    mean_p_nonlink: float
    auc: float


def separation_stats(records) -> SeparationStats:
    """Class means of the predictive probabilities plus the rank AUC of
    mean_p as a classifier score (ties get average rank)."""
    ys = np.array([r.y for r in records])
    ps = np.array([r.mean_p for r in records])
    n1 = int(ys.sum())
    n0 = ys.size - n1
    if n1 == 0 or n0 == 0:
        raise SingleClassError("all dyads share one label")
    ranks = rankdata(ps)
    auc = (ranks[ys == 1].sum() - n1 * (n1 + 1) / 2.0) / (n1 * n0)
    return SeparationStats(
        mean_p_link=float(ps[ys == 1].mean()),
        mean_p_nonlink=float(ps[ys == 0].mean()),
        auc=float(auc),
    )


@dataclass(frozen=True)
class LatentSummary:
    means: np.ndarray
    dispersion: np.ndarray
    converged: np.ndarray


def summarize_latent(z_samples, geometry) -> LatentSummary:
    """Per-node Frechet mean over the retained samples, with the mean
    squared geodesic deviation as dispersion."""
    geometry = as_geometry(geometry)
    z_samples = np.asarray(z_samples, dtype=float)
    if z_samples.ndim != 3 or z_samples.shape[0] < 1:
        raise ValueError("z_samples must be (L, N, dim) with L >= 1")
    L, n, dim = z_samples.shape
    means = np.empty((n, dim))
    disp = np.empty(n)
    conv = np.empty(n, dtype=bool)
    for i in range(n):
        res = frechet_mean(z_samples[:, i, :], geometry)
        means[i] = res.point
        conv[i] = res.converged
        disp[i] = res.objective / L
    return LatentSummary(means, disp, conv)
