"""Inference initialization: graph distances, geometry-aware MDS, and the
base-rate grid search."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import (
    Geometry,
    as_geometry,
    conformal_factor,
    distance_matrix,
    exp_map,
)
from .model import Network, _bernoulli_log_terms

__all__ = [
    "graph_distances",
    "MdsEmbedding",
    "embed_mds",
    "mds_stress",
    "grid_search_alpha",
]

ALPHA_GRID = np.round(np.arange(-100, 101) * 0.1, 10)


def graph_distances(y: Network) -> np.ndarray:
    """All-pairs shortest-path hop counts by breadth-first search.

    Disconnected pairs get (largest finite distance + 1).
    """
    n = y.n
    if n < 2:
        raise ValueError("need at least 2 nodes")
    dist = np.full((n, n), -1, dtype=float)
    adj = [np.nonzero(y.adjacency[u])[0] for u in range(n)]
    for s in range(n):
        dist[s, s] = 0
        frontier = [s]
        while frontier:
            nxt = []
            for u in frontier:
                for v in adj[u]:
                    if dist[s, v] < 0:
                        dist[s, v] = dist[s, u] + 1
                        nxt.append(int(v))
            frontier = nxt
    finite_max = dist.max()
    dist[dist < 0] = finite_max + 1.0
    return dist


def mds_stress(D, z, geometry) -> float:
    """Raw stress: sum over i<j of (d_G(z_i, z_j) - D_ij)^2."""
    D = np.asarray(D, dtype=float)
    geometry = as_geometry(geometry)
    iu = np.triu_indices(D.shape[0], k=1)
    d = distance_matrix(np.asarray(z, dtype=float), geometry)[iu]
    return float(np.sum((d - D[iu]) ** 2))


@dataclass(frozen=True)
class MdsEmbedding:
    z: np.ndarray
    stress: float


def _disk_distance_grad(z):
    """Pairwise distances plus the Euclidean gradient d d_ij / d z_i.

    Returns (d, grad) with d (N, N) and grad (N, N, 2); grad[i, j] is the
    derivative of d(z_i, z_j) in z_i. The removable singularity at
    coincident points is set to zero.
    """
    sq = np.sum(z * z, axis=1)
    diff = z[:, None, :] - z[None, :, :]
    dist2 = np.sum(diff * diff, axis=-1)
    denom = (1.0 - sq)[:, None] * (1.0 - sq)[None, :]
    yv = 1.0 + 2.0 * dist2 / denom
    d = np.arccosh(np.maximum(yv, 1.0))
    dy_dzi = (4.0 / (1.0 - sq)[None, :, None]) * (
        diff * (1.0 - sq)[:, None, None] + z[:, None, :] * dist2[:, :, None]
    ) / ((1.0 - sq) ** 2)[:, None, None]
    root = np.sqrt(np.maximum(yv * yv - 1.0, 0.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        grad = dy_dzi / root[:, :, None]
    grad[root < 1e-12] = 0.0
    return d, grad


def _sphere_distance_grad(z):
    dot = np.clip(z @ z.T, -1.0, 1.0)
    d = np.arccos(dot)
    sin = np.sqrt(np.maximum(1.0 - dot * dot, 0.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        grad = -z[None, :, :] / sin[:, :, None]
    grad[sin < 1e-12] = 0.0
    return d, grad


def _stress_and_grad(D, z, geometry):
    n = z.shape[0]
    if geometry is Geometry.HYPERBOLIC:
        d, ggrad = _disk_distance_grad(z)
    else:
        d, ggrad = _sphere_distance_grad(z)
    resid = d - D
    np.fill_diagonal(resid, 0.0)
    iu = np.triu_indices(n, k=1)
    stress = float(np.sum(resid[iu] ** 2))
    grad = 2.0 * np.sum(resid[:, :, None] * ggrad, axis=1)
    if geometry is Geometry.HYPERBOLIC:
        # Riemannian gradient under the conformal metric
        grad = grad / conformal_factor(z)[:, None] ** 2
    else:
        grad = grad - np.sum(grad * z, axis=1, keepdims=True) * z
    return stress, grad


def _mds_descent(D, z0, geometry, max_iter, tol):
    z = z0.copy()
    stress, grad = _stress_and_grad(D, z, geometry)
    for _ in range(max_iter):
        step = 0.1
        improved = False
        for _ in range(30):
            if geometry is Geometry.HYPERBOLIC:
                cand = exp_map(z, -step * grad)
                bad = np.sum(cand * cand, axis=1) >= (1.0 - 1e-9) ** 2
                if np.any(bad):
                    cand[bad] *= 0.99 / np.linalg.norm(cand[bad], axis=1, keepdims=True)
            else:
                cand = z - step * grad
                cand /= np.linalg.norm(cand, axis=1, keepdims=True)
            cand_stress, cand_grad = _stress_and_grad(D, cand, geometry)
            if cand_stress < stress:
                improved = True
                break
            step *= 0.5
        if not improved:
            break
        rel = (stress - cand_stress) / max(stress, 1e-300)
        z, stress, grad = cand, cand_stress, cand_grad
        if rel < tol:
            break
    return z, stress


def embed_mds(
    D,
    geometry,
    rng,
    n_restarts: int = 5,
    max_iter: int = 2000,
    tol: float = 1e-8,
) -> MdsEmbedding:
    """Minimize raw stress by manifold gradient descent with restarts.

    Descent uses backtracking line search halving from step 0.1 (exp-map
    steps on the disk, project-and-renormalize on the sphere) until the
    relative stress change drops below ``tol``; the best restart wins.
    """
    D = np.asarray(D, dtype=float)
    n = D.shape[0]
    if D.shape != (n, n) or np.any(D < 0) or np.any(np.abs(np.diag(D)) > 0):
        raise ValueError("D must be a square nonnegative matrix with zero diagonal")
    if not np.allclose(D, D.T):
        raise ValueError("D must be symmetric")
    geometry = as_geometry(geometry)

    best = None
    for _ in range(n_restarts):
        if geometry is Geometry.HYPERBOLIC:
            r = 0.7 * np.sqrt(rng.random(n))
            t = rng.uniform(0, 2 * np.pi, n)
            z0 = np.stack([r * np.cos(t), r * np.sin(t)], axis=-1)
        else:
            z0 = rng.standard_normal((n, 3))
            z0 /= np.linalg.norm(z0, axis=1, keepdims=True)
        z, stress = _mds_descent(D, z0, geometry, max_iter, tol)
        if best is None or stress < best.stress:
            best = MdsEmbedding(z, stress)
    return best


def grid_search_alpha(y: Network, z0, geometry) -> float:
    """argmax over the grid {-10, -9.9, ..., 10} of log p(Y | Z0, alpha);
    ties break toward zero."""
    geometry = as_geometry(geometry)
    iu = y.dyads_upper()
    d = distance_matrix(np.asarray(z0, dtype=float), geometry)[iu]
    yv = y.y_upper()
    eta = ALPHA_GRID[:, None] - d[None, :]
    ll = _bernoulli_log_terms(yv[None, :], eta).sum(axis=1)
    best = ll.max()
    candidates = ALPHA_GRID[ll >= best - 1e-12]
    return float(min(candidates, key=lambda a: (abs(a), a)))
