"""Anchor-coordinate canonicalization.

Three latent positions are pinned down to remove the isometry
non-identifiability of distance-based models: the first anchor is mapped to
the origin (disk) or north pole (sphere), the second onto a 1-parameter
curve (positive real axis / x-z great circle with positive first
coordinate), and the third into the open half-space with positive second
coordinate, applying a reflection when needed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from .geometry import (
    DiskPoint,
    Geometry,
    MoebiusIsometry,
    SphereIsometry,
    apply_moebius,
    apply_sphere_isometry,
    as_geometry,
    hyperbolic_distance,
    spherical_distance,
)
from .model import LatentConfiguration, Network
from .distributions import HyperbolicNormalParams, VmfParams

__all__ = [
    "AnchorSpec",
    "AnchorRole",
    "DegenerateAnchorsError",
    "TooFewNodesError",
    "DofDescriptor",
    "solve_hyperbolic_isometry",
    "solve_sphere_isometry",
    "canonicalize",
    "select_anchors",
    "anchor_candidates",
    "constrained_degrees_of_freedom",
]

# d(z_i1, z_i2) below this is too close to solve the aligning isometry
DEGENERATE_DIST_TOL = 1e-10
# |second coordinate| of the third anchor's image below this leaves the
# reflection undetermined
DEGENERATE_AXIS_TOL = 1e-12


class DegenerateAnchorsError(ValueError):
    """Anchor triple cannot pin down the isometry."""


class TooFewNodesError(ValueError):
    """Anchors need at least three nodes."""


@dataclass(frozen=True)
class AnchorSpec:
    """Indices of the three anchor nodes."""

    i1: int
    i2: int
    i3: int

    def __post_init__(self):
        triple = (self.i1, self.i2, self.i3)
        if len(set(triple)) != 3 or min(triple) < 0:
            raise ValueError(f"anchor indices must be distinct and nonnegative: {triple}")

    def as_tuple(self):
        return (self.i1, self.i2, self.i3)


class AnchorRole(Enum):
    I1 = "i1"
    I2 = "i2"
    I3 = "i3"
    FREE = "free"


def anchor_roles(spec: AnchorSpec, n: int) -> list[AnchorRole]:
    roles = [AnchorRole.FREE] * n
    roles[spec.i1] = AnchorRole.I1
    roles[spec.i2] = AnchorRole.I2
    roles[spec.i3] = AnchorRole.I3
    return roles


@dataclass(frozen=True)
class DofDescriptor:
    """Free-parameter count and domain of a node under the anchor constraints."""

    role: AnchorRole
    dimension: int
    domain: str
    interval: tuple[float, float] | None = None


def constrained_degrees_of_freedom(geometry, role: AnchorRole) -> DofDescriptor:
    geometry = as_geometry(geometry)
    if role is AnchorRole.I1:
        return DofDescriptor(role, 0, "fixed at the canonical origin/pole")
    if role is AnchorRole.I2:
        if geometry is Geometry.HYPERBOLIC:
            return DofDescriptor(role, 1, "positive real axis, a in (0, 1)", (0.0, 1.0))
        return DofDescriptor(
            role, 1, "x-z great circle with positive first coordinate", (0.0, math.pi)
        )
    if role is AnchorRole.I3:
        return DofDescriptor(role, 2, "half-space with positive second coordinate")
    return DofDescriptor(role, 2, "unconstrained manifold point")


def solve_hyperbolic_isometry(z1, z2, z3) -> MoebiusIsometry:
    """Moebius isometry sending z1 -> 0, z2 -> (a, 0) with a > 0, and z3 into
    the upper half-disk (conjugating if needed)."""
    z1 = np.asarray(z1, dtype=float)
    z2 = np.asarray(z2, dtype=float)
    z3 = np.asarray(z3, dtype=float)
    d12 = float(hyperbolic_distance(z1, z2))
    if d12 < DEGENERATE_DIST_TOL:
        raise DegenerateAnchorsError("first two anchors coincide")
    a = math.sqrt((math.cosh(d12) - 1.0) / (1.0 + math.cosh(d12)))
    w1 = complex(z1[0], z1[1])
    w2 = complex(z2[0], z2[1])
    # solving h(z1) = 0 gives z0 = z1; h(z2) = a then fixes beta (unit modulus)
    beta = a * (1.0 - np.conj(w1) * w2) / (w2 - w1)
    beta /= abs(beta)  # remove rounding drift from |beta| = 1
    iso = MoebiusIsometry(beta, DiskPoint(z1[0], z1[1]), reflect=False)
    im3 = apply_moebius(iso, z3)[1]
    if abs(im3) < DEGENERATE_AXIS_TOL:
        raise DegenerateAnchorsError("third anchor lies on the geodesic through the first two")
    if im3 < 0:
        iso = replace(iso, reflect=True)
    return iso


def solve_sphere_isometry(u1, u2, u3) -> SphereIsometry:
    """Rotation (plus optional reflection) sending u1 -> (0,0,1),
    u2 -> (a, 0, b) with a > 0, and u3 to positive second coordinate.

    Angles are recovered with the two-argument arctangent so the
    postconditions hold in every quadrant.
    """
    u1 = np.asarray(u1, dtype=float)
    u2 = np.asarray(u2, dtype=float)
    u3 = np.asarray(u3, dtype=float)
    d12 = float(spherical_distance(u1, u2))
    if d12 < DEGENERATE_DIST_TOL or math.pi - d12 < DEGENERATE_DIST_TOL:
        raise DegenerateAnchorsError("first two anchors are coincident or antipodal")

    theta1 = math.atan2(u1[1], u1[2])
    c = u1[1] * math.sin(theta1) + u1[2] * math.cos(theta1)
    theta2 = math.atan2(-u1[0], c)
    w = apply_sphere_isometry(SphereIsometry(theta1, theta2, 0.0), u2)
    rho = math.hypot(w[0], w[1])
    if rho < DEGENERATE_DIST_TOL:
        raise DegenerateAnchorsError("second anchor maps onto the pole axis")
    theta3 = math.atan2(-w[1], w[0])

    iso = SphereIsometry(theta1, theta2, theta3, reflect=False)
    y3 = apply_sphere_isometry(iso, u3)[1]
    if abs(y3) < DEGENERATE_AXIS_TOL:
        raise DegenerateAnchorsError("third anchor maps onto the x-z great circle")
    if y3 < 0:
        iso = replace(iso, reflect=True)
    return iso


def _snap_to_anchor_form(z: np.ndarray, spec: AnchorSpec, geometry: Geometry) -> np.ndarray:
    """Zero out the float residue so anchor postconditions hold exactly."""
    z = z.copy()
    if geometry is Geometry.HYPERBOLIC:
        z[spec.i1] = 0.0
        z[spec.i2, 0] = abs(z[spec.i2, 0])
        z[spec.i2, 1] = 0.0
    else:
        z[spec.i1] = (0.0, 0.0, 1.0)
        z[spec.i2, 0] = math.hypot(z[spec.i2, 0], z[spec.i2, 1])
        z[spec.i2, 1] = 0.0
        z[spec.i2] /= np.linalg.norm(z[spec.i2])
    return z


def canonicalize(cfg: LatentConfiguration, anchors: AnchorSpec) -> LatentConfiguration:
    """Apply the anchor-aligning isometry to every coordinate and to the
    latent-distribution mean; distances are preserved."""
    n = cfg.n
    for idx in anchors.as_tuple():
        if idx >= n:
            raise ValueError(f"anchor index {idx} out of range for N={n}")
    if cfg.geometry is Geometry.HYPERBOLIC:
        iso = solve_hyperbolic_isometry(cfg.z[anchors.i1], cfg.z[anchors.i2], cfg.z[anchors.i3])
        new_z = apply_moebius(iso, cfg.z)
        new_mu = apply_moebius(iso, cfg.theta_z.mu)
        new_theta = HyperbolicNormalParams(new_mu, cfg.theta_z.sigma)
    else:
        iso = solve_sphere_isometry(cfg.z[anchors.i1], cfg.z[anchors.i2], cfg.z[anchors.i3])
        new_z = apply_sphere_isometry(iso, cfg.z)
        new_mu = apply_sphere_isometry(iso, cfg.theta_z.mu)
        new_theta = VmfParams(new_mu, cfg.theta_z.kappa)
    new_z = _snap_to_anchor_form(new_z, anchors, cfg.geometry)
    return LatentConfiguration(cfg.geometry, new_z, cfg.alpha, new_theta)


def _degree_order(y: Network) -> list[int]:
    deg = y.degrees()
    return sorted(range(y.n), key=lambda i: (-deg[i], i))


def _bfs_hops(y: Network, source: int) -> np.ndarray:
    dist = np.full(y.n, -1, dtype=int)
    dist[source] = 0
    frontier = [source]
    while frontier:
        nxt = []
        for u in frontier:
            for v in np.nonzero(y.adjacency[u])[0]:
                if dist[v] < 0:
                    dist[v] = dist[u] + 1
                    nxt.append(int(v))
        frontier = nxt
    return dist


def select_anchors(y: Network) -> AnchorSpec:
    """Deterministic degree-based anchor choice.

    i1 is the highest-degree node; i2 the highest-degree node at graph
    distance >= 2 from i1 when one exists (otherwise the next-highest
    degree); i3 the next-highest degree remaining. Ties break toward the
    lowest index.
    """
    if y.n < 3:
        raise TooFewNodesError(f"anchor selection needs N >= 3, got {y.n}")
    order = _degree_order(y)
    i1 = order[0]
    hops = _bfs_hops(y, i1)
    i2 = next((i for i in order if i != i1 and (hops[i] >= 2 or hops[i] < 0)), None)
    if i2 is None:
        i2 = next(i for i in order if i != i1)
    i3 = next(i for i in order if i not in (i1, i2))
    return AnchorSpec(i1, i2, i3)


def anchor_candidates(y: Network):
    """Anchor triples in fallback order, for retrying degenerate solves.

    Starts from ``select_anchors`` and walks the remaining nodes in degree
    order, varying i3 fastest, then i2.
    """
    primary = select_anchors(y)
    yield primary
    order = _degree_order(y)
    i1 = primary.i1
    seen = {primary.as_tuple()}
    for i2 in [primary.i2] + [i for i in order if i not in (i1, primary.i2)]:
        for i3 in order:
            if len({i1, i2, i3}) != 3:
                continue
            triple = (i1, i2, i3)
            if triple in seen:
                continue
            seen.add(triple)
            yield AnchorSpec(*triple)
