"""Manifold primitives for the Poincare disk and the unit sphere.

Points on the disk are Cartesian pairs (x, y) with x^2 + y^2 < 1; points on
the sphere are unit 3-vectors. All operations accept either the typed point
classes below or plain array-likes, and broadcast over leading axes where
that makes sense.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

__all__ = [
    "Geometry",
    "GeometryError",
    "DiskPoint",
    "SpherePoint",
    "MoebiusIsometry",
    "SphereIsometry",
    "FrechetMean",
    "hyperbolic_distance",
    "spherical_distance",
    "distance_matrix",
    "apply_moebius",
    "apply_sphere_isometry",
    "mobius_add",
    "conformal_factor",
    "exp_map",
    "log_map",
    "sphere_exp_map",
    "sphere_log_map",
    "frechet_mean",
]

# Points with ||z|| >= 1 - BOUNDARY_EPS are rejected: the disk metric
# diverges at the boundary.
BOUNDARY_EPS = 1e-12

_UNIT_TOL = 1e-12


class GeometryError(ValueError):
    """A point or parameter violates its manifold domain."""


class Geometry(str, Enum):
    """Latent geometry tag: Poincare disk or unit 2-sphere."""

    HYPERBOLIC = "hyperbolic"
    SPHERICAL = "spherical"

    @property
    def ambient_dim(self) -> int:
        return 2 if self is Geometry.HYPERBOLIC else 3

    def distance(self, a, b):
        if self is Geometry.HYPERBOLIC:
            return hyperbolic_distance(a, b)
        return spherical_distance(a, b)

    def canonical_origin(self) -> np.ndarray:
        """Anchor location for i1: disk origin or the north pole."""
        if self is Geometry.HYPERBOLIC:
            return np.zeros(2)
        return np.array([0.0, 0.0, 1.0])


def as_geometry(value) -> Geometry:
    if isinstance(value, Geometry):
        return value
    try:
        return Geometry(str(value).lower())
    except ValueError:
        raise GeometryError(f"unknown geometry {value!r}") from None


def _as_disk(z) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    if z.shape[-1] != 2:
        raise GeometryError(f"disk points have 2 coordinates, got shape {z.shape}")
    sq = np.sum(z * z, axis=-1)
    if np.any(sq >= (1.0 - BOUNDARY_EPS) ** 2):
        raise GeometryError("point lies on or outside the unit disk boundary")
    return z


def _as_sphere(u) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    if u.shape[-1] != 3:
        raise GeometryError(f"sphere points have 3 coordinates, got shape {u.shape}")
    norms = np.linalg.norm(u, axis=-1)
    if np.any(np.abs(norms - 1.0) > 1e-9):
        raise GeometryError("sphere point is not unit length")
    return u / norms[..., None]


@dataclass(frozen=True)
class DiskPoint:
    """Point in the open unit disk, also readable as the complex x + iy."""

    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise GeometryError("disk coordinates must be finite")
        if self.x * self.x + self.y * self.y >= (1.0 - BOUNDARY_EPS) ** 2:
            raise GeometryError(
                f"({self.x}, {self.y}) lies on or outside the unit disk"
            )

    def __array__(self, dtype=None, copy=None):
        return np.array([self.x, self.y], dtype=dtype or float)

    @classmethod
    def from_array(cls, z) -> "DiskPoint":
        z = np.asarray(z, dtype=float)
        return cls(float(z[0]), float(z[1]))

    def as_complex(self) -> complex:
        return complex(self.x, self.y)


@dataclass(frozen=True)
class SpherePoint:
    """Unit vector on S^2; renormalized on construction."""

    v: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.v, dtype=float).reshape(3)
        n = float(np.linalg.norm(v))
        if not math.isfinite(n) or n < _UNIT_TOL:
            raise GeometryError("sphere point must be a nonzero finite 3-vector")
        object.__setattr__(self, "v", v / n)

    def __array__(self, dtype=None, copy=None):
        return np.array(self.v, dtype=dtype or float)

    @classmethod
    def from_array(cls, u) -> "SpherePoint":
        return cls(np.asarray(u, dtype=float))


def _arccosh(y):
    # ln(y + sqrt((y-1)(y+1))) keeps precision for y near 1, where the
    # naive sqrt(y^2 - 1) cancels.
    y = np.asarray(y, dtype=float)
    return np.log(y + np.sqrt((y - 1.0) * (y + 1.0)))


def hyperbolic_distance(z1, z2):
    """Geodesic distance on the Poincare disk.

    d(z1, z2) = arccosh(1 + 2 ||z1 - z2||^2 / ((1 - ||z1||^2)(1 - ||z2||^2)))
    """
    z1 = _as_disk(z1)
    z2 = _as_disk(z2)
    diff = np.sum((z1 - z2) ** 2, axis=-1)
    denom = (1.0 - np.sum(z1 * z1, axis=-1)) * (1.0 - np.sum(z2 * z2, axis=-1))
    # arccosh(1 + u) written as log1p(u + sqrt(u (u + 2))) keeps precision
    # for tiny separations, where 1 + u would round back to 1
    u = 2.0 * diff / denom
    return np.log1p(u + np.sqrt(u * (u + 2.0)))


def spherical_distance(u, v):
    """Great-circle distance arccos(u . v), with the dot product clamped.

    Evaluated through the chord length (2 arcsin(||u - v|| / 2), reflected
    for obtuse angles) so nearly-equal and nearly-antipodal points keep full
    precision; arccos itself would lose sqrt(eps) near the clamp.
    """
    u = _as_sphere(u)
    v = _as_sphere(v)
    dot = np.clip(np.sum(u * v, axis=-1), -1.0, 1.0)
    chord_near = np.linalg.norm(u - v, axis=-1)
    chord_far = np.linalg.norm(u + v, axis=-1)
    near = 2.0 * np.arcsin(np.clip(chord_near / 2.0, 0.0, 1.0))
    far = np.pi - 2.0 * np.arcsin(np.clip(chord_far / 2.0, 0.0, 1.0))
    return np.where(dot >= 0.0, near, far)


def distance_matrix(points, geometry) -> np.ndarray:
    """All-pairs distance matrix for an (N, dim) array of points."""
    geometry = as_geometry(geometry)
    pts = np.asarray(points, dtype=float)
    if geometry is Geometry.HYPERBOLIC:
        return hyperbolic_distance(pts[:, None, :], pts[None, :, :])
    return spherical_distance(pts[:, None, :], pts[None, :, :])


@dataclass(frozen=True)
class MoebiusIsometry:
    """Disk isometry z -> beta (z - z0) / (1 - conj(z0) z), then optional conjugation."""

    beta: complex
    z0: DiskPoint
    reflect: bool = False

    def __post_init__(self):
        if abs(abs(self.beta) - 1.0) > _UNIT_TOL:
            raise GeometryError(f"|beta| must be 1, got {abs(self.beta)}")

    def apply(self, z):
        return apply_moebius(self, z)


def apply_moebius(iso: MoebiusIsometry, z):
    """Apply a Moebius isometry; broadcasts over an (..., 2) array of points."""
    z = _as_disk(z)
    w = z[..., 0] + 1j * z[..., 1]
    z0 = iso.z0.as_complex()
    out = iso.beta * (w - z0) / (1.0 - np.conj(z0) * w)
    if iso.reflect:
        out = np.conj(out)
    res = np.stack([out.real, out.imag], axis=-1)
    # isometries of the open disk stay inside it; clip rounding spill only
    sq = np.sum(res * res, axis=-1, keepdims=True)
    limit = (1.0 - BOUNDARY_EPS) ** 2
    res = np.where(sq >= limit, res * np.sqrt(limit / np.maximum(sq, limit)), res)
    return res


def _rot1(t):
    c, s = math.cos(t), math.sin(t)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def _rot2(t):
    c, s = math.cos(t), math.sin(t)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def _rot3(t):
    c, s = math.cos(t), math.sin(t)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


@dataclass(frozen=True)
class SphereIsometry:
    """Sphere isometry: rotation about axis 1, then 2, then 3, then an
    optional reflection diag(1, -1, 1)."""

    theta1: float
    theta2: float
    theta3: float
    reflect: bool = False

    def matrix(self) -> np.ndarray:
        m = _rot3(self.theta3) @ _rot2(self.theta2) @ _rot1(self.theta1)
        if self.reflect:
            m = np.diag([1.0, -1.0, 1.0]) @ m
        return m

    def apply(self, u):
        return apply_sphere_isometry(self, u)


def apply_sphere_isometry(iso: SphereIsometry, u):
    """Rotate (..., 3) unit vectors by the composed rotation, reflecting if set."""
    u = _as_sphere(u)
    out = u @ iso.matrix().T
    return out / np.linalg.norm(out, axis=-1, keepdims=True)


def mobius_add(x, y):
    """Moebius addition on the disk.

    x (+) y = ((1 + 2<x,y> + ||y||^2) x + (1 - ||x||^2) y)
              / (1 + 2<x,y> + ||x||^2 ||y||^2)
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    x2 = np.sum(x * x, axis=-1, keepdims=True)
    y2 = np.sum(y * y, axis=-1, keepdims=True)
    xy = np.sum(x * y, axis=-1, keepdims=True)
    num = (1.0 + 2.0 * xy + y2) * x + (1.0 - x2) * y
    den = 1.0 + 2.0 * xy + x2 * y2
    return num / den


def conformal_factor(z):
    """lambda_z = 2 / (1 - ||z||^2), the disk metric's conformal factor."""
    z = np.asarray(z, dtype=float)
    return 2.0 / (1.0 - np.sum(z * z, axis=-1))


def exp_map(mu, tangent):
    """Disk exponential map exp_mu(v) = mu (+) tanh(lambda_mu ||v|| / 2) v/||v||.

    Tangent vectors use Euclidean coordinates; their Riemannian length is
    lambda_mu ||v||, which equals d(mu, exp_mu(v)). The zero vector maps
    to mu exactly.
    """
    mu = _as_disk(mu)
    v = np.asarray(tangent, dtype=float)
    norm = np.linalg.norm(v, axis=-1, keepdims=True)
    lam = conformal_factor(mu)
    scale = np.where(norm > 0.0, np.tanh(lam[..., None] * norm / 2.0), 0.0)
    direction = np.where(norm > 0.0, v / np.where(norm > 0.0, norm, 1.0), 0.0)
    return mobius_add(mu, scale * direction)


def log_map(mu, z):
    """Inverse of exp_map: the tangent vector at mu pointing to z."""
    mu = _as_disk(mu)
    z = _as_disk(z)
    w = mobius_add(-mu, z)
    norm = np.linalg.norm(w, axis=-1, keepdims=True)
    lam = conformal_factor(mu)
    scale = np.where(norm > 0.0, 2.0 * np.arctanh(norm) / (lam[..., None] * np.where(norm > 0.0, norm, 1.0)), 0.0)
    return scale * w


def sphere_exp_map(u, tangent):
    """Sphere exponential map; the tangent lives in the plane orthogonal to u."""
    u = _as_sphere(u)
    v = np.asarray(tangent, dtype=float)
    norm = np.linalg.norm(v, axis=-1, keepdims=True)
    small = norm < 1e-300
    safe = np.where(small, 1.0, norm)
    out = np.cos(norm) * u + np.sin(norm) * (v / safe)
    out = np.where(small, u, out)
    return out / np.linalg.norm(out, axis=-1, keepdims=True)


def sphere_log_map(u, w):
    """Inverse of sphere_exp_map for w not antipodal to u."""
    u = _as_sphere(u)
    w = _as_sphere(w)
    theta = spherical_distance(u, w)[..., None]
    perp = w - np.sum(u * w, axis=-1, keepdims=True) * u
    pnorm = np.linalg.norm(perp, axis=-1, keepdims=True)
    small = pnorm < 1e-300
    safe = np.where(small, 1.0, pnorm)
    return np.where(small, 0.0, theta * perp / safe)


@dataclass(frozen=True)
class FrechetMean:
    """Result of a Karcher-mean iteration."""

    point: np.ndarray
    converged: bool
    iterations: int
    objective: float = field(default=float("nan"))


def frechet_mean(points, geometry, max_iter: int = 500, tol: float = 1e-8) -> FrechetMean:
    """Minimizer of the summed squared geodesic distances to `points`.

    Standard Karcher iteration: step along the exp map by the tangent-space
    mean of the log maps (the exact averaged gradient, unit step), halving
    the step whenever the objective increases. Sets ``converged=False`` if
    the iteration cap is reached.
    """
    geometry = as_geometry(geometry)
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[None, :]
    if pts.shape[0] == 0:
        raise ValueError("frechet_mean needs at least one point")
    if pts.shape[0] == 1:
        return FrechetMean(pts[0].copy(), True, 0, 0.0)

    if geometry is Geometry.HYPERBOLIC:
        mean = pts.mean(axis=0)  # convex combination stays inside the disk
        log_fn, exp_fn, dist = log_map, exp_map, hyperbolic_distance
    else:
        mean = pts.mean(axis=0)
        n = np.linalg.norm(mean)
        mean = pts[0].copy() if n < 1e-12 else mean / n
        log_fn, exp_fn, dist = sphere_log_map, sphere_exp_map, spherical_distance

    def objective(m):
        return float(np.sum(dist(m[None, :], pts) ** 2))

    obj = objective(mean)
    for it in range(1, max_iter + 1):
        grad = log_fn(mean[None, :], pts).mean(axis=0)
        step = 1.0
        moved = False
        for _ in range(40):
            cand = exp_fn(mean, step * grad)
            cand_obj = objective(cand)
            if cand_obj <= obj + 1e-15:
                step_norm = float(np.linalg.norm(step * grad))
                mean, obj, moved = cand, cand_obj, True
                break
            step *= 0.5
        if not moved:
            return FrechetMean(mean, True, it, obj)
        if step_norm < tol:
            return FrechetMean(mean, True, it, obj)
    return FrechetMean(mean, False, max_iter, obj)
