"""Densities and samplers for the latent-coordinate distributions.

Covers the maximum-entropy Normal on the Poincare disk (density with respect
to the hyperbolic area element), the von Mises-Fisher distribution on S^2
(density with respect to the surface measure), and the scalar Gaussian used
for the base-rate parameter.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import (
    GeometryError,
    conformal_factor,
    exp_map,
    hyperbolic_distance,
    _as_disk,
    _as_sphere,
)

__all__ = [
    "HyperbolicNormalParams",
    "VmfParams",
    "GaussianParams",
    "erf",
    "hyp_normal_Z",
    "hyp_normal_log_density",
    "sample_hyp_normal",
    "vmf_log_density",
    "sample_vmf",
    "gaussian_log_density",
]

LOG_2PI = math.log(2.0 * math.pi)

# Rejection samplers abort past this many proposals; reaching it means a
# pathological dispersion value rather than bad luck.
MAX_PROPOSALS = 10_000_000


@dataclass(frozen=True)
class HyperbolicNormalParams:
    """Mean and dispersion of the disk's maximum-entropy Normal."""

    mu: np.ndarray
    sigma: float

    def __post_init__(self):
        object.__setattr__(self, "mu", _as_disk(np.asarray(self.mu, dtype=float).reshape(2)))
        if not (self.sigma > 0.0 and math.isfinite(self.sigma)):
            raise ValueError(f"sigma must be positive, got {self.sigma}")


@dataclass(frozen=True)
class VmfParams:
    """Mean direction and concentration of a von Mises-Fisher distribution."""

    mu: np.ndarray
    kappa: float

    def __post_init__(self):
        object.__setattr__(self, "mu", _as_sphere(np.asarray(self.mu, dtype=float).reshape(3)))
        if not (self.kappa >= 0.0 and math.isfinite(self.kappa)):
            raise ValueError(f"kappa must be nonnegative, got {self.kappa}")


@dataclass(frozen=True)
class GaussianParams:
    """Mean and standard deviation of a scalar Gaussian."""

    m: float
    s: float

    def __post_init__(self):
        if not (self.s > 0.0 and math.isfinite(self.s)):
            raise ValueError(f"s must be positive, got {self.s}")


def erf(x):
    """Error function, accurate to double precision; vectorizes over arrays."""
    if np.ndim(x) == 0:
        return math.erf(float(x))
    from scipy.special import erf as _erf

    return _erf(np.asarray(x, dtype=float))


def hyp_normal_Z(sigma) -> float:
    """Normalizing constant of the disk Normal.

    Z(sigma) = 2 pi sqrt(pi/2) sigma e^{sigma^2/2} erf(sigma / sqrt(2)),
    strictly increasing in sigma.
    """
    sigma = np.asarray(sigma, dtype=float)
    if np.any(sigma <= 0):
        raise ValueError("sigma must be positive")
    out = (
        2.0 * np.pi * math.sqrt(math.pi / 2.0)
        * sigma * np.exp(sigma**2 / 2.0) * erf(sigma / math.sqrt(2.0))
    )
    return float(out) if out.ndim == 0 else out


def _log_hyp_normal_Z(sigma) -> float:
    sigma = np.asarray(sigma, dtype=float)
    return (
        math.log(2.0 * math.pi) + 0.5 * math.log(math.pi / 2.0)
        + np.log(sigma) + sigma**2 / 2.0 + np.log(erf(sigma / math.sqrt(2.0)))
    )


def hyp_normal_log_density(z, p: HyperbolicNormalParams):
    """log N_H(z | mu, sigma) = -log Z(sigma) - d_H(mu, z)^2 / (2 sigma^2)."""
    d = hyperbolic_distance(p.mu, z)
    return -_log_hyp_normal_Z(p.sigma) - d**2 / (2.0 * p.sigma**2)


def _hyp_accept_log_ratio(r, sigma, log_Z, log_M):
    """log of rho(r) / (M p(r | shape 2, scale sigma)) for proposal magnitudes r."""
    log_sinh = r + np.log1p(-np.exp(-2.0 * r)) - math.log(2.0)  # overflow-safe
    log_rho = -(r**2) / (2.0 * sigma**2) + log_sinh - log_Z
    # Gamma(2, sigma) density: r e^{-r/sigma} / sigma^2   (Gamma(2) = 1)
    log_gamma_pdf = np.log(r) - r / sigma - 2.0 * math.log(sigma)
    return log_rho - log_M - log_gamma_pdf


def sample_hyp_normal(p: HyperbolicNormalParams, n: int, rng) -> np.ndarray:
    """Rejection sampler for the disk Normal.

    Proposals pair a uniform draw in the disk (only its direction survives
    the exponential map; the magnitude is absorbed) with a magnitude
    r ~ Gamma(shape 2, scale sigma), accepted against the envelope
    M = sigma^2 exp((sigma + 1)^2 / 2) / Z(sigma). Accepted draws are
    exp_mu(r a / lambda_mu) with ||a|| = 1.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    sigma = p.sigma
    log_Z = float(_log_hyp_normal_Z(sigma))
    log_M = 2.0 * math.log(sigma) + (sigma + 1.0) ** 2 / 2.0 - log_Z
    lam = float(conformal_factor(p.mu))

    out = np.empty((n, 2))
    have = 0
    proposed = 0
    while have < n:
        block = max(16, 2 * (n - have))
        if proposed + block > MAX_PROPOSALS:
            raise RuntimeError(
                f"hyperbolic Normal sampler exceeded {MAX_PROPOSALS} proposals "
                f"(sigma={sigma}); dispersion is pathological"
            )
        proposed += block
        # proposal location a = sqrt(u) (cos zeta, sin zeta): uniform in the disk
        u = rng.random(block)
        zeta = rng.uniform(0.0, 2.0 * np.pi, block)
        del u  # magnitude of a is absorbed by the normalization inside exp_mu
        r = rng.gamma(2.0, sigma, block)
        log_ar = _hyp_accept_log_ratio(r, sigma, log_Z, log_M)
        if np.any(log_ar > 1e-9):
            raise RuntimeError("envelope violated: acceptance ratio above 1")
        accept = np.log(rng.random(block)) < log_ar
        r = r[accept]
        zeta = zeta[accept]
        take = min(n - have, r.shape[0])
        if take:
            direction = np.stack([np.cos(zeta[:take]), np.sin(zeta[:take])], axis=-1)
            tangent = (r[:take] / lam)[:, None] * direction
            out[have : have + take] = exp_map(p.mu, tangent)
            have += take
    return out


def vmf_log_density(z, p: VmfParams):
    """log vMF(z | mu, kappa) on S^2, uniform (log 1/(4 pi)) at kappa = 0.

    Uses the numerically stable form
    log kappa - log 2 pi - log(1 - e^{-2 kappa}) + kappa (mu . z - 1).
    """
    z = _as_sphere(z)
    dot = np.clip(np.sum(p.mu * z, axis=-1), -1.0, 1.0)
    if p.kappa == 0.0:
        return np.full(dot.shape, -math.log(4.0 * math.pi)) if dot.ndim else -math.log(4.0 * math.pi)
    k = p.kappa
    return math.log(k) - LOG_2PI - math.log1p(-math.exp(-2.0 * k)) + k * (dot - 1.0)


def _orthonormal_frame(mu: np.ndarray):
    """Two unit vectors spanning the tangent plane at mu, chosen deterministically."""
    axis = np.zeros(3)
    axis[int(np.argmin(np.abs(mu)))] = 1.0
    t1 = np.cross(mu, axis)
    t1 /= np.linalg.norm(t1)
    t2 = np.cross(mu, t1)
    return t1, t2


def sample_vmf(p: VmfParams, n: int, rng) -> np.ndarray:
    """Wood's rejection sampler for the von Mises-Fisher on S^2.

    kappa = 0 falls back to uniform sampling on the sphere.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if p.kappa == 0.0:
        v = rng.standard_normal((n, 3))
        return v / np.linalg.norm(v, axis=-1, keepdims=True)

    kappa = p.kappa
    b = (-2.0 * kappa + math.sqrt(4.0 * kappa**2 + 4.0)) / 2.0
    x0 = (1.0 - b) / (1.0 + b)
    c = kappa * x0 + 2.0 * math.log(1.0 - x0**2)

    w = np.empty(n)
    have = 0
    proposed = 0
    while have < n:
        block = max(16, 2 * (n - have))
        if proposed + block > MAX_PROPOSALS:
            raise RuntimeError(f"vMF sampler exceeded {MAX_PROPOSALS} proposals (kappa={kappa})")
        proposed += block
        z = rng.beta(1.0, 1.0, block)
        t = (1.0 - (1.0 + b) * z) / (1.0 - (1.0 - b) * z)
        u = rng.random(block)
        accept = kappa * t + 2.0 * np.log(1.0 - x0 * t) - c >= np.log(u)
        t = t[accept]
        take = min(n - have, t.shape[0])
        w[have : have + take] = t[:take]
        have += take

    zeta = rng.uniform(0.0, 2.0 * np.pi, n)
    t1, t2 = _orthonormal_frame(p.mu)
    sin_theta = np.sqrt(np.clip(1.0 - w**2, 0.0, None))
    out = (
        sin_theta[:, None] * (np.cos(zeta)[:, None] * t1 + np.sin(zeta)[:, None] * t2)
        + w[:, None] * p.mu
    )
    return out / np.linalg.norm(out, axis=-1, keepdims=True)


def gaussian_log_density(x, p: GaussianParams):
    """log N(x | m, s^2) = -log(2 pi)/2 - log s - ((x - m)/s)^2 / 2."""
    x = np.asarray(x, dtype=float)
    out = -0.5 * LOG_2PI - math.log(p.s) - 0.5 * ((x - p.m) / p.s) ** 2
    return float(out) if out.ndim == 0 else out
