"""Black-box variational inference with score-function gradients.

Mean-field family: a Gaussian for the base rate plus one location-dispersion
factor per node (hyperbolic Normal on the disk, von Mises-Fisher on the
sphere). Locations are parameterized in polar coordinates; radii pass
through a sigmoid and dispersions live on the log scale, so every update is
unconstrained. Each iteration draws S joint samples, forms per-block
score-function gradient estimates with a control-variate correction, and
takes rmsprop-scaled ascent steps.

Anchor handling mirrors the sampler: the first anchor's location is not a
parameter (its factor is a point mass at the canonical origin), the second
anchor's location keeps a single free coordinate, and a step that would
push the third anchor's location out of the positive-second-coordinate
half-space is held back.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import Geometry, as_geometry
from .distributions import (
    HyperbolicNormalParams,
    VmfParams,
    erf,
    gaussian_log_density,
    _log_hyp_normal_Z,
)
from .model import Network, PriorSpec, _bernoulli_log_terms
from .identifiability import AnchorRole, AnchorSpec, anchor_roles
from .mcmc import (
    _sample_hyp_normal_one,
    _sample_vmf_one,
    initialize_state,
)

__all__ = [
    "BbviConfig",
    "BbviResult",
    "DivergedOptimizationError",
    "VariationalStateHyperbolic",
    "VariationalStateSpherical",
    "run_bbvi",
    "grad_log_q_alpha",
    "grad_log_q_hyperbolic",
    "grad_log_q_spherical",
    "control_variate_coeff",
    "rmsprop_step",
    "elbo_estimate",
]

TWO_PI = 2.0 * math.pi


class DivergedOptimizationError(RuntimeError):
    """The ELBO collapsed far below its starting value."""


@dataclass
class BbviConfig:
    iterations: int = 1000
    S: int = 20
    seed: int = 0
    learning_rate: float = 0.05
    rmsprop_decay: float = 0.9
    rmsprop_epsilon: float = 1e-8
    priors: PriorSpec = field(default_factory=PriorSpec)
    theta_z: HyperbolicNormalParams | VmfParams | None = None
    anchors: AnchorSpec | None = None
    init_dispersion: float = 0.5
    init_kappa: float = 10.0
    init_sigma_tilde: float = 0.5
    init_alpha: float | None = None  # overrides the grid-search value
    # optional early stop: quit once every parameter moves less than this
    early_stop_delta: float | None = None
    update_theta_z: bool = False  # accepted for interface parity; always off

    def __post_init__(self):
        if self.S < 2:
            raise ValueError("S must be >= 2 (the control variate needs a sample covariance)")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if not 0.0 < self.rmsprop_decay < 1.0:
            raise ValueError("rmsprop_decay must be in (0, 1)")
        if self.learning_rate <= 0 or self.rmsprop_epsilon <= 0:
            raise ValueError("learning_rate and rmsprop_epsilon must be positive")


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-np.asarray(x, dtype=float)))


class _VariationalStateBase:
    geometry: Geometry

    def free_mask(self, i: int) -> np.ndarray:
        """Which of the node's (loc1, loc2, dispersion) parameters are free."""
        role = self.roles[i]
        if role is AnchorRole.I2:
            return np.array([True, False, True])
        return np.array([True, True, True])

    def alpha_sigma(self) -> float:
        return math.exp(self.log_sigma_tilde)

    def sample(self, n: int, rng):
        """Draw n joint samples (alpha, Z) from q; the first anchor stays at
        the canonical point."""
        alpha = self.m_tilde + self.alpha_sigma() * rng.standard_normal(n)
        locs = self.decode_locations()
        disp = self.dispersions()
        dim = self.geometry.ambient_dim
        z = np.empty((n, self.n, dim))
        z[:, self.anchors.i1, :] = self.geometry.canonical_origin()
        for i in range(self.n):
            if i == self.anchors.i1:
                continue
            if self.geometry is Geometry.HYPERBOLIC:
                for s in range(n):
                    z[s, i] = _sample_hyp_normal_one(locs[i], disp[i], rng)
            else:
                k = disp[i]
                b = (-2.0 * k + math.sqrt(4.0 * k**2 + 4.0)) / 2.0
                x0 = (1.0 - b) / (1.0 + b)
                c = k * x0 + 2.0 * math.log(1.0 - x0**2)
                for s in range(n):
                    z[s, i] = _sample_vmf_one(locs[i], k, b, x0, c, rng)
        return alpha, z

    def log_q(self, alpha, z):
        """log q(alpha, Z) per sample; the first anchor's point mass
        contributes no variational term."""
        sigma = self.alpha_sigma()
        out = -0.5 * math.log(TWO_PI) - math.log(sigma) - 0.5 * ((alpha - self.m_tilde) / sigma) ** 2
        locs = self.decode_locations()
        disp = self.dispersions()
        for i in range(self.n):
            if i == self.anchors.i1:
                continue
            out = out + self._node_log_q(z[:, i, :], locs[i], disp[i])
        return out


@dataclass
class VariationalStateHyperbolic(_VariationalStateBase):
    """Gaussian for alpha plus a hyperbolic Normal per node, locations in
    sigmoid-radius polar coordinates."""

    m_tilde: float
    log_sigma_tilde: float
    r_star: np.ndarray
    phi: np.ndarray
    log_s: np.ndarray
    anchors: AnchorSpec
    roles: list = field(repr=False, default=None)

    geometry = Geometry.HYPERBOLIC

    def __post_init__(self):
        if self.roles is None:
            self.roles = anchor_roles(self.anchors, len(self.r_star))

    @property
    def n(self) -> int:
        return len(self.r_star)

    def radii(self) -> np.ndarray:
        return _sigmoid(self.r_star)

    def dispersions(self) -> np.ndarray:
        return np.exp(self.log_s)

    def decode_locations(self) -> np.ndarray:
        r = self.radii()
        locs = np.stack([r * np.cos(self.phi), r * np.sin(self.phi)], axis=-1)
        locs[self.anchors.i1] = 0.0
        locs[self.anchors.i2, 1] = 0.0  # phi is pinned to 0 there
        return locs

    def _node_log_q(self, z, loc, s):
        d = _disk_dist(loc[None, :], z)
        return -float(_log_hyp_normal_Z(s)) - d**2 / (2.0 * s**2)

    def node_grad(self, i: int, z_i) -> np.ndarray:
        return grad_log_q_hyperbolic(z_i, self.r_star[i], self.phi[i], self.log_s[i])


@dataclass
class VariationalStateSpherical(_VariationalStateBase):
    """Gaussian for alpha plus a von Mises-Fisher per node, locations in
    spherical polar coordinates."""

    m_tilde: float
    log_sigma_tilde: float
    omega: np.ndarray
    phi: np.ndarray
    log_kappa: np.ndarray
    anchors: AnchorSpec
    roles: list = field(repr=False, default=None)

    geometry = Geometry.SPHERICAL

    def __post_init__(self):
        if self.roles is None:
            self.roles = anchor_roles(self.anchors, len(self.omega))

    @property
    def n(self) -> int:
        return len(self.omega)

    def dispersions(self) -> np.ndarray:
        return np.exp(self.log_kappa)

    def decode_locations(self) -> np.ndarray:
        sw, cw = np.sin(self.omega), np.cos(self.omega)
        locs = np.stack([np.cos(self.phi) * sw, np.sin(self.phi) * sw, cw], axis=-1)
        locs[self.anchors.i1] = (0.0, 0.0, 1.0)
        locs[self.anchors.i2, 1] = 0.0  # phi is pinned to 0 there
        return locs / np.linalg.norm(locs, axis=-1, keepdims=True)

    def _node_log_q(self, z, loc, kappa):
        dot = np.clip(z @ loc, -1.0, 1.0)
        return math.log(kappa) - math.log(TWO_PI) - math.log1p(-math.exp(-2.0 * kappa)) + kappa * (dot - 1.0)

    def node_grad(self, i: int, z_i) -> np.ndarray:
        return grad_log_q_spherical(z_i, self.omega[i], self.phi[i], self.log_kappa[i])


def _disk_dist(a, b):
    diff = np.sum((a - b) ** 2, axis=-1)
    den = (1.0 - np.sum(a * a, axis=-1)) * (1.0 - np.sum(b * b, axis=-1))
    u = 2.0 * diff / den
    return np.log1p(u + np.sqrt(u * (u + 2.0)))


def grad_log_q_alpha(alpha, m_tilde, sigma_tilde):
    """Score of the Gaussian factor: columns (d/dm, d/dlog sigma)."""
    alpha = np.atleast_1d(np.asarray(alpha, dtype=float))
    dm = (alpha - m_tilde) / sigma_tilde**2
    dlog_sigma = -1.0 + ((alpha - m_tilde) / sigma_tilde) ** 2
    return np.stack([dm, dlog_sigma], axis=-1)


def grad_log_q_hyperbolic(z, r_star, phi, log_s):
    """Score of one hyperbolic-Normal factor at samples z.

    Columns: (d/dr*, d/dphi, d/dlog s), with the sigmoid and log-scale
    chain-rule factors applied. The distance-direction term has a removable
    singularity at z = location and is set to zero there.
    """
    z = np.atleast_2d(np.asarray(z, dtype=float))
    s = math.exp(log_s)
    r = 1.0 / (1.0 + math.exp(-r_star))
    cp, sp = math.cos(phi), math.sin(phi)
    loc = np.array([r * cp, r * sp])

    d = _disk_dist(loc[None, :], z)
    # gradient of the metric in the location argument
    sq_loc = r * r
    sq_z = np.sum(z * z, axis=-1)
    diff = loc[None, :] - z
    dist2 = np.sum(diff * diff, axis=-1)
    den_z = 1.0 - sq_z
    den_l = 1.0 - sq_loc
    yv = 1.0 + 2.0 * dist2 / (den_l * den_z)
    root = np.sqrt(np.maximum(yv * yv - 1.0, 0.0))
    dy_dloc = (4.0 / den_z)[:, None] * (diff * den_l + loc[None, :] * dist2[:, None]) / den_l**2
    with np.errstate(divide="ignore", invalid="ignore"):
        dd_dloc = dy_dloc / root[:, None]
    dd_dloc[root < 1e-10] = 0.0

    dir_term = -(d / s**2)[:, None] * dd_dloc
    dloc_dr = np.array([cp, sp])
    dloc_dphi = np.array([-r * sp, r * cp])
    dr_star = (dir_term @ dloc_dr) * (r * (1.0 - r))
    dphi = dir_term @ dloc_dphi

    erf_term = 2.0 * math.exp(-s * s / 2.0) / (math.sqrt(TWO_PI) * erf(s / math.sqrt(2.0)))
    ds = -1.0 / s - s - erf_term + d**2 / s**3
    dlog_s = ds * s
    return np.stack([dr_star, dphi, dlog_s], axis=-1)


def grad_log_q_spherical(z, omega, phi, log_kappa):
    """Score of one vMF factor at samples z.

    Columns: (d/domega, d/dphi, d/dlog kappa); the concentration gradient
    uses the overflow-free form 1/k + (loc.z - 1) - 2 e^{-2k}/(1 - e^{-2k}).
    """
    z = np.atleast_2d(np.asarray(z, dtype=float))
    kappa = math.exp(log_kappa)
    so, co = math.sin(omega), math.cos(omega)
    cp, sp = math.cos(phi), math.sin(phi)
    loc = np.array([cp * so, sp * so, co])
    dloc_domega = np.array([cp * co, sp * co, -so])
    dloc_dphi = np.array([-sp * so, cp * so, 0.0])

    domega = kappa * (z @ dloc_domega)
    dphi = kappa * (z @ dloc_dphi)
    dot = np.clip(z @ loc, -1.0, 1.0)
    dkappa = 1.0 / kappa + (dot - 1.0) - 2.0 * math.exp(-2.0 * kappa) / (1.0 - math.exp(-2.0 * kappa))
    dlog_kappa = dkappa * kappa
    return np.stack([domega, dphi, dlog_kappa], axis=-1)


def control_variate_coeff(f, h) -> float:
    """a* = sum_d Cov(f_d, h_d) / sum_d Var(h_d); zero when h carries no
    variance."""
    f = np.atleast_2d(np.asarray(f, dtype=float))
    h = np.atleast_2d(np.asarray(h, dtype=float))
    if f.shape != h.shape or f.shape[0] < 2:
        raise ValueError("f and h must be equal (S, D) arrays with S >= 2")
    fc = f - f.mean(axis=0)
    hc = h - h.mean(axis=0)
    denom = float(np.sum(hc * hc))
    if denom < 1e-300:
        return 0.0
    return float(np.sum(fc * hc)) / denom


def rmsprop_step(grad, accumulator, cfg: BbviConfig):
    """One rmsprop-scaled ascent step; returns (step, new accumulator)."""
    grad = np.asarray(grad, dtype=float)
    acc = cfg.rmsprop_decay * np.asarray(accumulator, dtype=float) + (1.0 - cfg.rmsprop_decay) * grad**2
    step = cfg.learning_rate * grad / np.sqrt(acc + cfg.rmsprop_epsilon)
    return step, acc


def _log_joint(y: Network, state, alpha, z, priors: PriorSpec, theta_z):
    """log p(Y, Z, alpha) per sample; theta_z is fixed and its hyperprior
    constant is omitted."""
    S = alpha.shape[0]
    iu = np.triu_indices(y.n, k=1)
    yv = y.adjacency[iu].astype(float)
    if state.geometry is Geometry.HYPERBOLIC:
        sq = np.sum(z * z, axis=-1)
        diff = z[:, :, None, :] - z[:, None, :, :]
        u = 2.0 * np.sum(diff * diff, axis=-1) / (
            (1.0 - sq)[:, :, None] * (1.0 - sq)[:, None, :]
        )
        dmat = np.log1p(u + np.sqrt(u * (u + 2.0)))
    else:
        dmat = np.arccos(np.clip(np.einsum("sid,sjd->sij", z, z), -1.0, 1.0))
    eta = alpha[:, None] - dmat[:, iu[0], iu[1]]
    loglik = np.sum(_bernoulli_log_terms(yv[None, :], eta), axis=1)

    if state.geometry is Geometry.HYPERBOLIC:
        mu, sig = theta_z.mu, theta_z.sigma
        d = _disk_dist(mu[None, None, :], z)
        prior = np.sum(-float(_log_hyp_normal_Z(sig)) - d**2 / (2.0 * sig**2), axis=1)
    else:
        k = theta_z.kappa
        dot = np.clip(z @ theta_z.mu, -1.0, 1.0)
        if k == 0.0:
            prior = np.full(S, -math.log(4.0 * math.pi) * y.n)
        else:
            c0 = math.log(k) - math.log(TWO_PI) - math.log1p(-math.exp(-2.0 * k))
            prior = np.sum(c0 + k * (dot - 1.0), axis=1)
    alpha_prior = gaussian_log_density(alpha, priors.alpha_prior)
    return loglik + prior + alpha_prior, loglik


def elbo_estimate(y: Network, state, S: int, rng, priors=None, theta_z=None) -> float:
    """Monte Carlo ELBO: mean over S fresh draws of log p - log q."""
    if S < 1:
        raise ValueError("S must be >= 1")
    priors = priors if priors is not None else state._priors
    theta_z = theta_z if theta_z is not None else state._theta_z
    alpha, z = state.sample(S, rng)
    logp, _ = _log_joint(y, state, alpha, z, priors, theta_z)
    return float(np.mean(logp - state.log_q(alpha, z)))


@dataclass
class BbviResult:
    state: object
    elbo_trace: np.ndarray
    loglik_trace: np.ndarray
    m_trace: np.ndarray
    sigma_trace: np.ndarray
    anchors: AnchorSpec
    theta_z: object
    iterations_run: int


def _initial_state(y, geometry, cfg: BbviConfig, rng):
    shim = type("_Shim", (), {"theta_z": cfg.theta_z, "anchors": cfg.anchors,
                              "update_theta_z": False})()
    canon, spec = initialize_state(y, geometry, shim, rng)
    alpha0 = canon.alpha if cfg.init_alpha is None else cfg.init_alpha
    if geometry is Geometry.HYPERBOLIC:
        r = np.clip(np.linalg.norm(canon.z, axis=1), 1e-4, 1.0 - 1e-4)
        phi = np.arctan2(canon.z[:, 1], canon.z[:, 0])
        phi[spec.i2] = 0.0
        state = VariationalStateHyperbolic(
            m_tilde=float(alpha0),
            log_sigma_tilde=math.log(cfg.init_sigma_tilde),
            r_star=np.log(r / (1.0 - r)),
            phi=phi,
            log_s=np.full(y.n, math.log(cfg.init_dispersion)),
            anchors=spec,
        )
    else:
        omega = np.arccos(np.clip(canon.z[:, 2], -1.0, 1.0))
        phi = np.arctan2(canon.z[:, 1], canon.z[:, 0])
        phi[spec.i2] = 0.0
        state = VariationalStateSpherical(
            m_tilde=float(alpha0),
            log_sigma_tilde=math.log(cfg.init_sigma_tilde),
            omega=omega,
            phi=phi,
            log_kappa=np.full(y.n, math.log(cfg.init_kappa)),
            anchors=spec,
        )
    return state, canon.theta_z


def run_bbvi(y: Network, geometry, cfg: BbviConfig) -> BbviResult:
    """Optimize the variational parameters and return the fitted state with
    its ELBO and log-likelihood traces."""
    geometry = as_geometry(geometry)
    rng = np.random.default_rng(cfg.seed)
    state, theta_z = _initial_state(y, geometry, cfg, rng)
    state._priors = cfg.priors
    state._theta_z = theta_z
    n = y.n
    i1 = state.anchors.i1

    # one rmsprop accumulator per scalar parameter
    acc_alpha = np.zeros(2)
    acc_nodes = np.zeros((n, 3))

    elbo_trace = np.empty(cfg.iterations)
    loglik_trace = np.empty(cfg.iterations)
    m_trace = np.empty(cfg.iterations)
    sigma_trace = np.empty(cfg.iterations)
    elbo0 = None
    it_run = 0

    for t in range(cfg.iterations):
        alpha_s, z_s = state.sample(cfg.S, rng)
        logp, loglik = _log_joint(y, state, alpha_s, z_s, cfg.priors, theta_z)
        logq = state.log_q(alpha_s, z_s)
        w = logp - logq

        max_move = 0.0

        h_a = grad_log_q_alpha(alpha_s, state.m_tilde, state.alpha_sigma())
        f_a = h_a * w[:, None]
        a_hat = control_variate_coeff(f_a, h_a)
        g_a = np.mean(f_a - a_hat * h_a, axis=0)
        step, acc_alpha = rmsprop_step(g_a, acc_alpha, cfg)
        state.m_tilde += step[0]
        state.log_sigma_tilde += step[1]
        max_move = max(max_move, float(np.max(np.abs(step))))

        for i in range(n):
            if i == i1:
                continue
            h_i = state.node_grad(i, z_s[:, i, :])
            mask = state.free_mask(i)
            h_i = h_i * mask
            f_i = h_i * w[:, None]
            a_hat = control_variate_coeff(f_i[:, mask], h_i[:, mask])
            g_i = np.mean(f_i - a_hat * h_i, axis=0)
            step, acc_nodes[i] = rmsprop_step(g_i, acc_nodes[i], cfg)
            step = step * mask
            role = state.roles[i]
            if role is AnchorRole.I3:
                # hold location steps that would leave the half-space
                if geometry is Geometry.HYPERBOLIC:
                    if math.sin(state.phi[i] + step[1]) <= 0.0:
                        step[1] = 0.0
                else:
                    s2 = math.sin(state.phi[i] + step[1]) * math.sin(state.omega[i] + step[0])
                    if s2 <= 0.0:
                        step[0] = step[1] = 0.0
            elif role is AnchorRole.I2 and geometry is Geometry.SPHERICAL:
                # keep the polar angle inside (0, pi) so the first coordinate
                # stays positive
                if not 0.0 < state.omega[i] + step[0] < math.pi:
                    step[0] = 0.0
            if geometry is Geometry.HYPERBOLIC:
                state.r_star[i] += step[0]
                state.phi[i] += step[1]
                state.log_s[i] += step[2]
            else:
                state.omega[i] += step[0]
                state.phi[i] += step[1]
                state.log_kappa[i] += step[2]
            max_move = max(max_move, float(np.max(np.abs(step))))

        elbo_trace[t] = float(np.mean(w))
        loglik_trace[t] = float(np.mean(loglik))
        m_trace[t] = state.m_tilde
        sigma_trace[t] = state.alpha_sigma()
        it_run = t + 1
        if elbo0 is None:
            elbo0 = elbo_trace[t]
        elif elbo_trace[t] < elbo0 - 1e6:
            raise DivergedOptimizationError(
                f"ELBO fell from {elbo0:.3g} to {elbo_trace[t]:.3g} at iteration {t}"
            )
        if cfg.early_stop_delta is not None and max_move < cfg.early_stop_delta:
            break

    return BbviResult(
        state=state,
        elbo_trace=elbo_trace[:it_run],
        loglik_trace=loglik_trace[:it_run],
        m_trace=m_trace[:it_run],
        sigma_trace=sigma_trace[:it_run],
        anchors=state.anchors,
        theta_z=theta_z,
        iterations_run=it_run,
    )
