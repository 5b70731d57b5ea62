"""Metropolis-within-Gibbs sampler for the latent-space network posterior.

One iteration updates (optionally) the base-rate prior parameters, then the
base rate by a Gaussian random walk, then every latent coordinate except the
first anchor. Latent proposals are exactly symmetric on the manifold: a
hyperbolic Normal centered at the current point on the disk, a von
Mises-Fisher centered at the current point on the sphere. The second
anchor walks only its one free coordinate and the third anchor's proposals
are rejected outright when they leave the positive-second-coordinate
half-space, which preserves reversibility on the restricted domain.

The inner loop runs millions of times, so proposals and cached distance
rows use scalar math paths rather than the validated array API.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import Geometry, as_geometry
from .distributions import (
    GaussianParams,
    HyperbolicNormalParams,
    VmfParams,
    gaussian_log_density,
    _log_hyp_normal_Z,
)
from .model import (
    Network,
    LatentConfiguration,
    PriorSpec,
    _bernoulli_log_terms,
    default_theta_z,
    theta_z_log_prior,
)
from .identifiability import (
    AnchorRole,
    AnchorSpec,
    DegenerateAnchorsError,
    anchor_candidates,
    anchor_roles,
    canonicalize,
)
from .initialization import embed_mds, graph_distances, grid_search_alpha

__all__ = [
    "McmcConfig",
    "McmcTrace",
    "run_mcmc",
    "mh_update_alpha",
    "mh_update_latent",
    "effective_sample_size",
]

TWO_PI = 2.0 * math.pi


@dataclass
class McmcConfig:
    iterations: int = 20_000
    thin: int = 1
    seed: int = 0
    alpha_step: float = 0.5
    latent_step: float = 0.3
    priors: PriorSpec = field(default_factory=PriorSpec)
    theta_z: HyperbolicNormalParams | VmfParams | None = None
    anchors: AnchorSpec | None = None
    update_prior_params: bool = False
    update_theta_z: bool = False
    # recompute the tracked log-likelihood from scratch every k iterations
    # and fail loudly on drift; 0 disables the check
    check_every: int = 0

    def __post_init__(self):
        if self.iterations < 1 or self.thin < 1:
            raise ValueError("iterations and thin must be >= 1")
        if self.alpha_step <= 0 or self.latent_step <= 0:
            raise ValueError("step sizes must be positive")


@dataclass
class McmcTrace:
    geometry: Geometry
    anchors: AnchorSpec
    iters: np.ndarray
    alpha_samples: np.ndarray
    z_samples: np.ndarray
    loglik_samples: np.ndarray
    acceptance_rates: dict
    theta_z: object
    priors: PriorSpec

    def retained(self, burnin: int = 0):
        """Samples recorded after the first `burnin` iterations."""
        keep = self.iters > burnin
        return self.alpha_samples[keep], self.z_samples[keep], self.loglik_samples[keep]


def _mobius_add_scalar(mx, my, vx, vy):
    x2 = mx * mx + my * my
    y2 = vx * vx + vy * vy
    xy = mx * vx + my * vy
    ax = 1.0 + 2.0 * xy + y2
    bx = 1.0 - x2
    den = 1.0 + 2.0 * xy + x2 * y2
    return ((ax * mx + bx * vx) / den, (ax * my + bx * vy) / den)


def _sample_hyp_normal_one(mu, sigma, rng):
    """One draw from the disk Normal, scalar rejection loop.

    The envelope ratio reduces to
    exp(-r^2/(2 s^2) + r/s - (s+1)^2/2) sinh(r)/r, all normalizers cancel.
    """
    half_sq = (sigma + 1.0) ** 2 / 2.0
    while True:
        rng.random()  # magnitude of the disk-uniform location, absorbed
        zeta = rng.random() * TWO_PI
        r = rng.gamma(2.0, sigma)
        log_sinh = r + math.log1p(-math.exp(-2.0 * r)) - math.log(2.0)
        log_ar = -r * r / (2.0 * sigma * sigma) + r / sigma - half_sq + log_sinh - math.log(r)
        if math.log(rng.random()) < log_ar:
            break
    # exp_mu((r / lambda) a) with ||a|| = 1 collapses to tanh(r/2) along a
    t = math.tanh(r / 2.0)
    x, y = _mobius_add_scalar(mu[0], mu[1], t * math.cos(zeta), t * math.sin(zeta))
    return np.array([x, y])


def _sample_vmf_one(mu, kappa, b, x0, c, rng):
    """One draw from vMF(mu, kappa) on S^2, scalar Wood loop."""
    while True:
        zz = rng.random()
        w = (1.0 - (1.0 + b) * zz) / (1.0 - (1.0 - b) * zz)
        if kappa * w + 2.0 * math.log(1.0 - x0 * w) - c >= math.log(rng.random()):
            break
    m0, m1, m2 = mu
    a0, a1, a2 = abs(m0), abs(m1), abs(m2)
    if a0 <= a1 and a0 <= a2:
        t1 = (0.0, m2, -m1)
    elif a1 <= a2:
        t1 = (-m2, 0.0, m0)
    else:
        t1 = (m1, -m0, 0.0)
    n1 = math.sqrt(t1[0] ** 2 + t1[1] ** 2 + t1[2] ** 2)
    t1 = (t1[0] / n1, t1[1] / n1, t1[2] / n1)
    t2 = (
        m1 * t1[2] - m2 * t1[1],
        m2 * t1[0] - m0 * t1[2],
        m0 * t1[1] - m1 * t1[0],
    )
    zeta = rng.random() * TWO_PI
    s = math.sqrt(max(1.0 - w * w, 0.0))
    cz, sz = math.cos(zeta), math.sin(zeta)
    out = np.array(
        [
            s * (cz * t1[0] + sz * t2[0]) + w * m0,
            s * (cz * t1[1] + sz * t2[1]) + w * m1,
            s * (cz * t1[2] + sz * t2[2]) + w * m2,
        ]
    )
    return out / math.sqrt(out[0] ** 2 + out[1] ** 2 + out[2] ** 2)


class _ChainState:
    """Mutable sampler state. The distance matrix, squared norms, per-node
    prior log-densities, and the log-likelihood are all tracked
    incrementally; a scratch recompute is available for consistency checks."""

    def __init__(self, y: Network, cfg0: LatentConfiguration, priors: PriorSpec, roles):
        self.y = y
        self.geometry = cfg0.geometry
        self.hyperbolic = cfg0.geometry is Geometry.HYPERBOLIC
        self.z = cfg0.z.copy()
        self.alpha = float(cfg0.alpha)
        self.theta_z = cfg0.theta_z
        self.priors = priors
        self.roles = roles
        self.alpha_prior = priors.alpha_prior
        self.adj = y.adjacency.astype(float)
        self.iu = np.triu_indices(y.n, k=1)
        self.y_u = self.adj[self.iu]
        self._refresh_theta_cache()
        if self.hyperbolic:
            self.sqnorm = np.sum(self.z * self.z, axis=1)
        self.dist = self._distance_matrix(self.z)
        self.loglik = self._loglik_from_scratch()
        self.z_logprior = np.array([self._prior_logpdf(p) for p in self.z])
        self._proposal_step = None

    # -- cached quantities ------------------------------------------------

    def _refresh_theta_cache(self):
        if self.hyperbolic:
            self._th_mu = np.asarray(self.theta_z.mu, dtype=float)
            self._th_c0 = -float(_log_hyp_normal_Z(self.theta_z.sigma))
            self._th_inv = 1.0 / (2.0 * self.theta_z.sigma**2)
        else:
            self._th_mu = np.asarray(self.theta_z.mu, dtype=float)
            k = self.theta_z.kappa
            if k == 0.0:
                self._th_c0 = -math.log(4.0 * math.pi)
                self._th_k = 0.0
            else:
                self._th_c0 = math.log(k) - math.log(TWO_PI) - math.log1p(-math.exp(-2.0 * k))
                self._th_k = k

    def _prior_logpdf(self, point) -> float:
        if self.hyperbolic:
            d = self._dist_scalar(self._th_mu, point)
            return self._th_c0 - d * d * self._th_inv
        dot = self._th_mu[0] * point[0] + self._th_mu[1] * point[1] + self._th_mu[2] * point[2]
        return self._th_c0 + self._th_k * (min(dot, 1.0) - 1.0)

    def _dist_scalar(self, a, b) -> float:
        if self.hyperbolic:
            dx, dy = a[0] - b[0], a[1] - b[1]
            u = 2.0 * (dx * dx + dy * dy) / (
                (1.0 - a[0] * a[0] - a[1] * a[1]) * (1.0 - b[0] * b[0] - b[1] * b[1])
            )
            return math.log1p(u + math.sqrt(u * (u + 2.0)))
        dot = a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
        return math.acos(min(1.0, max(-1.0, dot)))

    def _distance_matrix(self, z):
        if self.hyperbolic:
            sq = np.sum(z * z, axis=1)
            diff = z[:, None, :] - z[None, :, :]
            u = 2.0 * np.sum(diff * diff, axis=-1) / ((1.0 - sq)[:, None] * (1.0 - sq)[None, :])
            return np.log1p(u + np.sqrt(u * (u + 2.0)))
        d = np.arccos(np.clip(z @ z.T, -1.0, 1.0))
        np.fill_diagonal(d, 0.0)
        return d

    def _distance_row(self, point, i):
        if self.hyperbolic:
            diff = self.z - point
            u = 2.0 * np.sum(diff * diff, axis=1) / (
                (1.0 - self.sqnorm) * (1.0 - point[0] ** 2 - point[1] ** 2)
            )
            row = np.log1p(u + np.sqrt(u * (u + 2.0)))
        else:
            row = np.arccos(np.clip(self.z @ point, -1.0, 1.0))
        row[i] = 0.0
        return row

    def _loglik_from_scratch(self):
        eta = self.alpha - self.dist[self.iu]
        return float(np.sum(_bernoulli_log_terms(self.y_u, eta)))

    def _row_loglik(self, i, row):
        eta = self.alpha - row
        terms = _bernoulli_log_terms(self.adj[i], eta)
        terms[i] = 0.0
        return float(np.sum(terms))

    def log_posterior(self):
        return (
            self.loglik
            + float(np.sum(self.z_logprior))
            + float(gaussian_log_density(self.alpha, self.alpha_prior))
            + theta_z_log_prior(self.theta_z, self.priors, self.geometry)
        )

    def configuration(self) -> LatentConfiguration:
        return LatentConfiguration(self.geometry, self.z.copy(), self.alpha, self.theta_z)

    def proposal_constants(self, step):
        """Wood envelope constants for the spherical proposal kernel."""
        if self._proposal_step != step:
            kappa = 1.0 / step**2
            b = (-2.0 * kappa + math.sqrt(4.0 * kappa**2 + 4.0)) / 2.0
            x0 = (1.0 - b) / (1.0 + b)
            c = kappa * x0 + 2.0 * math.log(1.0 - x0**2)
            self._proposal_step = step
            self._wood = (kappa, b, x0, c)
        return self._wood


def mh_update_alpha(state: _ChainState, y: Network, cfg: McmcConfig, rng):
    """Gaussian random-walk step for the base rate; the theta_z prior factor
    cancels between numerator and denominator and is omitted."""
    prop = state.alpha + cfg.alpha_step * rng.standard_normal()
    eta = prop - state.dist[state.iu]
    loglik_prop = float(np.sum(_bernoulli_log_terms(state.y_u, eta)))
    log_ratio = (
        loglik_prop
        - state.loglik
        + float(gaussian_log_density(prop, state.alpha_prior))
        - float(gaussian_log_density(state.alpha, state.alpha_prior))
    )
    if log_ratio >= 0.0 or math.log(rng.random()) < log_ratio:
        state.alpha = prop
        state.loglik = loglik_prop
        return prop, True
    return state.alpha, False


def _propose_free(state: _ChainState, i, step, rng):
    if state.hyperbolic:
        return _sample_hyp_normal_one(state.z[i], step, rng)
    kappa, b, x0, c = state.proposal_constants(step)
    return _sample_vmf_one(state.z[i], kappa, b, x0, c, rng)


def _propose_i2(state: _ChainState, i, step, rng):
    """Walk the single free coordinate of the second anchor.

    Returns (proposal, log-Jacobian correction); None for out-of-domain
    proposals (counted as rejections). The hyperbolic walk runs in
    logit(a) space, so targeting the prior-times-likelihood density in the
    a coordinate needs the da/dlogit(a) = a(1-a) factor in the ratio; a
    plain ratio would leave the target improper (constant density as
    logit(a) -> -inf) and let the chain escape toward a = 0. The spherical
    polar angle lives on a bounded interval and needs no correction.
    """
    if state.hyperbolic:
        a = state.z[i, 0]
        xi = math.log(a / (1.0 - a)) + step * rng.standard_normal()
        a_new = 1.0 / (1.0 + math.exp(-xi))
        if not 0.0 < a_new < 1.0:
            return None
        log_jac = math.log(a_new * (1.0 - a_new)) - math.log(a * (1.0 - a))
        return np.array([a_new, 0.0]), log_jac
    omega = math.atan2(state.z[i, 0], state.z[i, 2])
    omega += step * rng.standard_normal()
    if not 0.0 < omega < math.pi:
        return None
    return np.array([math.sin(omega), 0.0, math.cos(omega)]), 0.0


def mh_update_latent(state: _ChainState, i: int, y: Network, cfg: McmcConfig, rng):
    """Metropolis step for one latent coordinate (never the first anchor)."""
    role = state.roles[i]
    if role is AnchorRole.I1:
        raise ValueError("the first anchor is never updated")
    log_jac = 0.0
    if role is AnchorRole.I2:
        proposal = _propose_i2(state, i, cfg.latent_step, rng)
        if proposal is None:
            return state.z[i], False
        prop, log_jac = proposal
    else:
        prop = _propose_free(state, i, cfg.latent_step, rng)
        if role is AnchorRole.I3 and prop[1] <= 0.0:
            return state.z[i], False

    row = state._distance_row(prop, i)
    prior_prop = state._prior_logpdf(prop)
    delta_lik = state._row_loglik(i, row) - state._row_loglik(i, state.dist[i])
    log_ratio = delta_lik + prior_prop - state.z_logprior[i] + log_jac
    if log_ratio >= 0.0 or math.log(rng.random()) < log_ratio:
        state.z[i] = prop
        if state.hyperbolic:
            state.sqnorm[i] = prop[0] ** 2 + prop[1] ** 2
        state.dist[i, :] = row
        state.dist[:, i] = row
        state.loglik += delta_lik
        state.z_logprior[i] = prior_prop
        return prop, True
    return state.z[i], False


def _update_prior_params(state: _ChainState, rng, step=0.25):
    """Optional MH step for the alpha-prior mean and scale.

    Hyperprior: m ~ N(0, 10), s ~ half-N(10). The scale walks in log space,
    so its ratio carries the ds/dlog s Jacobian.
    """
    p = state.alpha_prior
    m_prop = p.m + step * rng.standard_normal()
    lr = (
        gaussian_log_density(state.alpha, GaussianParams(m_prop, p.s))
        - gaussian_log_density(state.alpha, p)
        + gaussian_log_density(m_prop, GaussianParams(0.0, 10.0))
        - gaussian_log_density(p.m, GaussianParams(0.0, 10.0))
    )
    if lr >= 0 or math.log(rng.random()) < lr:
        p = GaussianParams(m_prop, p.s)
    s_prop = p.s * math.exp(step * rng.standard_normal())
    lr = (
        gaussian_log_density(state.alpha, GaussianParams(p.m, s_prop))
        - gaussian_log_density(state.alpha, p)
        + gaussian_log_density(s_prop, GaussianParams(0.0, 10.0))
        - gaussian_log_density(p.s, GaussianParams(0.0, 10.0))
        + math.log(s_prop) - math.log(p.s)
    )
    if lr >= 0 or math.log(rng.random()) < lr:
        p = GaussianParams(p.m, s_prop)
    state.alpha_prior = p


def _update_theta_z(state: _ChainState, cfg: McmcConfig, rng, step=0.1):
    """Optional MH step for the latent-distribution parameters."""
    from .distributions import hyp_normal_log_density, vmf_log_density

    th = state.theta_z
    if state.hyperbolic:
        mu_prop = _sample_hyp_normal_one(np.asarray(th.mu), step, rng)
        cand = HyperbolicNormalParams(mu_prop, th.sigma)
        lr = (
            float(np.sum(hyp_normal_log_density(state.z, cand)))
            - float(np.sum(state.z_logprior))
            + theta_z_log_prior(cand, state.priors, state.geometry)
            - theta_z_log_prior(th, state.priors, state.geometry)
        )
        if lr >= 0 or math.log(rng.random()) < lr:
            th = cand
        s_prop = th.sigma * math.exp(step * rng.standard_normal())
        if 0.0 < s_prop <= state.priors.sigma_max:
            cand = HyperbolicNormalParams(th.mu, s_prop)
            lr = (
                float(np.sum(hyp_normal_log_density(state.z, cand)))
                - float(np.sum(hyp_normal_log_density(state.z, th)))
                + math.log(s_prop) - math.log(th.sigma)
            )
            if lr >= 0 or math.log(rng.random()) < lr:
                th = cand
    else:
        kappa, b, x0, c = state.proposal_constants(step)
        mu_prop = _sample_vmf_one(np.asarray(th.mu), kappa, b, x0, c, rng)
        cand = VmfParams(mu_prop, th.kappa)
        lr = float(np.sum(vmf_log_density(state.z, cand))) - float(np.sum(state.z_logprior))
        if lr >= 0 or math.log(rng.random()) < lr:
            th = cand
        if th.kappa > 0:
            k_prop = th.kappa * math.exp(step * rng.standard_normal())
            cand = VmfParams(th.mu, k_prop)
            lr = (
                float(np.sum(vmf_log_density(state.z, cand)))
                - float(np.sum(vmf_log_density(state.z, th)))
                + theta_z_log_prior(cand, state.priors, state.geometry)
                - theta_z_log_prior(th, state.priors, state.geometry)
                + math.log(k_prop) - math.log(th.kappa)
            )
            if lr >= 0 or math.log(rng.random()) < lr:
                th = cand
    state.theta_z = th
    state._refresh_theta_cache()
    state.z_logprior = np.array([state._prior_logpdf(p) for p in state.z])


def initialize_state(y: Network, geometry, cfg, rng):
    """Shared inference initialization: MDS embedding, grid-searched base
    rate, anchor selection with degenerate-triple fallback, and
    canonicalization. Returns the canonical configuration and the anchors."""
    geometry = as_geometry(geometry)
    if y.n < 3:
        raise ValueError("inference needs at least 3 nodes")
    D = graph_distances(y)
    emb = embed_mds(D, geometry, rng)
    alpha0 = grid_search_alpha(y, emb.z, geometry)
    theta_z = cfg.theta_z if cfg.theta_z is not None else default_theta_z(geometry)

    cfg0 = LatentConfiguration(geometry, emb.z, alpha0, theta_z)
    anchors = getattr(cfg, "anchors", None)
    candidates = [anchors] if anchors is not None else anchor_candidates(y)
    last_err = None
    for spec in candidates:
        try:
            canon = canonicalize(cfg0, spec)
        except DegenerateAnchorsError as err:
            last_err = err
            continue
        # hold theta_z's mean at the canonical anchor value when it is fixed
        if not getattr(cfg, "update_theta_z", False):
            if geometry is Geometry.HYPERBOLIC:
                fixed = HyperbolicNormalParams(geometry.canonical_origin(), theta_z.sigma)
            else:
                fixed = VmfParams(geometry.canonical_origin(), theta_z.kappa)
            canon = LatentConfiguration(geometry, canon.z, canon.alpha, fixed)
        return canon, spec
    raise DegenerateAnchorsError(f"no usable anchor triple: {last_err}")


def run_mcmc(y: Network, geometry, cfg: McmcConfig) -> McmcTrace:
    """Run the sampler and return the thinned trace."""
    rng = np.random.default_rng(cfg.seed)
    canon, spec = initialize_state(y, geometry, cfg, rng)
    roles = anchor_roles(spec, y.n)
    state = _ChainState(y, canon, cfg.priors, roles)

    update_order = [i for i in range(y.n) if i != spec.i1]
    n_keep = cfg.iterations // cfg.thin
    iters = np.empty(n_keep, dtype=int)
    alpha_s = np.empty(n_keep)
    loglik_s = np.empty(n_keep)
    z_s = np.empty((n_keep, y.n, state.z.shape[1]))

    acc_alpha = att_alpha = 0
    acc_lat = att_lat = 0
    k = 0
    for it in range(1, cfg.iterations + 1):
        if cfg.update_prior_params:
            _update_prior_params(state, rng)
        _, ok = mh_update_alpha(state, y, cfg, rng)
        att_alpha += 1
        acc_alpha += ok
        if cfg.update_theta_z:
            _update_theta_z(state, cfg, rng)
        for i in update_order:
            _, ok = mh_update_latent(state, i, y, cfg, rng)
            att_lat += 1
            acc_lat += ok
        if cfg.check_every and it % cfg.check_every == 0:
            fresh = state._loglik_from_scratch()
            if abs(fresh - state.loglik) > 1e-8:
                raise RuntimeError(
                    f"incremental log-likelihood drifted: {state.loglik} vs {fresh}"
                )
            state.loglik = fresh
        if it % cfg.thin == 0:
            iters[k] = it
            alpha_s[k] = state.alpha
            loglik_s[k] = state.loglik
            z_s[k] = state.z
            k += 1

    return McmcTrace(
        geometry=state.geometry,
        anchors=spec,
        iters=iters,
        alpha_samples=alpha_s,
        z_samples=z_s,
        loglik_samples=loglik_s,
        acceptance_rates={
            "alpha": acc_alpha / max(att_alpha, 1),
            "latent": acc_lat / max(att_lat, 1),
        },
        theta_z=state.theta_z,
        priors=cfg.priors,
    )


def effective_sample_size(samples) -> float:
    """ESS by initial-positive-sequence truncation of the autocorrelations."""
    x = np.asarray(samples, dtype=float)
    n = x.size
    if n < 10:
        raise ValueError("need at least 10 samples")
    x = x - x.mean()
    var = float(np.dot(x, x)) / n
    if var == 0.0:
        return 1.0
    # autocovariances via FFT
    m = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(x, m)
    acov = np.fft.irfft(f * np.conj(f), m)[:n].real / n
    rho = acov / acov[0]
    total = 0.0
    for k in range(1, n):
        if rho[k] <= 0.0:
            break
        total += rho[k]
    return max(1.0, n / (1.0 + 2.0 * total))
