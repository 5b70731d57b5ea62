"""Command-line front end: graph generation, fitting, and prediction.

Runs are reproducible from their manifest: the manifest records the merged
configuration, the seed, and the SHA-256 of the canonicalized edge list.
Exit codes: 0 success, 2 usage or config errors, 3 data errors, 4 numerical
failures.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .geometry import Geometry, as_geometry
from .distributions import GaussianParams, HyperbolicNormalParams, VmfParams
from .model import Network, PriorSpec, default_theta_z, sample_network
from .identifiability import AnchorSpec, DegenerateAnchorsError, TooFewNodesError
from .mcmc import McmcConfig, run_mcmc
from .bbvi import BbviConfig, DivergedOptimizationError, run_bbvi
from .evaluate import (
    posterior_predictive_probs,
    predictive_from_variational,
    summarize_latent,
)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4


class ParseError(ValueError):
    """Malformed edge list or config file."""


class ConfigError(ValueError):
    """Bad key or value in a config file."""


def _fmt(x: float) -> str:
    return f"{float(x):.17g}"


# ---------------------------------------------------------------------------
# file formats

def read_edge_list(path, n_nodes=None) -> Network:
    """UTF-8 edge list: one '1-based-i 1-based-j' pair per line, '#' comments,
    duplicates tolerated. Node count defaults to the largest id seen."""
    edges = []
    max_id = 0
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as err:
        raise ParseError(f"cannot read edge list {path}: {err}") from err
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ParseError(f"{path}:{lineno}: expected two node ids, got {raw!r}")
        try:
            i, j = int(parts[0]), int(parts[1])
        except ValueError:
            raise ParseError(f"{path}:{lineno}: node ids must be integers, got {raw!r}") from None
        if i < 1 or j < 1:
            raise ParseError(f"{path}:{lineno}: node ids are 1-based, got {raw!r}")
        if i == j:
            raise ParseError(f"{path}:{lineno}: self ties are not allowed")
        edges.append((i - 1, j - 1))
        max_id = max(max_id, i, j)
    n = n_nodes if n_nodes is not None else max_id
    if n < 2:
        raise ParseError(f"{path}: need at least 2 nodes, found {n}")
    if max_id > n:
        raise ParseError(f"{path}: node id {max_id} exceeds --nodes {n}")
    return Network.from_edges(n, edges)


def canonical_edge_text(y: Network) -> str:
    lines = [f"{i + 1} {j + 1}" for i, j in y.edge_list()]
    return "\n".join(lines) + ("\n" if lines else "")


def edges_sha256(y: Network) -> str:
    return hashlib.sha256(canonical_edge_text(y).encode("utf-8")).hexdigest()


def write_edge_list(path, y: Network):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# i j (1-based node ids, undirected)\n")
        fh.write(canonical_edge_text(y))


_CONFIG_KEYS = {
    "geometry": str,
    "nodes": int,
    "alpha": float,
    "seed": int,
    "iterations": int,
    "thin": int,
    "burnin": int,
    "samples": int,
    "chains": int,
    "alpha_step": float,
    "latent_step": float,
    "learning_rate": float,
    "rmsprop_decay": float,
    "rmsprop_epsilon": float,
    "alpha_prior_mean": float,
    "alpha_prior_sd": float,
    "sigma_z": float,
    "kappa_z": float,
    "anchors": str,
    "update_theta_z": bool,
    "update_prior_params": bool,
}


def read_config(path) -> dict:
    """Flat key=value config; '#' comments; unknown keys and bad values are
    reported with their line number."""
    out = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as err:
        raise ConfigError(f"cannot read config {path}: {err}") from err
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value, got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key not in _CONFIG_KEYS:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        typ = _CONFIG_KEYS[key]
        try:
            if typ is bool:
                if value.lower() not in ("true", "false", "0", "1"):
                    raise ValueError(value)
                out[key] = value.lower() in ("true", "1")
            else:
                out[key] = typ(value)
        except ValueError:
            raise ConfigError(
                f"{path}:{lineno}: field {key!r} expects {typ.__name__}, got {value!r}"
            ) from None
    return out


def _parse_anchor_string(s: str) -> AnchorSpec:
    try:
        parts = [int(p) for p in s.split(",")]
        if len(parts) != 3:
            raise ValueError
    except ValueError:
        raise ConfigError(f"anchors must be 'i1,i2,i3' (1-based), got {s!r}") from None
    return AnchorSpec(parts[0] - 1, parts[1] - 1, parts[2] - 1)


def _merge_settings(args, allowed=None) -> dict:
    cfg = {}
    if getattr(args, "config", None):
        cfg.update(read_config(args.config))
    for key in _CONFIG_KEYS:
        val = getattr(args, key, None)
        if val is not None:
            cfg[key] = val
    if allowed is not None:
        for key in cfg:
            if key not in allowed:
                raise ConfigError(f"setting {key!r} does not apply to this command")
    return cfg


def _theta_from_settings(geometry: Geometry, cfg: dict):
    if geometry is Geometry.HYPERBOLIC:
        return default_theta_z(geometry, sigma_z=cfg.get("sigma_z", 1.3))
    return default_theta_z(geometry, kappa_z=cfg.get("kappa_z", 3.0))


def _priors_from_settings(cfg: dict) -> PriorSpec:
    return PriorSpec(
        alpha_prior=GaussianParams(
            cfg.get("alpha_prior_mean", 0.0), cfg.get("alpha_prior_sd", 10.0)
        )
    )


def _write_json(path, payload):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _theta_to_dict(theta):
    if isinstance(theta, HyperbolicNormalParams):
        return {"family": "hyperbolic_normal", "mu": list(map(float, theta.mu)), "sigma": theta.sigma}
    return {"family": "vmf", "mu": list(map(float, theta.mu)), "kappa": theta.kappa}


# ---------------------------------------------------------------------------
# commands

def cmd_generate(args) -> int:
    cfg = _merge_settings(args)
    for required in ("geometry", "nodes", "alpha"):
        if required not in cfg:
            raise ConfigError(f"generate needs {required!r} (config file or flag)")
    geometry = as_geometry(cfg["geometry"])
    n = cfg["nodes"]
    seed = cfg.get("seed", 0)
    theta = _theta_from_settings(geometry, cfg)
    rng = np.random.default_rng(seed)
    net, truth = sample_network(geometry, n, cfg["alpha"], theta, rng)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_edge_list(out / "edges.txt", net)
    _write_json(
        out / "truth.json",
        {
            "geometry": geometry.value,
            "n": n,
            "alpha": cfg["alpha"],
            "seed": seed,
            "theta_z": _theta_to_dict(theta),
            "z": [[float(c) for c in row] for row in truth.z],
        },
    )
    _write_json(
        out / "manifest.json",
        {
            "command": "generate",
            "version": __version__,
            "settings": {k: cfg[k] for k in sorted(cfg)},
            "seed": seed,
            "edges_sha256": edges_sha256(net),
            "n_nodes": n,
            "n_edges": net.n_edges,
            "files": {"edges": "edges.txt", "truth": "truth.json"},
        },
    )
    return EXIT_OK


def _write_mcmc_outputs(out: Path, trace, burnin: int):
    with open(out / "trace.csv", "w", encoding="utf-8") as fh:
        fh.write("iter,alpha,loglik\n")
        for it, a, ll in zip(trace.iters, trace.alpha_samples, trace.loglik_samples):
            fh.write(f"{it},{_fmt(a)},{_fmt(ll)}\n")
    dim = trace.z_samples.shape[2]
    with open(out / "latent_trace.csv", "w", encoding="utf-8") as fh:
        fh.write("iter,node," + ",".join(f"c{k + 1}" for k in range(dim)) + "\n")
        for it, z in zip(trace.iters, trace.z_samples):
            for node in range(z.shape[0]):
                coords = ",".join(_fmt(c) for c in z[node])
                fh.write(f"{it},{node + 1},{coords}\n")
    alpha_kept, z_kept, _ = trace.retained(burnin)
    if alpha_kept.size == 0:
        alpha_kept, z_kept = trace.alpha_samples, trace.z_samples
    summary = summarize_latent(z_kept, trace.geometry)
    state = {
        "method": "mcmc",
        "geometry": trace.geometry.value,
        "anchors": [i + 1 for i in trace.anchors.as_tuple()],
        "n": int(trace.z_samples.shape[1]),
        "alpha_mean": float(alpha_kept.mean()),
        "alpha_sd": float(alpha_kept.std(ddof=1)) if alpha_kept.size > 1 else 0.0,
        "burnin": burnin,
        "acceptance_rates": trace.acceptance_rates,
        "theta_z": _theta_to_dict(trace.theta_z),
        "latent_mean": [[float(c) for c in row] for row in summary.means],
        "latent_dispersion": [float(v) for v in summary.dispersion],
    }
    _write_json(out / "state.json", state)
    return state


def _run_single_chain(payload):
    y, geometry, mcfg, outdir, burnin = payload
    trace = run_mcmc(y, geometry, mcfg)
    outdir.mkdir(parents=True, exist_ok=True)
    state = _write_mcmc_outputs(outdir, trace, burnin)
    return state


def cmd_fit(args) -> int:
    method = args.method
    y = read_edge_list(args.edges, getattr(args, "nodes", None))
    cfg = _merge_settings(args)
    if "geometry" not in cfg:
        raise ConfigError("fit needs a geometry (config file or --geometry)")
    geometry = as_geometry(cfg["geometry"])
    seed = cfg.get("seed", 0)
    burnin = cfg.get("burnin", 0)
    anchors = _parse_anchor_string(cfg["anchors"]) if "anchors" in cfg else None
    priors = _priors_from_settings(cfg)
    theta = _theta_from_settings(geometry, cfg)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.monotonic()
    files = {}

    if method == "mcmc":
        mcfg = McmcConfig(
            iterations=cfg.get("iterations", 20_000),
            thin=cfg.get("thin", 10),
            seed=seed,
            alpha_step=cfg.get("alpha_step", 0.5),
            latent_step=cfg.get("latent_step", 0.3),
            priors=priors,
            theta_z=theta,
            anchors=anchors,
            update_prior_params=cfg.get("update_prior_params", False),
            update_theta_z=cfg.get("update_theta_z", False),
        )
        chains = cfg.get("chains", 1)
        if chains <= 1:
            trace = run_mcmc(y, geometry, mcfg)
            _write_mcmc_outputs(out, trace, burnin)
            files = {"trace": "trace.csv", "latent_trace": "latent_trace.csv", "state": "state.json"}
        else:
            seeds = np.random.SeedSequence(seed).generate_state(chains).tolist()
            jobs = []
            for c, s in enumerate(seeds):
                ccfg = McmcConfig(
                    iterations=mcfg.iterations, thin=mcfg.thin, seed=int(s),
                    alpha_step=mcfg.alpha_step, latent_step=mcfg.latent_step,
                    priors=priors, theta_z=theta, anchors=anchors,
                    update_prior_params=mcfg.update_prior_params,
                    update_theta_z=mcfg.update_theta_z,
                )
                jobs.append((y, geometry, ccfg, out / f"chain_{c:02d}", burnin))
            max_workers = int(os.environ.get("GEOLATNET_THREADS", "0")) or min(chains, os.cpu_count() or 1)
            with ProcessPoolExecutor(max_workers=max_workers) as pool:
                list(pool.map(_run_single_chain, jobs))
            files = {f"chain_{c:02d}": f"chain_{c:02d}/" for c in range(chains)}
    else:
        bcfg = BbviConfig(
            iterations=cfg.get("iterations", 1000),
            S=cfg.get("samples", 20),
            seed=seed,
            learning_rate=cfg.get("learning_rate", 0.05),
            rmsprop_decay=cfg.get("rmsprop_decay", 0.9),
            rmsprop_epsilon=cfg.get("rmsprop_epsilon", 1e-8),
            priors=priors,
            theta_z=theta,
            anchors=anchors,
        )
        res = run_bbvi(y, geometry, bcfg)
        with open(out / "elbo.csv", "w", encoding="utf-8") as fh:
            fh.write("iter,elbo,loglik,m_tilde,sigma_tilde\n")
            for t in range(res.iterations_run):
                fh.write(
                    f"{t + 1},{_fmt(res.elbo_trace[t])},{_fmt(res.loglik_trace[t])},"
                    f"{_fmt(res.m_trace[t])},{_fmt(res.sigma_trace[t])}\n"
                )
        st = res.state
        state = {
            "method": "bbvi",
            "geometry": geometry.value,
            "anchors": [i + 1 for i in res.anchors.as_tuple()],
            "n": y.n,
            "m_tilde": float(st.m_tilde),
            "sigma_tilde": float(st.alpha_sigma()),
            "elbo_final": float(res.elbo_trace[-1]),
            "iterations_run": res.iterations_run,
            "theta_z": _theta_to_dict(res.theta_z),
            "latent_mean": [[float(c) for c in row] for row in st.decode_locations()],
        }
        if geometry is Geometry.HYPERBOLIC:
            state["node_params"] = {
                "r_star": [float(v) for v in st.r_star],
                "phi": [float(v) for v in st.phi],
                "log_s": [float(v) for v in st.log_s],
            }
        else:
            state["node_params"] = {
                "omega": [float(v) for v in st.omega],
                "phi": [float(v) for v in st.phi],
                "log_kappa": [float(v) for v in st.log_kappa],
            }
        _write_json(out / "state.json", state)
        files = {"elbo": "elbo.csv", "state": "state.json"}

    _write_json(
        out / "manifest.json",
        {
            "command": f"fit {method}",
            "version": __version__,
            "settings": {k: cfg[k] for k in sorted(cfg)},
            "seed": seed,
            "burnin": burnin,
            "geometry": geometry.value,
            "edges_sha256": edges_sha256(y),
            "n_nodes": y.n,
            "n_edges": y.n_edges,
            "timing_seconds": time.monotonic() - t0,
            "files": files,
        },
    )
    return EXIT_OK


def _state_to_variational(state_dict):
    from .bbvi import VariationalStateHyperbolic, VariationalStateSpherical

    anchors = AnchorSpec(*[i - 1 for i in state_dict["anchors"]])
    p = state_dict["node_params"]
    if state_dict["geometry"] == "hyperbolic":
        return VariationalStateHyperbolic(
            m_tilde=state_dict["m_tilde"],
            log_sigma_tilde=math.log(state_dict["sigma_tilde"]),
            r_star=np.asarray(p["r_star"], dtype=float),
            phi=np.asarray(p["phi"], dtype=float),
            log_s=np.asarray(p["log_s"], dtype=float),
            anchors=anchors,
        )
    return VariationalStateSpherical(
        m_tilde=state_dict["m_tilde"],
        log_sigma_tilde=math.log(state_dict["sigma_tilde"]),
        omega=np.asarray(p["omega"], dtype=float),
        phi=np.asarray(p["phi"], dtype=float),
        log_kappa=np.asarray(p["log_kappa"], dtype=float),
        anchors=anchors,
    )


def _read_csv_columns(path, expected_header):
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as err:
        raise ParseError(f"missing fit output {path}: {err}") from err
    lines = text.splitlines()
    if not lines or lines[0] != expected_header:
        raise ParseError(f"{path}: expected header {expected_header!r}")
    rows = [line.split(",") for line in lines[1:] if line]
    return rows


def cmd_predict(args) -> int:
    fit_dir = Path(getattr(args, "fit_dir"))
    manifest_path = fit_dir / "manifest.json"
    try:
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    except OSError as err:
        raise ParseError(f"missing manifest {manifest_path}: {err}") from err
    y = read_edge_list(args.edges, getattr(args, "nodes", None))
    if manifest.get("edges_sha256") not in (None, edges_sha256(y)):
        print(
            "warning: edge list hash differs from the fitted run's input",
            file=sys.stderr,
        )
    state = json.loads((fit_dir / "state.json").read_text(encoding="utf-8"))
    geometry = as_geometry(state["geometry"])
    burnin = args.burnin if args.burnin is not None else manifest.get("burnin", 0)

    if state["method"] == "mcmc":
        rows = _read_csv_columns(fit_dir / "trace.csv", "iter,alpha,loglik")
        iters = np.array([int(r[0]) for r in rows])
        alphas = np.array([float(r[1]) for r in rows])
        dim = geometry.ambient_dim
        header = "iter,node," + ",".join(f"c{k + 1}" for k in range(dim))
        lrows = _read_csv_columns(fit_dir / "latent_trace.csv", header)
        n = state["n"]
        z = np.array([[float(c) for c in r[2 : 2 + dim]] for r in lrows]).reshape(
            len(iters), n, dim
        )
        keep = iters > burnin
        if not np.any(keep):
            keep = np.ones_like(keep)
        records = posterior_predictive_probs(alphas[keep], z[keep], y, geometry)
    else:
        vstate = _state_to_variational(state)
        draws = args.samples if getattr(args, "samples", None) else 500
        records = predictive_from_variational(
            vstate, y, n_draws=draws, rng=np.random.default_rng(manifest.get("seed", 0) + 1)
        )

    out_path = Path(args.out) if args.out else fit_dir / "predictive.csv"
    if out_path.is_dir():
        out_path = out_path / "predictive.csv"
    with open(out_path, "w", encoding="utf-8") as fh:
        fh.write("i,j,y,mean_p\n")
        for r in records:
            fh.write(f"{r.i + 1},{r.j + 1},{r.y},{_fmt(r.mean_p)}\n")
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing

def _add_common(p):
    p.add_argument("--config", help="flat key=value config file")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--geometry", choices=["hyperbolic", "spherical"], default=None)
    p.add_argument("--nodes", type=int, default=None, help="node count override")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="geolatnet",
        description="Latent-space network models in hyperbolic and spherical geometry",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="sample a graph from the generative model")
    _add_common(g)
    g.add_argument("--out", required=True, help="output directory")
    g.add_argument("--alpha", type=float, default=None)
    g.add_argument("--sigma_z", type=float, default=None)
    g.add_argument("--kappa_z", type=float, default=None)
    g.set_defaults(func=cmd_generate)

    f = sub.add_parser("fit", help="fit the model to an edge list")
    fsub = f.add_subparsers(dest="method", required=True)
    for method in ("mcmc", "bbvi"):
        fp = fsub.add_parser(method)
        _add_common(fp)
        fp.add_argument("--edges", required=True)
        fp.add_argument("--out", required=True)
        fp.add_argument("--iterations", type=int, default=None)
        fp.add_argument("--burnin", type=int, default=None)
        fp.add_argument("--sigma_z", type=float, default=None)
        fp.add_argument("--kappa_z", type=float, default=None)
        fp.add_argument("--anchors", default=None, help="i1,i2,i3 (1-based)")
        if method == "mcmc":
            fp.add_argument("--thin", type=int, default=None)
            fp.add_argument("--chains", type=int, default=None)
            fp.add_argument("--alpha_step", type=float, default=None)
            fp.add_argument("--latent_step", type=float, default=None)
        else:
            fp.add_argument("--samples", type=int, default=None, help="S draws per gradient")
            fp.add_argument("--learning_rate", type=float, default=None)
        fp.set_defaults(func=cmd_fit)

    p = sub.add_parser("predict", help="posterior predictive link probabilities")
    p.add_argument("--in", dest="fit_dir", required=True, help="fit output directory")
    p.add_argument("--edges", required=True)
    p.add_argument("--out", default=None, help="output CSV (default: fit dir)")
    p.add_argument("--burnin", type=int, default=None)
    p.add_argument("--samples", type=int, default=None, help="variational draws")
    p.add_argument("--nodes", type=int, default=None)
    p.set_defaults(func=cmd_predict)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as err:
        return EXIT_USAGE if err.code not in (0, None) else 0
    try:
        return args.func(args)
    except (ConfigError, argparse.ArgumentTypeError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except (ParseError, TooFewNodesError, DegenerateAnchorsError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_DATA
    except (DivergedOptimizationError, RuntimeError, FloatingPointError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
