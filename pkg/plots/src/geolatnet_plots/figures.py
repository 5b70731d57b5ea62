"""Figure rendering for geolatnet run directories.

Reads only the fit pipeline's documented file formats (trace.csv, elbo.csv,
state.json, predictive.csv) and writes deterministic PNGs: repeated
invocations on the same inputs produce byte-identical files.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__all__ = ["FigureSpec", "PlotsError", "FIGURE_KINDS", "render"]

FIGURE_KINDS = ("trace", "convergence", "latent_map", "predictive_density")

# fixed display limit: at most this many equidistant samples per series
MAX_DISPLAY_POINTS = 2000

_STYLE = {
    "figure.dpi": 110,
    "savefig.dpi": 110,
    "font.size": 9,
    "axes.grid": True,
    "grid.alpha": 0.25,
}


class PlotsError(ValueError):
    """Missing, malformed, or too-short input series."""


@dataclass(frozen=True)
class FigureSpec:
    kind: str
    run_dir: Path
    out_path: Path
    burnin: int = 0
    thin: int = 1
    title: str | None = field(default=None)

    def __post_init__(self):
        if self.kind not in FIGURE_KINDS:
            raise PlotsError(f"unknown figure kind {self.kind!r}; expected one of {FIGURE_KINDS}")


def _read_csv(path: Path, required_prefix: tuple[str, ...]):
    if not path.exists():
        raise PlotsError(f"missing input file {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise PlotsError(f"{path}: empty file") from None
        if tuple(header[: len(required_prefix)]) != required_prefix:
            raise PlotsError(f"{path}: expected columns {required_prefix}, got {header}")
        rows = [row for row in reader if row]
    if not rows:
        raise PlotsError(f"{path}: no data rows")
    return header, rows


def _read_state(run_dir: Path) -> dict:
    path = run_dir / "state.json"
    if not path.exists():
        raise PlotsError(f"missing input file {path}")
    return json.loads(path.read_text(encoding="utf-8"))


def _equidistant(n: int, limit: int = MAX_DISPLAY_POINTS) -> np.ndarray:
    if n <= limit:
        return np.arange(n)
    return np.unique(np.linspace(0, n - 1, limit).round().astype(int))


def _apply_display_window(iters, burnin, thin):
    keep = iters > burnin
    idx = np.nonzero(keep)[0][::max(thin, 1)]
    if idx.size < 2:
        raise PlotsError(
            f"input series too short after burnin={burnin}, thin={thin}: {idx.size} points"
        )
    return idx


def _save(fig, out_path: Path):
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    # pinned metadata keeps repeated renders byte-identical
    fig.savefig(out_path, format="png", metadata={"Software": "geolatnet-plots"})
    plt.close(fig)


def _render_trace(spec: FigureSpec):
    _, rows = _read_csv(spec.run_dir / "trace.csv", ("iter", "alpha", "loglik"))
    iters = np.array([int(r[0]) for r in rows])
    alpha = np.array([float(r[1]) for r in rows])
    loglik = np.array([float(r[2]) for r in rows])
    idx = _apply_display_window(iters, spec.burnin, spec.thin)
    idx = idx[_equidistant(idx.size)]

    with plt.rc_context(_STYLE):
        fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.2))
        ax1.plot(iters[idx], loglik[idx], lw=0.6, color="#1f3b73")
        ax1.set_xlabel("iteration")
        ax1.set_ylabel("log-likelihood")
        ax2.plot(iters[idx], alpha[idx], lw=0.6, color="#8c2d2d")
        ax2.set_xlabel("iteration")
        ax2.set_ylabel("alpha")
        fig.suptitle(spec.title or "MCMC trace")
        fig.tight_layout()
        _save(fig, spec.out_path)


def _render_convergence(spec: FigureSpec):
    _, rows = _read_csv(
        spec.run_dir / "elbo.csv", ("iter", "elbo", "loglik", "m_tilde", "sigma_tilde")
    )
    it = np.array([int(r[0]) for r in rows])
    cols = np.array([[float(v) for v in r[1:5]] for r in rows])
    idx = _equidistant(it.size)

    with plt.rc_context(_STYLE):
        fig, axes = plt.subplots(2, 2, figsize=(9, 6))
        panels = [
            (axes[0, 0], cols[:, 2], "variational mean m"),
            (axes[0, 1], cols[:, 3], "variational sd sigma"),
            (axes[1, 0], cols[:, 0], "ELBO"),
            (axes[1, 1], cols[:, 1], "log-likelihood"),
        ]
        for ax, series, label in panels:
            ax.plot(it[idx], series[idx], lw=0.8, color="#1f3b73")
            ax.set_xlabel("iteration")
            ax.set_ylabel(label)
        fig.suptitle(spec.title or "BBVI convergence")
        fig.tight_layout()
        _save(fig, spec.out_path)


def _render_latent_map(spec: FigureSpec):
    state = _read_state(spec.run_dir)
    means = np.asarray(state.get("latent_mean"), dtype=float)
    if means.ndim != 2 or means.shape[0] < 1:
        raise PlotsError("state.json has no usable latent_mean")
    anchors = [i - 1 for i in state.get("anchors", [])]
    geometry = state.get("geometry")

    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots(figsize=(5.2, 5.2))
        circle = np.linspace(0, 2 * np.pi, 361)
        ax.plot(np.cos(circle), np.sin(circle), color="black", lw=1.0)
        if geometry == "hyperbolic":
            xy = means
            ax.set_title(spec.title or "latent positions (Poincare disk)")
        else:
            # orthographic projection viewed from the canonical pole (i1)
            xy = means[:, :2]
            front = means[:, 2] >= 0
            ax.scatter(
                xy[~front, 0], xy[~front, 1], s=18, facecolors="none",
                edgecolors="#999999", label="far hemisphere",
            )
            xy = np.where(front[:, None], xy, np.nan)
            ax.set_title(spec.title or "latent positions (orthographic)")
        ax.scatter(xy[:, 0], xy[:, 1], s=22, color="#1f3b73", zorder=3)
        for k, i in enumerate(anchors, start=1):
            if 0 <= i < means.shape[0]:
                ax.scatter(*means[i, :2], marker="*", s=120, color="#c23b22", zorder=4)
                ax.annotate(f"i{k}", means[i, :2], textcoords="offset points", xytext=(4, 4))
        for i in range(means.shape[0]):
            ax.annotate(str(i + 1), means[i, :2], textcoords="offset points",
                        xytext=(3, -7), fontsize=6, color="#555555")
        ax.set_aspect("equal")
        ax.set_xlim(-1.08, 1.08)
        ax.set_ylim(-1.08, 1.08)
        _save(fig, spec.out_path)


def _silverman_kde(x: np.ndarray, grid: np.ndarray) -> np.ndarray:
    """Gaussian kernel density with Silverman's rule-of-thumb bandwidth."""
    n = x.size
    sd = x.std(ddof=1) if n > 1 else 0.0
    q75, q25 = np.percentile(x, [75, 25])
    spread = min(sd, (q75 - q25) / 1.34) if (q75 > q25 and sd > 0) else max(sd, (q75 - q25) / 1.34)
    bw = 0.9 * spread * n ** (-0.2)
    bw = max(bw, 1e-4)
    u = (grid[:, None] - x[None, :]) / bw
    return np.exp(-0.5 * u * u).sum(axis=1) / (n * bw * np.sqrt(2 * np.pi))


def _render_predictive_density(spec: FigureSpec):
    _, rows = _read_csv(spec.run_dir / "predictive.csv", ("i", "j", "y", "mean_p"))
    y = np.array([int(r[2]) for r in rows])
    p = np.array([float(r[3]) for r in rows])
    if not (np.any(y == 0) and np.any(y == 1)):
        raise PlotsError("predictive.csv needs both linked and unlinked dyads")
    grid = np.linspace(0.0, 1.0, 512)

    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots(figsize=(5.6, 3.6))
        for label, mask, color in (("y = 1", y == 1, "black"), ("y = 0", y == 0, "#c23b22")):
            ax.plot(grid, _silverman_kde(p[mask], grid), color=color, lw=1.4, label=label)
        ax.set_xlabel("posterior predictive link probability")
        ax.set_ylabel("density")
        ax.legend()
        fig.suptitle(spec.title or "predictive probabilities by observed class")
        fig.tight_layout()
        _save(fig, spec.out_path)


_RENDERERS = {
    "trace": _render_trace,
    "convergence": _render_convergence,
    "latent_map": _render_latent_map,
    "predictive_density": _render_predictive_density,
}


def render(spec: FigureSpec) -> Path:
    """Render one figure kind from a run directory; returns the output path."""
    _RENDERERS[spec.kind](spec)
    return Path(spec.out_path)
