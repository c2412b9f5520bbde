"""PNG figures written next to the CSV exports (Agg backend, no display)."""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .io import central_slice  # noqa: E402

STYLE = {
    "font.size": 9,
    "axes.labelsize": 9,
    "axes.titlesize": 9,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "figure.dpi": 100,
    "savefig.dpi": 120,
    "axes.spines.top": False,
    "axes.spines.right": False,
}
# PNG metadata would otherwise record the matplotlib version
_META = {"Software": None}


def _save(fig, path) -> Path:
    path = Path(path)
    fig.savefig(path, metadata=_META)
    plt.close(fig)
    return path


def slice_figure(path, fld, ellipse_axes=None, title: str | None = None) -> Path:
    """Heat map of the central slice with the coincidence set outlined.

    ``ellipse_axes`` (two semi-axes in the plotted plane) adds the reference
    ellipse as a dashed curve.
    """
    x, y, u = central_slice(fld)
    m = fld.spec.points_per_axis
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(4.2, 3.6))
        if fld.spec.dim == 1:
            ax.plot(x, u, lw=1.2, color="k")
            ax.set_xlabel("x")
            ax.set_ylabel("u")
        else:
            X, Y, U = x.reshape(m, m), y.reshape(m, m), u.reshape(m, m)
            pc = ax.pcolormesh(X, Y, U, shading="auto", cmap="viridis")
            fig.colorbar(pc, ax=ax, label="u")
            h = fld.spec.h
            ax.contour(X, Y, U, levels=[0.25 * h * h], colors="w", linewidths=0.8)
            if ellipse_axes is not None:
                t = np.linspace(0.0, 2 * np.pi, 241)
                ax.plot(ellipse_axes[0] * np.cos(t), ellipse_axes[1] * np.sin(t), "r--", lw=0.8)
            ax.set_aspect("equal")
            ax.set_xlabel("x")
            ax.set_ylabel("y")
        if title:
            ax.set_title(title)
        fig.tight_layout()
        return _save(fig, path)


def convergence_figure(path, spacings, errors, label: str = "max error") -> Path:
    h = np.asarray(spacings, dtype=float)
    e = np.asarray(errors, dtype=float)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(3.8, 3.0))
        ax.loglog(h, e, "o-", color="k", lw=1.0, label=label)
        ref = e[-1] * (h / h[-1]) ** 2
        ax.loglog(h, ref, ":", color="0.5", lw=1.0, label="slope 2")
        ax.set_xlabel("h")
        ax.set_ylabel("error")
        ax.legend(frameon=False)
        fig.tight_layout()
        return _save(fig, path)


def epsilon_trace_figure(path, trace, x0) -> Path:
    """Distance of each level's fixed point from the extrapolated centre."""
    eps = np.array([e for e, _ in trace])
    dist = np.array([np.linalg.norm(np.asarray(x) - x0) for _, x in trace])
    dist = np.maximum(dist, 1e-17)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(3.8, 3.0))
        ax.loglog(eps, dist, "s-", color="k", lw=1.0, ms=3)
        ax.set_xlabel("eps")
        ax.set_ylabel("|x_eps - x0|")
        fig.tight_layout()
        return _save(fig, path)
