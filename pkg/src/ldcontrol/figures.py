"""Matplotlib figures for runs: front diagrams, control histories, profiles.

The non-interactive Agg backend is selected on import so that figures can be
rendered in batch jobs without a display.
"""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "ldcontrol"
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .bvfun import PiecewiseConstFn  # noqa: E402
from .tracker import FrontSolution  # noqa: E402


def _save(fig, path, formats) -> list[Path]:
    out = []
    base = Path(path)
    for ext in formats:
        p = base.with_suffix("." + ext)
        # fixed metadata keeps repeated runs byte-identical
        meta = {"Date": None} if ext == "svg" else {"Software": None}
        fig.savefig(p, format=ext, metadata=meta)
        out.append(p)
    plt.close(fig)
    return out


def _step_xy(f: PiecewiseConstFn, comp: int) -> tuple[np.ndarray, np.ndarray]:
    e = f.edges
    return np.repeat(e, 2)[1:-1], np.repeat(f.values[:, comp], 2)


def front_diagram(sol: FrontSolution, path, formats=("png",), title: str = "") -> list[Path]:
    """x-t diagram of all segments; colour by family, non-physical dashed."""
    fig, ax = plt.subplots(figsize=(6, 4.5))
    cmap = plt.get_cmap("tab10")
    for s in sol.segments:
        if s.kind == "physical":
            ax.plot([s.x0, s.x1], [s.t0, s.t1], color=cmap(s.family % 10), lw=0.8)
        else:
            ax.plot([s.x0, s.x1], [s.t0, s.t1], color="0.4", lw=0.6, ls="--")
    for g in range(len(sol.sys.groups)):
        ax.plot([], [], color=cmap(g % 10), label=f"family group {g + 1}")
    ax.plot([], [], color="0.4", ls="--", label="non-physical")
    ax.set_xlim(*sol.x_range)
    ax.set_ylim(*sol.t_range)
    ax.set_xlabel("x")
    ax.set_ylabel("t")
    ax.set_title(title or f"{sol.sys.name}: {len(sol.segments)} segments")
    ax.legend(loc="upper right", fontsize=7)
    return _save(fig, path, formats)


def pcf_plot(funcs: dict[str, PiecewiseConstFn], path, formats=("png",), xlabel: str = "x",
             title: str = "") -> list[Path]:
    """Step plots of several piecewise constant functions, one panel per component."""
    dim = max(f.dim for f in funcs.values())
    fig, axes = plt.subplots(dim, 1, figsize=(6, 1.8 * dim + 0.8), sharex=True, squeeze=False)
    for j, ax in enumerate(axes[:, 0]):
        for label, f in funcs.items():
            if j < f.dim:
                ax.plot(*_step_xy(f, j), lw=1.0, label=label)
        ax.set_ylabel(f"component {j + 1}")
        ax.legend(loc="best", fontsize=7)
    axes[-1, 0].set_xlabel(xlabel)
    if title:
        axes[0, 0].set_title(title)
    fig.tight_layout()
    return _save(fig, path, formats)


def profile_plot(times, series: dict[str, np.ndarray], path, formats=("png",),
                 title: str = "") -> list[Path]:
    """Scalar diagnostics (total variation, increments) against time."""
    fig, ax = plt.subplots(figsize=(6, 3.5))
    for label, y in series.items():
        ax.plot(times[: len(y)], y, marker=".", lw=1.0, label=label)
    ax.set_xlabel("t")
    ax.legend(loc="best", fontsize=7)
    if title:
        ax.set_title(title)
    fig.tight_layout()
    return _save(fig, path, formats)
