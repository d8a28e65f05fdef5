"""Figure rendering for iteration traces (Agg backend, no global pyplot state)."""

from __future__ import annotations

import numpy as np
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure

COLORS = ("#0072B2", "#D55E00", "#009E73", "#CC79A7", "#E69F00")


def _finite_positive(x, y):
    keep = np.isfinite(y) & (y > 0)
    return x[keep], y[keep]


def _style(ax):
    for side in ("top", "right"):
        ax.spines[side].set_visible(False)
    ax.grid(True, which="major", alpha=0.3)


def plot_trace(trace, path, title=None, certified_gamma=None):
    """
    Relative squared error and consensus residual versus iteration.

    When `certified_gamma` is given the bound ``e_0 * gamma^i`` is overlaid.
    """
    fig = Figure(figsize=(9, 3.6))
    FigureCanvasAgg(fig)
    ax_err, ax_cons = fig.subplots(1, 2)
    iters = np.array([r.iter for r in trace.records], dtype=float)

    x, y = _finite_positive(iters, trace.column("rel_sq_error"))
    if y.size:
        ax_err.semilogy(x, y, color=COLORS[0], lw=1.8, label=trace.form)
        if certified_gamma is not None:
            bound = y[0] * certified_gamma ** (x - x[0])
            ax_err.semilogy(x, bound, color=COLORS[1], lw=1.0, ls="--", label=r"certified $\gamma^i$")
        ax_err.legend(frameon=False)
    ax_err.set_xlabel("iteration")
    ax_err.set_ylabel(r"$\sum_k \|w_{k,i}-w^\star\|^2 / \|w^\star\|^2$")
    _style(ax_err)

    x, y = _finite_positive(iters, trace.column("consensus_residual"))
    if y.size:
        ax_cons.semilogy(x, y, color=COLORS[2], lw=1.8)
    ax_cons.set_xlabel("iteration")
    ax_cons.set_ylabel(r"$\|BW_i\|_F$")
    _style(ax_cons)

    if title:
        fig.suptitle(title)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    return path


def plot_comparison(traces, path, column="rel_sq_error"):
    """Overlay one column of several traces (one line per solver form)."""
    fig = Figure(figsize=(5.5, 3.8))
    FigureCanvasAgg(fig)
    ax = fig.subplots()
    for color, (label, trace) in zip(COLORS * 4, traces.items()):
        iters = np.array([r.iter for r in trace.records], dtype=float)
        x, y = _finite_positive(iters, trace.column(column))
        if y.size:
            ax.semilogy(x, y, color=color, lw=1.5, label=label)
    ax.set_xlabel("iteration")
    ax.set_ylabel(column.replace("_", " "))
    ax.legend(frameon=False)
    _style(ax)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    return path
