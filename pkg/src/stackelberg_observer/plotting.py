"""PNG figures for trajectories and the cost-gap decay.

Figures are drawn on an Agg canvas without pyplot, and saved without
metadata, so the same data always produces the same bytes.
"""

from __future__ import annotations

import numpy as np
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure

from .costs import DecayProfile
from .simulation import Trajectory

DPI = 100
SIZE = (6.4, 4.0)


def _save(fig: Figure, path):
    FigureCanvasAgg(fig)
    fig.savefig(path, format="png", dpi=DPI, metadata={"Software": None})


def _series(ax, k, values, label):
    for i in range(values.shape[1]):
        ax.plot(k, values[:, i], linewidth=1.2, label=f"{label}_{i + 1}")
    ax.axhline(0.0, color="0.6", linewidth=0.6)
    ax.set_xlabel("k")
    ax.grid(True, linewidth=0.3)
    ax.legend(fontsize="small", ncol=2)


def plot_error_trajectory(traj: Trajectory, path):
    """Components of the stacked estimation error ``[xtilde1; xtilde2]``."""
    fig = Figure(figsize=SIZE)
    ax = fig.add_subplot()
    _series(ax, traj.k, traj.xtilde, "xtilde")
    ax.set_title("estimation error")
    fig.tight_layout()
    _save(fig, path)


def plot_state_trajectory(traj: Trajectory, path):
    fig = Figure(figsize=SIZE)
    ax = fig.add_subplot()
    _series(ax, traj.k, traj.x, "x")
    ax.set_title("plant state")
    fig.tight_layout()
    _save(fig, path)


def plot_decay(profile: DecayProfile, path):
    """``|dJ_i(N)|`` against the geometric envelope, log scale; exact zeros are dropped."""
    fig = Figure(figsize=SIZE)
    ax = fig.add_subplot()
    N = np.asarray(profile.N_values)
    for i, (d, b) in enumerate(
        ((profile.delta_J1_at_N, profile.bound_1), (profile.delta_J2_at_N, profile.bound_2)), start=1
    ):
        d = np.abs(np.asarray(d))
        keep = d > 0
        if np.any(keep):
            ax.semilogy(N[keep], d[keep], linewidth=1.2, label=f"|dJ{i}(N)|")
        b = np.asarray(b)
        keep = b > 0
        if np.any(keep):
            ax.semilogy(N[keep], b[keep], linestyle="--", linewidth=0.9, label=f"bound {i}")
    ax.set_xlabel("N")
    ax.set_title(f"tail cost gap, lambda_hat = {profile.lambda_hat:.4f}")
    ax.grid(True, which="both", linewidth=0.3)
    if ax.get_legend_handles_labels()[0]:
        ax.legend(fontsize="small")
    fig.tight_layout()
    _save(fig, path)
