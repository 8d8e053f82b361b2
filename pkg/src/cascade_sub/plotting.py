"""Figure rendering for the report path: every sweep/trajectory CSV gets a
companion PNG.  The CSV files are the contract; figures are for eyeballing."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def plot_populations(trajectories: dict[str, "Trajectory"], path):
    """<N_i> and <N_ph> vs time, one panel per labelled run."""
    fig, axes = plt.subplots(1, len(trajectories), figsize=(5 * len(trajectories), 3.4))
    if len(trajectories) == 1:
        axes = [axes]
    for ax, (label, tr) in zip(axes, trajectories.items()):
        ax.plot(tr.times, tr.n0, "r-", label=r"$\langle N_0\rangle$")
        ax.plot(tr.times, tr.n1, "b--", label=r"$\langle N_1\rangle$")
        ax.plot(tr.times, tr.n2, "g:", label=r"$\langle N_2\rangle$")
        ax.plot(tr.times, tr.nph, "k-.", label=r"$\langle N_{ph}\rangle$")
        ax.set_xlabel(r"$t$  [$1/g$]")
        ax.set_ylabel("occupation")
        ax.set_title(label)
        ax.legend(fontsize=8)
    return _save(fig, path)


def plot_probabilities(trajectories: dict[str, "Trajectory"], path):
    """Dark-state weights P_0, P_1 vs time."""
    fig, axes = plt.subplots(1, len(trajectories), figsize=(5 * len(trajectories), 3.4))
    if len(trajectories) == 1:
        axes = [axes]
    for ax, (label, tr) in zip(axes, trajectories.items()):
        ax.plot(tr.times, tr.p0, "b:", label=r"$P_0$")
        ax.plot(tr.times, tr.p1, "r-", label=r"$P_1$")
        ax.set_xlabel(r"$t$  [$1/g$]")
        ax.set_ylabel("probability")
        ax.set_ylim(-0.02, 1.02)
        ax.set_title(label)
        ax.legend(fontsize=8)
    return _save(fig, path)


def plot_sweep(columns: dict[str, tuple], path, ylabel: str, title: str = ""):
    """Generic eps-sweep plot: label -> (eps array, values array, style)."""
    fig, ax = plt.subplots(figsize=(5.2, 3.6))
    for label, (xs, ys, style) in columns.items():
        ax.plot(xs, ys, style, label=label)
    ax.set_xlabel(r"$\epsilon$")
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title)
    ax.legend(fontsize=8)
    return _save(fig, path)
