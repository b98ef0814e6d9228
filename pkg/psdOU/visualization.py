"""
Static figures for simulated paths and stationary draws. Figures are only
written to files.
"""

from pathlib import Path
from typing import Optional, Union

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .simulation import OUPath
from .symcore import vech, vech_labels


def plot_path(path: OUPath, save_path: Union[str, Path], title: Optional[str] = None) -> Path:
    """
    Draws the vech components of a path (top) and its minimum eigenvalue
    (bottom), marking jump times.
    """
    labels = vech_labels(path.dim)
    values = path.vech_states()
    fig, (ax_top, ax_bot) = plt.subplots(2, 1, figsize=(10, 6), sharex=True)
    for k, label in enumerate(labels):
        ax_top.step(path.times, values[:, k], where="post", linewidth=1, label=label)
    for jump in path.jumps:
        ax_top.axvline(jump.time, color="lightgray", linewidth=0.5, zorder=0)
    ax_top.set_ylabel("state entries")
    ax_top.legend(loc="upper right", ncol=min(len(labels), 6), fontsize="small")
    ax_top.set_title(title or f"psOU path (d={path.dim}, {path.scheme} scheme)")

    ax_bot.step(path.times, path.min_eigenvalues(), where="post", color="darkred", linewidth=1)
    ax_bot.axhline(0.0, color="gray", linestyle="--", linewidth=1)
    ax_bot.set_xlabel("time")
    ax_bot.set_ylabel("min eigenvalue")

    plt.tight_layout()
    save_path = Path(save_path)
    save_path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(save_path)
    plt.close(fig)
    return save_path


def plot_draws(draws: np.ndarray, save_path: Union[str, Path], bins: int = 50) -> Path:
    """Histograms of every vech component of a stack of stationary draws."""
    draws = np.asarray(draws, dtype=float)
    d = draws.shape[1]
    labels = vech_labels(d)
    values = np.array([vech(m) for m in draws]).reshape(draws.shape[0], len(labels))
    fig, axes = plt.subplots(1, len(labels), figsize=(3 * len(labels), 3), squeeze=False)
    for k, (ax, label) in enumerate(zip(axes[0], labels)):
        ax.hist(values[:, k], bins=bins, color="skyblue", edgecolor="black", linewidth=0.3)
        ax.set_title(label)
    plt.tight_layout()
    save_path = Path(save_path)
    save_path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(save_path)
    plt.close(fig)
    return save_path
