"""Figures written next to the CSV outputs of a run.  Uses the Agg backend only."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def _finish(fig, path: Path) -> Path:
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def cluster_figure(profile, path, title: str = "") -> Path:
    """|w| along the ray, one curve per strip height plus the sigma -> 0 profile."""
    fig, ax = plt.subplots(figsize=(5.0, 3.4))
    for s, prof in zip(profile.sigmas, profile.abs_w_sigma):
        ax.semilogy(profile.t, np.maximum(prof, 1e-300), lw=1, alpha=0.6, label=f"sigma={s:.3g}")
    ax.semilogy(profile.t, np.maximum(profile.abs_w, 1e-300), "k.-", label="sigma -> 0")
    ax.axhline(profile.tol, color="r", ls=":", lw=1)
    ax.set_xlabel("t")
    ax.set_ylabel("|w_q(t e)|")
    ax.set_title(title or f"fitted rate {profile.fitted_rate:.3g}", fontsize=9)
    ax.legend(fontsize=7)
    return _finish(fig, Path(path))


def ladder_figure(rows, path, xlabel: str, ylabel: str, title: str = "", loglog: bool = True) -> Path:
    """rows: sequence of (x, y1, y2, ...) tuples; one curve per y column."""
    data = np.asarray(rows, dtype=float)
    fig, ax = plt.subplots(figsize=(5.0, 3.4))
    plot = ax.loglog if loglog else ax.plot
    for j in range(1, data.shape[1]):
        plot(data[:, 0], np.abs(data[:, j]), "o-", label=f"column {j}")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.set_title(title, fontsize=9)
    if data.shape[1] > 2:
        ax.legend(fontsize=7)
    return _finish(fig, Path(path))
