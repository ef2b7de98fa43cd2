"""Matplotlib renderings written next to the delimited outputs."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def render_trace(path: str, traces: dict[str, tuple[np.ndarray, np.ndarray, np.ndarray]]):
    """Two-panel figure: distinguishability and Bloch components per method.

    `traces` maps a method label to (times, states, d) with states of shape
    (n+1, 6).
    """
    fig, (ax_d, ax_p) = plt.subplots(2, 1, figsize=(7.0, 6.0), sharex=True)
    for label, (ts, states, d) in traces.items():
        ax_d.plot(ts, d, label=label.upper())
        for col, name in ((0, "Px"), (1, "Py"), (2, "Pz")):
            ax_p.plot(ts, states[:, col], label=f"{name} ({label})", lw=0.9)
    ax_d.set_ylabel("D(t)")
    ax_d.legend(frameon=False, fontsize=8)
    ax_p.set_xlabel("t")
    ax_p.set_ylabel("Bloch components")
    ax_p.legend(frameon=False, fontsize=7, ncol=2)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_heatmap(path: str, values: np.ndarray, axis1_vals: np.ndarray,
                   axis2_vals: np.ndarray, axis1_name: str, axis2_name: str,
                   title: str):
    """imshow of the sweep grid (axis1 on rows, axis2 on columns)."""
    fig, ax = plt.subplots(figsize=(6.0, 5.0))
    img = ax.imshow(values, origin="lower", aspect="auto",
                    extent=(0, values.shape[1], 0, values.shape[0]))
    ticks2 = np.linspace(0.5, values.shape[1] - 0.5, min(6, values.shape[1]))
    ticks1 = np.linspace(0.5, values.shape[0] - 0.5, min(6, values.shape[0]))
    idx2 = np.clip(ticks2.astype(int), 0, values.shape[1] - 1)
    idx1 = np.clip(ticks1.astype(int), 0, values.shape[0] - 1)
    ax.set_xticks(ticks2, [f"{axis2_vals[i]:.3g}" for i in idx2])
    ax.set_yticks(ticks1, [f"{axis1_vals[i]:.3g}" for i in idx1])
    ax.set_xlabel(axis2_name)
    ax.set_ylabel(axis1_name)
    ax.set_title(title)
    fig.colorbar(img, ax=ax)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
