"""Matplotlib renderings of the delimited report outputs.

Every report path (training log, evaluation, benchmark) writes its figures
next to the CSV/JSON data via these helpers. Agg backend only; nothing here
opens a window.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def render_training_curves(log_rows: list, path) -> None:
    """Two panels: average occupied RBs and violation fractions over training."""
    if not log_rows:
        return
    iters = [r["iter"] for r in log_rows]
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.2))
    ax1.plot(iters, [r["avg_rbs"] for r in log_rows], lw=1.2)
    ax1.set_xlabel("iteration")
    ax1.set_ylabel("avg occupied RBs")
    ax1.grid(alpha=0.3)
    viol = np.array([[r["viol_L"], r["viol_S"]] for r in log_rows])
    floor = 1e-6  # log-scale display floor for exact zeros
    ax2.semilogy(iters, np.maximum(viol[:, 0], floor), lw=1.2, label="LBT")
    ax2.semilogy(iters, np.maximum(viol[:, 1], floor), lw=1.2, label="SBT")
    ax2.set_xlabel("iteration")
    ax2.set_ylabel("violation fraction")
    ax2.legend()
    ax2.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_gap_cdf(gap_l: np.ndarray, gap_s: np.ndarray, path) -> None:
    """Empirical CDFs of the exact QoS gaps (negative = over-satisfied)."""
    fig, axes = plt.subplots(1, 2, figsize=(9, 3.2))
    for ax, gaps, label in ((axes[0], gap_l, "LBT gap"), (axes[1], gap_s, "SBT gap")):
        x = np.sort(np.asarray(gaps).ravel())
        y = np.arange(1, x.size + 1) / x.size
        ax.plot(x, y, lw=1.2)
        ax.axvline(0.0, color="k", ls="--", lw=0.8)
        ax.set_xlabel(f"{label} (nats/s)")
        ax.set_ylabel("CDF")
        ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_bench(rows: list, path) -> None:
    """Runtime curves: per-method time vs F (log scale) and vs the LBT rate."""
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.2))
    methods = sorted({r["method"] for r in rows})
    for method in methods:
        fr = [(r["value"], r["mean_seconds"]) for r in rows
              if r["method"] == method and r["sweep"] == "F"]
        if fr:
            fr.sort()
            ax1.semilogy([v for v, _ in fr], [t for _, t in fr], marker="o", label=method)
        rr = [(r["value"], r["mean_seconds"]) for r in rows
              if r["method"] == method and r["sweep"] == "RL"]
        if rr:
            rr.sort()
            ax2.semilogy([v for v, _ in rr], [t for _, t in rr], marker="o", label=method)
    ax1.set_xlabel("number of RBs F")
    ax1.set_ylabel("mean wall time (s)")
    ax1.legend()
    ax1.grid(alpha=0.3)
    ax2.set_xlabel("LBT rate requirement (Mbps)")
    ax2.set_ylabel("mean wall time (s)")
    ax2.legend()
    ax2.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
