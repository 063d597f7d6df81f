"""Matplotlib rendering of sweep curves and reports, saved next to the CSVs."""

from __future__ import annotations

from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np


def plot_threshold_curves(curves, path, title: str = "") -> None:
    """Schedulability probability versus utilization, one line per curve."""
    fig, ax = plt.subplots(figsize=(6, 4))
    for curve in curves:
        label = getattr(curve, "generator", "")
        n = getattr(curve, "n", getattr(curve, "n_streams", None))
        ax.errorbar(
            curve.grid,
            curve.p_hat,
            yerr=[
                np.array(curve.p_hat) - np.array(curve.ci_lo),
                np.array(curve.ci_hi) - np.array(curve.p_hat),
            ],
            marker="o",
            markersize=3,
            capsize=2,
            label=f"n={n} ({label})" if label else f"n={n}",
        )
    ax.set_xlabel("utilization")
    ax.set_ylabel("fraction schedulable")
    ax.set_ylim(-0.02, 1.02)
    ax.axhline(0.5, color="gray", lw=0.5, ls="--")
    if title:
        ax.set_title(title)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_width_scaling(widths: Sequence[tuple[int, float]], slope: float, path) -> None:
    """Transition width versus task count on log-log axes with the fit line."""
    ns = np.array([n for n, _ in widths], dtype=float)
    ws = np.array([w for _, w in widths], dtype=float)
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.loglog(ns, ws, "o", label="measured width")
    coef = np.polyfit(np.log(ns), np.log(np.maximum(ws, 1e-12)), 1)
    ax.loglog(ns, np.exp(np.polyval(coef, np.log(ns))), "-",
              label=f"fit slope {slope:.2f}")
    ax.loglog(ns, ws[0] * (ns / ns[0]) ** -0.5, ":", color="gray",
              label="slope -1/2 reference")
    ax.set_xlabel("number of tasks")
    ax.set_ylabel("threshold interval width")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_energy_ladder(rows: Sequence[dict], path) -> None:
    """Energy and miss fraction versus load for each set point."""
    set_points = sorted({r["set_point"] for r in rows})
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 4))
    for sp in set_points:
        pts = sorted((r["load"], r) for r in rows if r["set_point"] == sp)
        loads = [l for l, _ in pts]
        ax1.plot(loads, [r["avg_power"] for _, r in pts], marker="o",
                 label=f"set point {sp}")
        ax2.plot(loads, [100 * r["miss_fraction"] for _, r in pts], marker="o",
                 label=f"set point {sp}")
    ax1.set_xlabel("load")
    ax1.set_ylabel("average power (model units)")
    ax2.set_xlabel("load")
    ax2.set_ylabel("deadline misses (%)")
    ax1.legend(fontsize=8)
    ax2.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
