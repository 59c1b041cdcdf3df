"""Static figures: confidence curves, marginal frequency overlays, scatter plots.

Figures are rendered off-screen with the Agg backend and written to a file
whose suffix (``.svg``, ``.png``, ``.pdf``) selects the format.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from . import marginals as mg  # noqa: E402

__all__ = ["plot_confidence_curve", "plot_marginal_overlay", "plot_scatter"]

# deterministic SVG output: no random ids, no timestamp
plt.rcParams["svg.hashsalt"] = "adjpair"
plt.rcParams["font.size"] = 9


def _save(fig, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    meta = {"Date": None} if path.suffix.lower() in (".svg", ".pdf") else {}
    fig.savefig(path, metadata=meta, bbox_inches="tight")
    plt.close(fig)
    return path


def plot_confidence_curve(curve, path, levels=(0.90, 0.95), xlabel=None):
    """Plot ``cc`` against the grid with horizontal level rules and interval whiskers."""
    fig, ax = plt.subplots(figsize=(5.0, 3.5))
    ok = np.isfinite(curve.cc)
    ax.plot(curve.grid[ok], curve.cc[ok], color="k", lw=1.4)
    lo_x, hi_x = curve.grid[0], curve.grid[-1]
    for k, level in enumerate(levels):
        ax.axhline(level, color="0.5", lw=0.8, ls="--")
        lo, hi = curve.interval(level)
        lo_p, hi_p = max(lo, lo_x), min(hi, hi_x)
        ax.plot([lo_p, hi_p], [level, level], color=f"C{k}", lw=2.5, solid_capstyle="butt",
                label=f"{level:.0%}: [{lo:.3f}, {hi:.3f}]")
        for end in (lo_p, hi_p):
            ax.plot([end, end], [level - 0.02, level + 0.02], color=f"C{k}", lw=1.5)
    ax.axvline(curve.point_estimate, color="0.7", lw=0.8)
    ax.set_xlim(lo_x, hi_x)
    ax.set_ylim(0.0, 1.02)
    ax.set_xlabel(xlabel or curve.param_name)
    ax.set_ylabel("confidence")
    ax.legend(frameon=False, loc="lower left")
    ax.spines["right"].set_visible(False)
    ax.spines["top"].set_visible(False)
    return _save(fig, path)


def plot_marginal_overlay(values, marginal, path, cap=None, label="x"):
    """Observed relative frequencies against the fitted marginal pmf."""
    values = np.asarray(values)
    top = int(values.max()) if cap is None else int(cap)
    ks = np.arange(top + 1)
    freq = np.bincount(np.minimum(values, top), minlength=top + 1) / values.size
    probs = mg.pmf_or_pdf(marginal, ks[:-1].astype(float))
    probs = np.append(probs, mg.sf(marginal, float(top - 1)))
    fig, ax = plt.subplots(figsize=(4.5, 3.2))
    ax.bar(ks - 0.18, freq, width=0.36, color="0.6", label="observed")
    ax.bar(ks + 0.18, probs, width=0.36, color="C0", label=str(marginal))
    ax.set_xticks(ks)
    if cap is not None:
        ax.set_xticklabels([str(k) for k in ks[:-1]] + [f"{top}+"])
    ax.set_xlabel(label)
    ax.set_ylabel("relative frequency")
    ax.legend(frameon=False)
    return _save(fig, path)


def plot_scatter(x, y, path, xlabel="x", ylabel="y"):
    fig, ax = plt.subplots(figsize=(3.8, 3.8))
    ax.scatter(x, y, s=14, color="k")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    return _save(fig, path)
