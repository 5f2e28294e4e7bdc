"""Static figures for experiment outputs (format taken from the file suffix)."""

from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .stats import LAWS  # noqa: E402


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return path


def plot_growth(ks, means, stderrs, law: str, path, label: str = "E[sup |h|]"):
    """Means with 2-SE bars and the best constant multiple of the law."""
    ks = np.asarray(ks, dtype=float)
    means = np.asarray(means, dtype=float)
    f = np.array([LAWS[law](k) for k in ks])
    c = float(np.dot(means, f) / np.dot(f, f))
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.errorbar(ks, means, yerr=2 * np.asarray(stderrs), fmt="o", label=label)
    kk = np.geomspace(ks.min(), ks.max(), 100)
    ax.plot(kk, [c * LAWS[law](k) for k in kk], "-", label=f"{c:.3f} * {law}")
    ax.set_xscale("log")
    ax.set_xlabel("k")
    ax.legend()
    return _save(fig, path)


def plot_profile(ys, rs, resonant, k: int, path):
    ys, rs = np.asarray(ys), np.asarray(rs)
    res = np.asarray(resonant, dtype=bool)
    fig, ax = plt.subplots(figsize=(6, 3.5))
    ax.semilogy(ys, np.maximum(rs, 1e-300), "-", lw=0.8, color="0.5")
    ax.semilogy(ys[res], np.maximum(rs[res], 1e-300), ".", ms=3, label="resonant")
    ax.axvline(k / (2 * math.pi), ls="--", lw=0.8, color="k")
    ax.set_ylim(bottom=max(1e-16, np.min(rs[rs > 0]) if np.any(rs > 0) else 1e-16))
    ax.set_xlabel("y")
    ax.set_ylabel(f"r_{k}(iy+x, iy+x)")
    ax.legend()
    return _save(fig, path)


def plot_argmax_hist(ys, k: int, path):
    fig, ax = plt.subplots(figsize=(5, 3.5))
    edges = np.geomspace(math.sqrt(3) / 2, 1.2 * k / (2 * math.pi), 25)
    ax.hist(ys, bins=edges)
    ax.set_xscale("log")
    for v in (k / (8 * math.pi), k / (4 * math.pi), k / (2 * math.pi)):
        ax.axvline(v, ls="--", lw=0.8, color="k")
    ax.set_xlabel("height of the grid argmax")
    return _save(fig, path)


def plot_lp(ps, analytic, empirical, stderrs, path):
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.plot(ps, analytic, "s-", label="closed form")
    ax.errorbar(ps, empirical, yerr=2 * np.asarray(stderrs), fmt="o", label="Monte Carlo")
    ax.set_xlabel("p")
    ax.legend()
    return _save(fig, path)
