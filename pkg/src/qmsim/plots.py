"""Matplotlib figure builders for the CLI report path.

Each builder takes the already-computed data arrays and returns a Figure;
the CLI renders them to PNG next to the delimited output files. Figures
carry fixed metadata so repeated runs produce identical bytes.
"""
from __future__ import annotations

import io
from typing import Mapping, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .dipole import EnsembleStats

_DPI = 150
PNG_METADATA = {"Software": "qmsim"}


def render_png(fig: "plt.Figure") -> bytes:
    buf = io.BytesIO()
    fig.savefig(buf, format="png", dpi=_DPI, metadata=PNG_METADATA)
    plt.close(fig)
    return buf.getvalue()


def fig_reflectivity_vs_sigma(stats: Sequence[EnsembleStats]) -> "plt.Figure":
    fig, ax = plt.subplots(figsize=(5.2, 3.6))
    sigmas = [s.sigma for s in stats]
    means = [s.mean_abs for s in stats]
    errs = [s.se for s in stats]
    ax.errorbar(sigmas, means, yerr=errs, marker="o", capsize=3)
    ax.set_xlabel(r"positional disorder $\sigma$ (units of $a$)")
    ax.set_ylabel(r"mean $|r|$")
    ax.set_title("Reflectivity vs positional disorder")
    ax.grid(alpha=0.3)
    fig.tight_layout()
    return fig


def fig_convergence(stats: EnsembleStats) -> "plt.Figure":
    n = np.arange(1, stats.runs + 1)
    fig, axes = plt.subplots(2, 2, figsize=(8.0, 5.6))
    ax = axes[0, 0]
    ax.loglog(n, np.where(stats.running_se > 0, stats.running_se, np.nan))
    ax.set_xlabel("runs N")
    ax.set_ylabel(r"sd / $\sqrt{N}$")
    ax.set_title("standard error")
    ax = axes[0, 1]
    ax.plot(n, stats.running_mean)
    ax.set_xlabel("runs N")
    ax.set_ylabel(r"mean $|r|$")
    ax.set_title("running mean")
    ax = axes[1, 0]
    ax.plot(n, stats.abs_values, ".", markersize=2.5)
    ax.set_xlabel("run index")
    ax.set_ylabel(r"$|r|$")
    ax.set_title("per-run reflection")
    ax = axes[1, 1]
    ax.plot(n, stats.running_sd)
    ax.set_xlabel("runs N")
    ax.set_ylabel("sd")
    ax.set_title("running standard deviation")
    for a in axes.ravel():
        a.grid(alpha=0.3)
    fig.suptitle(rf"Convergence at $\sigma = {stats.sigma:g}a$ ({stats.runs} runs)")
    fig.tight_layout()
    return fig


def fig_field_map(xs: np.ndarray, zs: np.ndarray, field: np.ndarray) -> "plt.Figure":
    mag = np.linalg.norm(np.nan_to_num(field), axis=2)
    re_x = np.real(field[:, :, 0])
    fig, axes = plt.subplots(1, 2, figsize=(9.0, 3.8), sharey=True)
    for ax, data, label in ((axes[0], mag.T, r"$|E|$"), (axes[1], re_x.T, r"Re $E_x$")):
        im = ax.pcolormesh(xs, zs, data, shading="auto", cmap="RdBu_r")
        ax.set_xlabel(r"x ($\lambda$)")
        ax.set_title(label)
        fig.colorbar(im, ax=ax)
    axes[0].set_ylabel(r"z ($\lambda$)")
    fig.suptitle("Total field in the x-z plane (beam incident from z < 0)")
    fig.tight_layout()
    return fig


def fig_plane_scan(zs: Sequence[float], magnitudes: Sequence[float]) -> "plt.Figure":
    fig, ax = plt.subplots(figsize=(5.2, 3.6))
    ax.plot(zs, magnitudes, marker="o")
    ax.set_xlabel(r"overlap plane z ($\lambda$)")
    ax.set_ylabel(r"$|r|$")
    ax.set_title("Reflection overlap vs upstream distance")
    ax.grid(alpha=0.3)
    fig.tight_layout()
    return fig


def fig_tree_fidelity(
    r_values: Sequence[float],
    closed_form: Sequence[float],
    simulated: Sequence[float],
) -> "plt.Figure":
    fig, ax = plt.subplots(figsize=(5.2, 3.6))
    ax.plot(r_values, closed_form, marker="o", label="closed form")
    ax.plot(r_values, simulated, marker="s", label="gate-level simulation")
    ax.set_xlabel("reflection coefficient r")
    ax.set_ylabel("tree fidelity")
    ax.set_title("Seven-qubit tree fidelity")
    ax.legend()
    ax.grid(alpha=0.3)
    fig.tight_layout()
    return fig


def fig_2d_scaling(
    n_photons: Sequence[int],
    curves: Mapping[str, Sequence[float]],
) -> "plt.Figure":
    fig, ax = plt.subplots(figsize=(5.2, 3.6))
    for label, vals in curves.items():
        ax.semilogy(n_photons, vals, label=label)
    ax.set_xlabel("photon count n")
    ax.set_ylabel("cluster fidelity")
    ax.set_title("2D cluster fidelity vs size")
    ax.legend()
    ax.grid(alpha=0.3, which="both")
    fig.tight_layout()
    return fig


def fig_blockade(curves: Mapping[str, tuple[Sequence[float], Sequence[float]]]) -> "plt.Figure":
    fig, ax = plt.subplots(figsize=(5.2, 3.6))
    for label, (s_vals, fids) in curves.items():
        ax.plot(s_vals, fids, marker="o", markersize=3, label=label)
    ax.set_xlabel(r"path separation s (units of $R_c$)")
    ax.set_ylabel("tree fidelity")
    ax.set_title("Tree fidelity vs optical-path separation")
    ax.legend()
    ax.grid(alpha=0.3)
    fig.tight_layout()
    return fig


def fig_verify_report(report: Mapping[str, float]) -> "plt.Figure":
    keys = list(report.keys())
    vals = [report[k] for k in keys]
    fig, ax = plt.subplots(figsize=(max(4.0, 0.5 * len(keys) + 2.0), 3.4))
    ax.bar(range(len(keys)), vals)
    ax.axhline(1.0, color="k", linestyle=":", linewidth=1)
    ax.set_xticks(range(len(keys)))
    ax.set_xticklabels(keys, rotation=45, ha="right")
    ax.set_ylabel("stabilizer expectation")
    ax.set_ylim(min(0.0, min(vals)) - 0.05, 1.1)
    ax.set_title("Stabilizer verification")
    fig.tight_layout()
    return fig
