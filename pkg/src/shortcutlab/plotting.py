"""Figure rendering for the report paths, matching the CSV artifacts.

Everything draws to files through the Agg backend; no interactive
windows. Each saver takes the in-memory report object, not the CSV, so
figures and tables always come from the same numbers.
"""

from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np


def save_spectrum_figure(report, path, title=None) -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    ev = np.asarray(report.eigenvalues)
    ax.plot(np.arange(ev.size), ev, ".", markersize=3)
    ax.axhline(0.0, color="gray", linewidth=0.8)
    ax.set_xlabel("eigenvalue rank")
    ax.set_ylabel("eigenvalue")
    cond = "inf" if math.isinf(report.cond_proxy) else f"{report.cond_proxy:.4g}"
    ax.set_title(title or f"cond proxy {cond}, index {report.index:.3f}")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_trace_figure(trace, path, title=None) -> None:
    fig, axes = plt.subplots(1, 3, figsize=(11, 3.2))
    axes[0].plot(trace.epochs, trace.losses)
    axes[0].set_yscale("log")
    axes[0].set_xlabel("epoch")
    axes[0].set_ylabel("loss")
    axes[1].plot(trace.epochs, trace.grad_norms)
    axes[1].set_yscale("log")
    axes[1].set_xlabel("epoch")
    axes[1].set_ylabel("gradient norm")
    axes[2].plot(trace.epochs, trace.avg_frobenius)
    axes[2].set_xlabel("epoch")
    axes[2].set_ylabel("avg weight Frobenius norm")
    if title:
        fig.suptitle(title)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_sweep_figures(result, loss_path, cond_path) -> None:
    schemes = sorted({s.scheme for s in result.summaries})
    fig, ax = plt.subplots(figsize=(6, 4))
    for scheme in schemes:
        pts = sorted((s.depth, s.mean_final_loss, s.std_final_loss)
                     for s in result.summaries if s.scheme == scheme)
        depths = [p[0] for p in pts]
        means = [p[1] for p in pts]
        stds = [p[2] for p in pts]
        ax.errorbar(depths, means, yerr=stds, marker="o", capsize=3, label=scheme)
    ax.set_yscale("log")
    ax.set_xlabel("depth")
    ax.set_ylabel("final loss at optimal lr")
    ax.legend()
    fig.tight_layout()
    fig.savefig(loss_path, dpi=150)
    plt.close(fig)

    fig, ax = plt.subplots(figsize=(6, 4))
    for scheme in schemes:
        pts = sorted((s.depth, s.mean_init_cond_proxy)
                     for s in result.summaries if s.scheme == scheme)
        ax.plot([p[0] for p in pts], [p[1] for p in pts], marker="o", label=scheme)
    ax.set_yscale("log")
    ax.set_xlabel("depth")
    ax.set_ylabel("initial cond proxy")
    ax.legend()
    fig.tight_layout()
    fig.savefig(cond_path, dpi=150)
    plt.close(fig)


def save_probe_figure(eps, deltas_by_direction, slopes, path) -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    for k, deltas in enumerate(deltas_by_direction):
        ax.loglog(eps, deltas, marker=".", label=f"direction {k} (slope {slopes[k]:.2f})")
    ax.set_xlabel("perturbation size")
    ax.set_ylabel("|loss change|")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_construction_figure(record, path) -> None:
    from .linalg import frobenius_norm

    norms = [frobenius_norm(unit[0]) for unit in record.network.weights]
    bound = math.sqrt(8.0 * record.delta) / record.rho
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(np.arange(1, len(norms) + 1), norms, marker=".", linestyle="")
    ax.axhline(bound, color="red", linewidth=0.8, label="norm bound")
    ax.set_xlabel("residual unit")
    ax.set_ylabel("first-matrix Frobenius norm")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
