"""Rendered figures accompanying the delimited outputs: per-trial training
curves, sweep curves with error bars, and cross-dataset comparison bars."""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .errors import InputError
from .reports import config_label


def plot_loss_curves(report: dict, path):
    """One line of total training loss per trial of an aggregate report."""
    trials = report.get("trials", [])
    if not trials:
        raise InputError("report has no trials to plot")
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    for trial in trials:
        ax.plot(trial["epoch_total"], linewidth=1.0,
                label=f"seed {trial['seed']}")
    ax.set_xlabel("epoch")
    ax.set_ylabel("training loss")
    ax.set_title(config_label(report["config"]))
    if len(trials) <= 10:
        ax.legend(fontsize="small")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def plot_sweep(axis: str, rows, path):
    """Mean test F1 (percent) with std error bars across swept values."""
    if not rows:
        raise InputError("sweep has no rows to plot")
    values = np.array([v for v, _ in rows], dtype=float)
    means = np.array([agg.f1_mean for _, agg in rows], dtype=float) * 100.0
    stds = np.array([agg.f1_std for _, agg in rows], dtype=float) * 100.0
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    ax.errorbar(values, means, yerr=stds, marker="o", capsize=3.0)
    ax.set_xlabel(axis)
    ax.set_ylabel("test F1 (%)")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def plot_comparison(reports, path):
    """Grouped bars, one group per dataset and one bar per config, heights
    in percent with std error bars."""
    if not reports:
        raise InputError("no reports to plot")
    labels = []
    datasets = []
    cells = {}
    for rep in reports:
        label = config_label(rep["config"])
        dataset = rep["config"].get("dataset") or "unnamed"
        if label not in labels:
            labels.append(label)
        if dataset not in datasets:
            datasets.append(dataset)
        cells[(label, dataset)] = (100.0 * rep["f1_mean"], 100.0 * rep["f1_std"])

    x = np.arange(len(datasets), dtype=float)
    width = 0.8 / len(labels)
    fig, ax = plt.subplots(figsize=(7.2, 4.2))
    for i, label in enumerate(labels):
        offs = x + (i - (len(labels) - 1) / 2.0) * width
        heights = [cells.get((label, d), (np.nan, 0.0))[0] for d in datasets]
        errors = [cells.get((label, d), (np.nan, 0.0))[1] for d in datasets]
        ax.bar(offs, heights, width=width, yerr=errors, capsize=3.0, label=label)
    ax.set_xticks(x)
    ax.set_xticklabels(datasets)
    ax.set_ylabel("test F1 (%)")
    ax.legend(fontsize="small")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
