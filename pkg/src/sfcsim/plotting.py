"""Figure rendering from the delimited outputs.

Plots are always rebuilt from the written CSV files, not from in-memory
state, so `plot --in DIR` reproduces them for any finished run directory.
"""

import csv
import os
from collections import defaultdict

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def _read_metrics(path):
    by_seed = defaultdict(lambda: {"iteration": [], "aar": [], "anuc": []})
    with open(path) as handle:
        for row in csv.DictReader(handle):
            seed = row["seed"]
            by_seed[seed]["iteration"].append(int(row["iteration"]))
            by_seed[seed]["aar"].append(float(row["aar"]) if row["aar"] else np.nan)
            by_seed[seed]["anuc"].append(float(row["anuc"]) if row["anuc"] else np.nan)
    return by_seed


def _series_plot(by_seed, key, ylabel, out_path):
    fig, ax = plt.subplots(figsize=(7, 4.2))
    longest = 0
    for seed in sorted(by_seed):
        data = by_seed[seed]
        ax.plot(data["iteration"], data[key], alpha=0.25, linewidth=0.8)
        longest = max(longest, len(data[key]))
    if longest:
        stacked = np.full((len(by_seed), longest), np.nan)
        for i, seed in enumerate(sorted(by_seed)):
            vals = by_seed[seed][key]
            stacked[i, : len(vals)] = vals
        with np.errstate(invalid="ignore"):
            mean = np.nanmean(stacked, axis=0)
        ax.plot(range(longest), mean, color="black", linewidth=1.8, label="mean over seeds")
        ax.legend(loc="best")
    ax.set_xlabel("iteration (episode)")
    ax.set_ylabel(ylabel)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)
    return out_path


def render_run_plots(out_dir) -> dict:
    """AAR and ANUC convergence curves next to metrics.csv."""
    metrics = os.path.join(out_dir, "metrics.csv")
    by_seed = _read_metrics(metrics)
    written = {}
    written["aar_plot"] = _series_plot(
        by_seed, "aar", "average acceptance ratio",
        os.path.join(out_dir, "aar_vs_iteration.png"),
    )
    written["anuc_plot"] = _series_plot(
        by_seed, "anuc", "average network utilization cost",
        os.path.join(out_dir, "anuc_vs_iteration.png"),
    )
    return written


def render_sweep_plots(out_dir, parameter) -> dict:
    sweep_path = os.path.join(out_dir, "sweep.csv")
    values = defaultdict(lambda: {"aar": [], "anuc": []})
    with open(sweep_path) as handle:
        for row in csv.DictReader(handle):
            value = float(row[parameter])
            if row["final_aar"]:
                values[value]["aar"].append(float(row["final_aar"]))
            if row["final_anuc"]:
                values[value]["anuc"].append(float(row["final_anuc"]))

    written = {}
    for key, ylabel, fname in (
        ("aar", "final average acceptance ratio", f"aar_vs_{parameter}.png"),
        ("anuc", "final average network utilization cost", f"anuc_vs_{parameter}.png"),
    ):
        xs = sorted(values)
        means = [np.mean(values[x][key]) if values[x][key] else np.nan for x in xs]
        stds = [np.std(values[x][key], ddof=1) if len(values[x][key]) > 1 else 0.0 for x in xs]
        fig, ax = plt.subplots(figsize=(7, 4.2))
        ax.errorbar(xs, means, yerr=stds, marker="o", capsize=3)
        ax.set_xlabel(parameter)
        ax.set_ylabel(ylabel)
        ax.grid(True, alpha=0.3)
        fig.tight_layout()
        path = os.path.join(out_dir, fname)
        fig.savefig(path, dpi=150)
        plt.close(fig)
        written[f"{key}_sweep_plot"] = path
    return written
