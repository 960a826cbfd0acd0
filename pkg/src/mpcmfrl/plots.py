"""Report generation: plot-ready long-format CSV plus rendered figures.

``plot_data_report`` scans a directory tree for finished runs (any directory
holding a ``curve.csv``), merges their aggregate curves into one long-format
CSV (env, label, steps, mean, ci_low, ci_high), and renders one PNG per
environment with the mean curves and shaded confidence bands. When the tree
contains a ``heldout_error.csv`` (data-collector ablation) an error figure is
rendered next to it as well.
"""

from __future__ import annotations

import csv
import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

import numpy as np

from .config import load_config
from .curves import read_curve_csv
from .errors import StateError


def gather_runs(runs_dir: str) -> list[dict]:
    runs = []
    for root, _, files in os.walk(runs_dir):
        if "curve.csv" not in files:
            continue
        label = os.path.basename(root)
        env = ""
        config_path = os.path.join(root, "config.txt")
        if os.path.exists(config_path):
            cfg = load_config(config_path)
            label, env = cfg.label, cfg.env
        runs.append({"label": label, "env": env, "dir": root,
                     "curve": read_curve_csv(os.path.join(root, "curve.csv"))})
    if not runs:
        raise StateError(f"no finished runs (curve.csv) under {runs_dir}")
    return sorted(runs, key=lambda r: (r["env"], r["label"]))


def write_long_csv(runs: list[dict], out_csv: str) -> None:
    with open(out_csv, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["env", "label", "steps", "mean", "ci_low", "ci_high"])
        for run in runs:
            for pt in run["curve"]:
                writer.writerow([run["env"], run["label"], pt["steps"],
                                 repr(float(pt["mean"])), repr(float(pt["ci_low"])), repr(float(pt["ci_high"]))])


def render_curve_figures(runs: list[dict], out_base: str) -> list[str]:
    """One figure per environment: mean return vs steps with CI bands."""
    paths = []
    for env in sorted({r["env"] for r in runs}):
        fig, ax = plt.subplots(figsize=(6, 4))
        for run in [r for r in runs if r["env"] == env]:
            steps = [pt["steps"] for pt in run["curve"]]
            mean = [pt["mean"] for pt in run["curve"]]
            lo = [pt["ci_low"] for pt in run["curve"]]
            hi = [pt["ci_high"] for pt in run["curve"]]
            (line,) = ax.plot(steps, mean, label=run["label"])
            ax.fill_between(steps, lo, hi, alpha=0.2, color=line.get_color())
        ax.set_xlabel("environment steps")
        ax.set_ylabel("average return (best so far)")
        ax.set_title(env or "runs")
        ax.legend(fontsize=8)
        fig.tight_layout()
        path = f"{out_base}_{env or 'runs'}.png"
        fig.savefig(path, dpi=150)
        plt.close(fig)
        paths.append(path)
    return paths


def render_heldout_figure(heldout_csv: str, out_png: str) -> str:
    """Mean held-out dynamics error per collector vs training steps."""
    rows = []
    with open(heldout_csv, newline="") as f:
        for row in csv.DictReader(f):
            rows.append({"collector": row["collector"], "seed": int(row["seed"]),
                         "steps": int(row["steps"]), "error": float(row["error"])})
    fig, ax = plt.subplots(figsize=(6, 4))
    for collector in sorted({r["collector"] for r in rows}):
        grid = sorted({r["steps"] for r in rows if r["collector"] == collector})
        means = [np.mean([r["error"] for r in rows
                          if r["collector"] == collector and r["steps"] == s]) for s in grid]
        ax.plot(grid, means, label=collector)
    ax.set_xlabel("environment steps")
    ax.set_ylabel("average testing error")
    ax.set_yscale("log")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(out_png, dpi=150)
    plt.close(fig)
    return out_png


def plot_data_report(runs_dir: str, out_csv: str) -> dict:
    """Emit the long-format CSV and render figures alongside it."""
    runs = gather_runs(runs_dir)
    write_long_csv(runs, out_csv)
    base = os.path.splitext(out_csv)[0]
    figures = render_curve_figures(runs, base)
    for root, _, files in os.walk(runs_dir):
        if "heldout_error.csv" in files:
            figures.append(render_heldout_figure(
                os.path.join(root, "heldout_error.csv"), f"{base}_heldout.png"))
    return {"csv": out_csv, "figures": figures}
