//! Plotting script written next to the experiment outputs. Figures are drawn
//! by matplotlib from the CSV files; nothing is rendered here.

use std::path::Path;

use crate::error::{Error, Result};

pub const PLOT_SCRIPT: &str = r#"#!/usr/bin/env python3
"""Figures for a fitgoal output directory: python3 plot.py [DIR]"""
import csv
import glob
import os
import sys
from collections import defaultdict

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

root = sys.argv[1] if len(sys.argv) > 1 else os.path.dirname(os.path.abspath(__file__))


def rows(name):
    path = os.path.join(root, name)
    if not os.path.exists(path):
        return []
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


results = rows("results.csv")
if results:
    cells = defaultdict(lambda: defaultdict(list))
    for r in results:
        cells[(r["group"], r["env"], r["stage"])][r["strategy"]].append(float(r["total_reward"]))
    keys = sorted(cells)
    fig, axes = plt.subplots(1, len(keys), figsize=(4 * len(keys), 4), squeeze=False)
    for ax, key in zip(axes[0], keys):
        names = list(cells[key])
        ax.boxplot([cells[key][n] for n in names])
        ax.set_xticks(range(1, len(names) + 1), names, rotation=60, ha="right")
        ax.set_title(" ".join(key))
        ax.set_ylabel("total reward")
    fig.tight_layout()
    fig.savefig(os.path.join(root, "rewards.png"), dpi=120)

curves = sorted(glob.glob(os.path.join(root, "curves", "*.csv")))
if curves:
    fig, ax = plt.subplots(figsize=(7, 4))
    for path in curves:
        with open(path, newline="") as fh:
            pts = list(csv.DictReader(fh))
        ax.plot([int(p["step"]) for p in pts], [float(p["eval_mean"]) for p in pts],
                label=os.path.basename(path)[:-4])
    ax.set_xlabel("training step")
    ax.set_ylabel("greedy evaluation reward")
    ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(os.path.join(root, "curves.png"), dpi=120)

sweep = [r for r in rows("sweep.csv") if not r["failed"]]
if sweep:
    fig, ax = plt.subplots(figsize=(5, 4))
    for axis in ("m", "l"):
        pts = [r for r in sweep if r["axis"] == axis]
        ax.plot([float(r[axis]) for r in pts], [float(r["mean_reward"]) for r in pts], marker="o",
                label=f"varying {axis}")
    ax.set_xlabel("weight")
    ax.set_ylabel("mean total reward")
    ax.legend()
    fig.tight_layout()
    fig.savefig(os.path.join(root, "sweep.png"), dpi=120)
"#;

pub fn write_plot_script(dir: &Path) -> Result<()> {
    let path = dir.join("plot.py");
    std::fs::write(&path, PLOT_SCRIPT).map_err(|e| Error::io(path, e))
}
