"""Metrics-CSV loading and aggregation.

This package talks to the training side only through its published CSV
schema (run_id, mode, env_name, seed, global_step, episodic_return_mean,
episodic_return_count, ..., ice_mean, ...). Smoothing and binning use the
same definitions as the analysis pipeline so figures match reported tables:
trailing episode-weighted window of SMOOTH_EPISODES episodes, linear
interpolation onto a shared grid, 1.96 * s / sqrt(N) bands.
"""

from __future__ import annotations

import csv
import math
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

SMOOTH_EPISODES = 100
GRID_POINTS = 64


@dataclass
class RunSeries:
    method: str
    env: str
    seed: int
    steps: np.ndarray
    returns: np.ndarray
    counts: np.ndarray
    ice: np.ndarray


def method_label(run_id: str, env: str, seed: int, mode: str) -> str:
    """Method key for grouping: the run_id minus its -<env>-s<seed> suffix
    (distinguishes ablation variants), falling back to the mode column."""
    suffix = f"-{env}-s{seed}"
    if run_id.endswith(suffix):
        return run_id[: -len(suffix)]
    return mode


def load_metrics_dir(root) -> list[RunSeries]:
    """Every metrics.csv under `root`, one series per run. Read-only."""
    out = []
    for path in sorted(Path(root).rglob("metrics.csv")):
        with open(path) as fh:
            rows = list(csv.DictReader(fh))
        if not rows:
            continue
        out.append(
            RunSeries(
                method=method_label(rows[0]["run_id"], rows[0]["env_name"], int(rows[0]["seed"]), rows[0]["mode"]),
                env=rows[0]["env_name"],
                seed=int(rows[0]["seed"]),
                steps=np.array([float(r["global_step"]) for r in rows]),
                returns=np.array([float(r["episodic_return_mean"]) for r in rows]),
                counts=np.array([float(r["episodic_return_count"]) for r in rows]),
                ice=np.array([float(r["ice_mean"]) for r in rows]),
            )
        )
    if not out:
        raise FileNotFoundError(f"no metrics.csv under {root}")
    return out


def smooth_returns(series: RunSeries, window_episodes: int = SMOOTH_EPISODES) -> np.ndarray:
    """Trailing episode-weighted mean of the return channel (NaN before the
    first finished episode)."""
    n = len(series.steps)
    out = np.full(n, np.nan)
    vals = np.where(np.isnan(series.returns), 0.0, series.returns) * series.counts
    for k in range(n):
        total = acc = 0.0
        for j in range(k, -1, -1):
            acc += vals[j]
            total += series.counts[j]
            if total >= window_episodes:
                break
        if total > 0:
            out[k] = acc / total
    return out


def aggregate(series: list[RunSeries], channel: str, window_episodes: int = SMOOTH_EPISODES, points: int = GRID_POINTS) -> dict[str, dict]:
    """Per-method mean and 95% CI band on a common step grid."""
    lo = max(float(s.steps[0]) for s in series)
    hi = min(float(s.steps[-1]) for s in series)
    if hi <= lo:
        hi = max(float(s.steps[-1]) for s in series)
    grid = np.linspace(lo, hi, points)
    groups: dict[str, list[np.ndarray]] = {}
    for s in series:
        y = smooth_returns(s, window_episodes) if channel == "return" else s.ice.astype(float)
        okmask = ~np.isnan(y)
        if okmask.sum() < 2:
            continue
        groups.setdefault(s.method, []).append(np.interp(grid, s.steps[okmask], y[okmask]))
    out = {}
    for method, rows in sorted(groups.items()):
        arr = np.stack(rows)
        mean = arr.mean(axis=0)
        ci = 1.96 * arr.std(axis=0, ddof=1) / math.sqrt(arr.shape[0]) if arr.shape[0] > 1 else None
        out[method] = {"steps": grid, "mean": mean, "ci": ci, "n": arr.shape[0]}
    return out


def natural_sort_key(name: str):
    return [int(p) if p.isdigit() else p for p in re.split(r"(\d+)", name)]
