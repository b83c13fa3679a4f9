"""Run-curve loading, smoothing, and cross-seed aggregation."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import EmptyInput, MissingChannel

DEFAULT_SMOOTH_EPISODES = 100


@dataclass
class RunCurve:
    """One run's logged trajectory: per-update return stats and ICE."""

    method: str
    env: str
    seed: int
    steps: np.ndarray
    returns: np.ndarray  # per-point mean return; NaN when no episode finished
    counts: np.ndarray  # episodes behind each point
    ice: np.ndarray | None = None
    run_id: str = ""

    def __post_init__(self):
        if not np.all(np.diff(self.steps) > 0):
            raise ValueError(f"steps must be strictly increasing for {self.run_id or self.method}")


def load_runs(root) -> list[RunCurve]:
    """Load every metrics.csv under `root` (one run per file)."""
    root = Path(root)
    paths = sorted(root.rglob("metrics.csv"))
    curves = []
    for path in paths:
        with open(path) as fh:
            rows = list(csv.DictReader(fh))
        if not rows:
            continue
        curves.append(
            RunCurve(
                method=rows[0]["mode"],
                env=rows[0]["env_name"],
                seed=int(rows[0]["seed"]),
                steps=np.array([float(r["global_step"]) for r in rows]),
                returns=np.array([float(r["episodic_return_mean"]) for r in rows]),
                counts=np.array([float(r["episodic_return_count"]) for r in rows]),
                ice=np.array([float(r["ice_mean"]) for r in rows]),
                run_id=rows[0]["run_id"],
            )
        )
    if not curves:
        raise EmptyInput(f"no metrics.csv under {root}")
    return curves


def smooth_curve(curve: RunCurve, window_episodes: int = DEFAULT_SMOOTH_EPISODES) -> np.ndarray:
    """Trailing episode-weighted moving average of the return channel.

    At each point, averages backwards until `window_episodes` episodes are
    covered. Points before the first finished episode are NaN.
    """
    n = len(curve.steps)
    out = np.full(n, np.nan)
    vals = np.where(np.isnan(curve.returns), 0.0, curve.returns)
    weighted = vals * curve.counts
    for k in range(n):
        total = 0.0
        acc = 0.0
        for j in range(k, -1, -1):
            acc += weighted[j]
            total += curve.counts[j]
            if total >= window_episodes:
                break
        if total > 0:
            out[k] = acc / total
    return out


def _common_grid(curves: list[RunCurve], points: int) -> np.ndarray:
    lo = max(float(c.steps[0]) for c in curves)
    hi = min(float(c.steps[-1]) for c in curves)
    if hi <= lo:
        hi = max(float(c.steps[-1]) for c in curves)
    return np.linspace(lo, hi, points)


def aggregate_channel(
    curves: list[RunCurve],
    channel: str = "return",
    points: int = 64,
    window_episodes: int = DEFAULT_SMOOTH_EPISODES,
) -> dict[str, dict]:
    """Per-method mean and 95% CI band on a common step grid.

    `channel` is "return" (smoothed) or "ice". Curves are linearly
    interpolated onto the grid before averaging across seeds.
    """
    if not curves:
        raise EmptyInput("no curves")
    if channel == "ice" and any(c.ice is None for c in curves):
        raise MissingChannel("ice channel missing from at least one curve")
    grid = _common_grid(curves, points)
    by_method: dict[str, list[np.ndarray]] = {}
    for c in curves:
        if channel == "return":
            y = smooth_curve(c, window_episodes)
        else:
            y = c.ice.astype(np.float64)
        ok = ~np.isnan(y)
        if ok.sum() < 2:
            continue
        interp = np.interp(grid, c.steps[ok], y[ok])
        by_method.setdefault(c.method, []).append(interp)
    out = {}
    for method, rows in by_method.items():
        arr = np.stack(rows)
        mean = arr.mean(axis=0)
        if arr.shape[0] > 1:
            half = 1.96 * arr.std(axis=0, ddof=1) / math.sqrt(arr.shape[0])
        else:
            half = np.zeros_like(mean)
        out[method] = {"steps": grid, "mean": mean, "ci": half, "n": arr.shape[0]}
    return out


def ice_curve(curves: list[RunCurve], points: int = 64) -> dict[str, dict]:
    """Binned per-method ICE mean with 95% CI bands on an aligned grid."""
    return aggregate_channel(curves, channel="ice", points=points)
