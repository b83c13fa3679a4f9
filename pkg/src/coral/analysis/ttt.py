"""Two-pass time-to-threshold with success rates."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import EmptyInput
from .curves import DEFAULT_SMOOTH_EPISODES, RunCurve, smooth_curve


@dataclass
class TTTResult:
    method: str
    env: str
    threshold: float
    mean_ttt: float  # NaN when no seed succeeded
    ci_halfwidth: float
    success_rate: float
    per_seed: list[float | None]  # None for runs that never reach threshold

    @property
    def n_success(self) -> int:
        return sum(1 for v in self.per_seed if v is not None)


def first_crossing(steps: np.ndarray, smoothed: np.ndarray, threshold: float) -> float | None:
    idx = np.nonzero(smoothed >= threshold)[0]
    if idx.size == 0:
        return None
    return float(steps[idx[0]])


def time_to_threshold(
    curves: list[RunCurve],
    window_episodes: int = DEFAULT_SMOOTH_EPISODES,
    threshold_fraction: float = 0.9,
) -> list[TTTResult]:
    """Pass 1 fixes each env's threshold at `threshold_fraction` of the best
    smoothed return reached by any run of any method; pass 2 records every
    run's first crossing step, leaving failures out of the mean but in the
    success rate."""
    if not curves:
        raise EmptyInput("no curves")

    by_env: dict[str, list[RunCurve]] = {}
    for c in curves:
        by_env.setdefault(c.env, []).append(c)

    results: list[TTTResult] = []
    for env, env_curves in sorted(by_env.items()):
        smoothed = {id(c): smooth_curve(c, window_episodes) for c in env_curves}
        best = np.nanmax([np.nanmax(s) if np.any(~np.isnan(s)) else -np.inf for s in smoothed.values()])
        threshold = threshold_fraction * float(best)

        by_method: dict[str, list[RunCurve]] = {}
        for c in env_curves:
            by_method.setdefault(c.method, []).append(c)
        for method, group in sorted(by_method.items()):
            per_seed = [first_crossing(c.steps, smoothed[id(c)], threshold) for c in group]
            hits = [v for v in per_seed if v is not None]
            if hits:
                mean = float(np.mean(hits))
                half = 1.96 * float(np.std(hits, ddof=1)) / math.sqrt(len(hits)) if len(hits) > 1 else 0.0
            else:
                mean, half = float("nan"), float("nan")
            results.append(
                TTTResult(
                    method=method,
                    env=env,
                    threshold=threshold,
                    mean_ttt=mean,
                    ci_halfwidth=half,
                    success_rate=len(hits) / len(per_seed),
                    per_seed=per_seed,
                )
            )
    return results
