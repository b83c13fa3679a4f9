"""Directory-level analysis: TTT table, zero-shot-style return table, Welch
significance against the next-best method, written as CSV + JSON."""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from ..errors import TooFewSamples
from .curves import DEFAULT_SMOOTH_EPISODES, RunCurve, load_runs, smooth_curve
from .stats import confidence_interval, welch_t_test
from .ttt import TTTResult, time_to_threshold


def _final_return(curve: RunCurve, window_episodes: int) -> float:
    """Asymptotic return: final smoothed point for training runs, whole-run
    episode-weighted mean for evaluation-only (zeroshot) runs."""
    if curve.method == "zeroshot":
        total = float(np.nansum(curve.counts))
        if total == 0:
            return float("nan")
        vals = np.where(np.isnan(curve.returns), 0.0, curve.returns)
        return float((vals * curve.counts).sum() / total)
    s = smooth_curve(curve, window_episodes)
    finite = s[~np.isnan(s)]
    return float(finite[-1]) if finite.size else float("nan")


def _pairwise_p(values: dict[str, list[float]], method: str) -> tuple[float, bool]:
    """Welch p-value of `method` against the best other method by mean."""
    mine = [v for v in values.get(method, []) if v is not None and not math.isnan(v)]
    others = {
        m: [v for v in vals if v is not None and not math.isnan(v)]
        for m, vals in values.items()
        if m != method
    }
    others = {m: v for m, v in others.items() if len(v) >= 2}
    if len(mine) < 2 or not others:
        return float("nan"), False
    best = min(others.items(), key=lambda kv: abs(np.mean(kv[1]) - np.mean(mine)))
    try:
        _, _, p = welch_t_test(mine, best[1])
    except TooFewSamples:
        return float("nan"), False
    return p, p < 0.05


def analyze_directory(in_dir, out_dir, window_episodes: int = DEFAULT_SMOOTH_EPISODES) -> dict:
    """Run the full evaluation over every metrics.csv under `in_dir`.

    Writes results.csv and report.json under `out_dir` and returns the
    report dictionary (env -> method -> TTT/SR/return/CI/p/significance).
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    curves = load_runs(in_dir)
    ttt_results = time_to_threshold(curves, window_episodes)

    by_env_method: dict[tuple[str, str], TTTResult] = {(r.env, r.method): r for r in ttt_results}
    returns: dict[str, dict[str, list[float]]] = {}
    for c in curves:
        returns.setdefault(c.env, {}).setdefault(c.method, []).append(_final_return(c, window_episodes))

    report: dict = {}
    rows = []
    for env in sorted(returns):
        report[env] = {}
        ttt_values = {m: by_env_method[(env, m)].per_seed for m in returns[env] if (env, m) in by_env_method}
        for method in sorted(returns[env]):
            res = by_env_method.get((env, method))
            ret_samples = [r for r in returns[env][method] if not math.isnan(r)]
            if len(ret_samples) >= 2:
                ret_mean, ret_ci = confidence_interval(ret_samples)
            elif ret_samples:
                ret_mean, ret_ci = ret_samples[0], float("nan")
            else:
                ret_mean, ret_ci = float("nan"), float("nan")
            p_ttt, sig_ttt = _pairwise_p(ttt_values, method)
            p_ret, sig_ret = _pairwise_p(returns[env], method)
            entry = {
                "ttt_mean": res.mean_ttt if res else float("nan"),
                "ttt_ci": res.ci_halfwidth if res else float("nan"),
                "success_rate": res.success_rate if res else float("nan"),
                "threshold": res.threshold if res else float("nan"),
                "n_seeds": len(returns[env][method]),
                "mean_return": ret_mean,
                "return_ci": ret_ci,
                "p_value": p_ttt if not math.isnan(p_ttt) else p_ret,
                "p_value_ttt": p_ttt,
                "p_value_return": p_ret,
                "significant": bool(sig_ttt or sig_ret),
            }
            report[env][method] = entry
            rows.append({"env": env, "method": method, **entry})

    with open(out_dir / "results.csv", "w") as fh:
        cols = ["env", "method", "ttt_mean", "ttt_ci", "success_rate", "threshold", "n_seeds",
                "mean_return", "return_ci", "p_value", "p_value_ttt", "p_value_return", "significant"]
        fh.write(",".join(cols) + "\n")
        for row in rows:
            fh.write(",".join("%.10g" % row[c] if isinstance(row[c], float) else str(row[c]) for c in cols) + "\n")
    (out_dir / "report.json").write_text(json.dumps(report, indent=2, sort_keys=True, default=float))
    return report
