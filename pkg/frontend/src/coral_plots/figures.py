"""Figure rendering: learning curves with CI bands, paired return/ICE
panels, ablation comparisons. Styling is fixed (colors, dpi, no timestamps)
so regenerating from the same CSVs is pixel-identical."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .data import RunSeries, aggregate, natural_sort_key

# Method colors follow the paper-style palette: CORAL purple, PPO green,
# world model red, random messages steel blue, no-coherence grey.
DEFAULT_COLORS = {
    "deploy": "#923BE5",
    "pretrain": "#923BE5",
    "zeroshot": "#923BE5",
    "baseline-ppo": "#339332",
    "baseline-wm": "#DD264A",
    "baseline-random-msg": "#4682B4",
    "ablate-no-coh": "#696969",
    "ablate-gru": "#E8A33D",
    "ablate-msgdim-16": "#5DA5DA",
    "ablate-msgdim-32": "#923BE5",
    "ablate-msgdim-64": "#B276B2",
}

DISPLAY_NAMES = {
    "deploy": "CORAL",
    "pretrain": "CORAL (pretrain)",
    "zeroshot": "CORAL (zero-shot)",
    "baseline-ppo": "PPO",
    "baseline-wm": "World Model",
    "baseline-random-msg": "Random Message",
    "ablate-no-coh": "No coherence loss",
    "ablate-gru": "GRU trunk",
    "ablate-msgdim-16": "msg 16",
    "ablate-msgdim-32": "msg 32",
    "ablate-msgdim-64": "msg 64",
}

FALLBACK_CYCLE = ("#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e")
DPI = 110


@dataclass
class FigureSpec:
    in_dir: str
    out_dir: str
    fmt: str = "png"
    smoothing_window: int = 100
    colors: dict = field(default_factory=dict)

    def color_for(self, method: str, index: int) -> str:
        if method in self.colors:
            return self.colors[method]
        if method in DEFAULT_COLORS:
            return DEFAULT_COLORS[method]
        return FALLBACK_CYCLE[index % len(FALLBACK_CYCLE)]


def _group_by_env(series: list[RunSeries]) -> dict[str, list[RunSeries]]:
    envs: dict[str, list[RunSeries]] = {}
    for s in series:
        envs.setdefault(s.env, []).append(s)
    return dict(sorted(envs.items(), key=lambda kv: natural_sort_key(kv[0])))


def _draw_channel(ax, spec: FigureSpec, env_series: list[RunSeries], channel: str) -> None:
    agg = aggregate(env_series, channel, window_episodes=spec.smoothing_window)
    for idx, (method, data) in enumerate(agg.items()):
        color = spec.color_for(method, idx)
        label = DISPLAY_NAMES.get(method, method)
        ax.plot(data["steps"], data["mean"], color=color, label=label, linewidth=1.6)
        if data["ci"] is not None:
            ax.fill_between(data["steps"], data["mean"] - data["ci"], data["mean"] + data["ci"], color=color, alpha=0.18, linewidth=0)
        else:
            warnings.warn(f"{method}: single seed, drawing line without CI band", stacklevel=2)
    ax.grid(alpha=0.25, linewidth=0.5)
    ax.margins(x=0)


def _save(fig, spec: FigureSpec, name: str) -> Path:
    out_dir = Path(spec.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / f"{name}.{spec.fmt}"
    fig.savefig(path, dpi=DPI, metadata={"Software": None} if spec.fmt == "png" else None)
    plt.close(fig)
    return path


def plot_learning_curves(spec: FigureSpec, series: list[RunSeries]) -> list[Path]:
    """One panel per environment: mean episodic return with a 95% CI band."""
    paths = []
    for env, env_series in _group_by_env(series).items():
        fig, ax = plt.subplots(figsize=(4.6, 3.2), constrained_layout=True)
        _draw_channel(ax, spec, env_series, "return")
        ax.set_xlabel("environment steps")
        ax.set_ylabel("episodic return")
        ax.set_title(env)
        ax.legend(fontsize=8, framealpha=0.6)
        paths.append(_save(fig, spec, f"curves_{env}"))
    return paths


def plot_ice_panels(spec: FigureSpec, series: list[RunSeries]) -> list[Path]:
    """Two rows per environment: returns above, per-step causal effect below,
    shared x-axis."""
    if all(np.all(np.isnan(s.ice)) for s in series):
        raise ValueError("ice channel missing from every run")
    paths = []
    for env, env_series in _group_by_env(series).items():
        fig, (ax_top, ax_bot) = plt.subplots(2, 1, figsize=(4.6, 4.8), sharex=True, constrained_layout=True)
        _draw_channel(ax_top, spec, env_series, "return")
        ax_top.set_ylabel("episodic return")
        ax_top.set_title(env)
        ax_top.legend(fontsize=8, framealpha=0.6)
        _draw_channel(ax_bot, spec, env_series, "ice")
        ax_bot.set_ylabel("ICE")
        ax_bot.set_xlabel("environment steps")
        assert ax_top.get_xlim() == ax_bot.get_xlim()
        paths.append(_save(fig, spec, f"ice_{env}"))
    return paths


def plot_ablation(spec: FigureSpec, series: list[RunSeries]) -> list[Path]:
    """Ablation comparison: same layout as the learning curves, one panel per
    environment, methods distinguished by run label."""
    paths = []
    for env, env_series in _group_by_env(series).items():
        fig, ax = plt.subplots(figsize=(4.6, 3.2), constrained_layout=True)
        _draw_channel(ax, spec, env_series, "return")
        ax.set_xlabel("environment steps")
        ax.set_ylabel("episodic return")
        ax.set_title(f"{env} (ablations)")
        ax.legend(fontsize=8, framealpha=0.6)
        paths.append(_save(fig, spec, f"ablation_{env}"))
    return paths
