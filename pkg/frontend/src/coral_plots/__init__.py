from .data import RunSeries, load_metrics_dir, smooth_returns, aggregate
from .figures import FigureSpec, plot_learning_curves, plot_ice_panels, plot_ablation

__all__ = [
    "RunSeries",
    "load_metrics_dir",
    "smooth_returns",
    "aggregate",
    "FigureSpec",
    "plot_learning_curves",
    "plot_ice_panels",
    "plot_ablation",
]
