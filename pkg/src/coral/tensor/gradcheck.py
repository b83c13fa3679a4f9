"""Finite-difference gradient verification for scalar losses."""

from __future__ import annotations

from typing import Callable

import numpy as np

from .autodiff import Tensor
from .params import ParamStore


def grad_check(
    f: Callable[[ParamStore], Tensor],
    store: ParamStore,
    eps: float = 1e-5,
    max_coords_per_param: int = 8,
    rng: np.random.Generator | None = None,
) -> float:
    """Compare autodiff gradients of ``f(store)`` against central differences.

    Samples up to ``max_coords_per_param`` coordinates per parameter and
    returns the max relative error |g_ad - g_fd| / max(1e-8, |g_ad| + |g_fd|).
    Run the store in float64 for meaningful tolerances.
    """
    rng = rng or np.random.default_rng(0)
    store.zero_grad()
    out = f(store)
    out.backward()
    grads = {name: (t.grad.copy() if t.grad is not None else np.zeros_like(t.data)) for name, t in store.items()}

    worst = 0.0
    for name, t in store.items():
        flat = t.data.reshape(-1)
        n = flat.size
        coords = np.arange(n) if n <= max_coords_per_param else rng.choice(n, size=max_coords_per_param, replace=False)
        for c in coords:
            orig = flat[c]
            flat[c] = orig + eps
            hi = float(f(store).data)
            flat[c] = orig - eps
            lo = float(f(store).data)
            flat[c] = orig
            g_fd = (hi - lo) / (2.0 * eps)
            g_ad = float(grads[name].reshape(-1)[c])
            rel = abs(g_ad - g_fd) / max(1e-8, abs(g_ad) + abs(g_fd))
            worst = max(worst, rel)
    return worst
