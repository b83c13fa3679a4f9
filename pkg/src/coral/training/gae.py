"""Generalized advantage estimation over (env, step) arrays."""

from __future__ import annotations

import numpy as np


def compute_gae(
    rewards: np.ndarray,
    values: np.ndarray,
    dones: np.ndarray,
    bootstrap_value: np.ndarray,
    gamma: float,
    lam: float,
    truncated: np.ndarray | None = None,
    truncated_values: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Backward-recursion GAE.

    All arrays are (N, T); `bootstrap_value` is (N,) for the state after the
    final step. `dones` masks bootstrapping: delta_t uses (1 - d_t) * gamma *
    V_{t+1}. Episodes cut by the step cap may pass `truncated` flags plus the
    value of the terminal observation so they still bootstrap; true terminals
    never do. Returns (advantages, returns) with returns = advantages + values.
    """
    rewards = np.asarray(rewards, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    dones_f = np.asarray(dones, dtype=np.float64)
    n, t = rewards.shape

    next_values = np.empty_like(values)
    next_values[:, :-1] = values[:, 1:]
    next_values[:, -1] = np.asarray(bootstrap_value, dtype=np.float64)
    # A done step never uses the next row's value (it belongs to a new
    # episode); it bootstraps the stored terminal value when truncated.
    next_values = next_values * (1.0 - dones_f)
    if truncated is not None:
        mask = np.asarray(truncated, dtype=bool)
        next_values[mask] = np.asarray(truncated_values, dtype=np.float64)[mask]

    deltas = rewards + gamma * next_values - values

    advantages = np.zeros_like(deltas)
    carry = np.zeros(n, dtype=np.float64)
    for k in range(t - 1, -1, -1):
        carry = deltas[:, k] + gamma * lam * (1.0 - dones_f[:, k]) * carry
        advantages[:, k] = carry
    return advantages, advantages + values
