"""World-model baseline: the information-agent architecture trained
end-to-end with PPO plus the dynamics loss. Actor and critic heads read the
message representation so the dynamics heads are shared unchanged."""

from __future__ import annotations

import numpy as np

from .. import tensor as T
from ..tensor import ParamStore, Tensor
from .ia import IAConfig, ia_forward, init_ia_params


def init_wm_params(cfg: IAConfig, rng: np.random.Generator, dtype=np.float32) -> ParamStore:
    p = init_ia_params(cfg, rng, dtype=dtype)
    p.add_dense("actor_head", cfg.message_dim, cfg.action_dim, 0.01, rng)
    p.add_dense("critic_head", cfg.message_dim, 1, 1.0, rng)
    return p


def wm_heads(p, message) -> tuple[Tensor, Tensor]:
    msg_t = message if isinstance(message, Tensor) else T.tensor(message)
    logits = T.matmul(msg_t, p["actor_head.w"]) + p["actor_head.b"]
    value = T.matmul(msg_t, p["critic_head.w"]) + p["critic_head.b"]
    return logits, value


def wm_forward(p: ParamStore, windows: np.ndarray, mask: np.ndarray, num_heads: int = 4):
    """Full pass: context -> message -> (logits, value). Returns
    (message, logits, value)."""
    message, _ = ia_forward(p, windows, mask, num_heads=num_heads)
    logits, value = wm_heads(p, message)
    return message, logits, value
