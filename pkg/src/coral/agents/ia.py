"""Information agent: a small transformer over a sliding observation context.

The agent embeds each observation, keeps the most recent `context_len`
embeddings, runs one self-attention + MLP block with residuals, and emits a
tanh-bounded message from the newest position. Four linear heads predict the
next observation, reward, termination probability, and next message from
(message, one-hot action).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import tensor as T
from ..tensor import ParamStore, Tensor


@dataclass
class IAConfig:
    obs_dim: int
    hidden_dim: int = 128
    message_dim: int = 32
    context_len: int = 4
    num_heads: int = 4
    action_dim: int = 7

    def validate(self) -> None:
        if self.hidden_dim % self.num_heads:
            raise ValueError("num_heads must divide hidden_dim")
        if self.message_dim <= 0:
            raise ValueError("message_dim must be positive")


def init_ia_params(cfg: IAConfig, rng: np.random.Generator, dtype=np.float32) -> ParamStore:
    cfg.validate()
    p = ParamStore(dtype=dtype)
    h, msg, act = cfg.hidden_dim, cfg.message_dim, cfg.action_dim
    p.add_dense("obs_tok", cfg.obs_dim, h, np.sqrt(2.0), rng)
    p.add("pos_embed", rng.normal(0.0, 0.02, size=(cfg.context_len, h)))
    p.add("ln1.g", np.ones(h))
    p.add("ln1.b", np.zeros(h))
    p.add("ln2.g", np.ones(h))
    p.add("ln2.b", np.zeros(h))
    for name in ("attn.q", "attn.k", "attn.v", "attn.out"):
        p.add_dense(name, h, h, 1.0, rng)
    p.add_dense("mlp_1", h, h * 2, np.sqrt(2.0), rng)
    p.add_dense("mlp_2", h * 2, h, np.sqrt(2.0), rng)
    p.add_dense("message_head", h, msg, 1.0, rng)
    p.add_dense("next_obs_head", msg + act, cfg.obs_dim, 1.0, rng)
    p.add_dense("reward_head", msg + act, 1, 1.0, rng)
    p.add_dense("done_head", msg + act, 1, 1.0, rng)
    p.add_dense("next_msg_head", msg + act, msg, 1.0, rng)
    return p


def ia_forward(p: ParamStore, windows: np.ndarray, mask: np.ndarray, num_heads: int = 4) -> tuple[Tensor, Tensor]:
    """Message from a batch of observation windows.

    windows: (B, L, obs_dim) raw observations, oldest first; rows belonging
    to an earlier episode (or before the first step) are zero and flagged
    invalid in `mask` (B, L). Returns (message (B, msg_dim), z (B, hidden)).
    """
    wt = T.tensor(windows) if not isinstance(windows, Tensor) else windows
    e = T.tanh(T.matmul(wt, p["obs_tok.w"]) + p["obs_tok.b"])
    e = T.mul(e, T.tensor(mask[..., None].astype(windows.dtype)))
    x = e + p["pos_embed"]
    attn = T.multi_head_self_attention(
        T.layer_norm(x, p["ln1.g"], p["ln1.b"]),
        num_heads,
        p["attn.q.w"], p["attn.q.b"],
        p["attn.k.w"], p["attn.k.b"],
        p["attn.v.w"], p["attn.v.b"],
        p["attn.out.w"], p["attn.out.b"],
    )
    y = T.select_last(attn + x)
    hidden = T.matmul(T.tanh(T.matmul(T.layer_norm(y, p["ln2.g"], p["ln2.b"]), p["mlp_1.w"]) + p["mlp_1.b"]), p["mlp_2.w"]) + p["mlp_2.b"]
    z = hidden + y
    message = T.tanh(T.matmul(z, p["message_head.w"]) + p["message_head.b"])
    return message, z


def one_hot_actions(actions: np.ndarray, action_dim: int, dtype=np.float32) -> np.ndarray:
    out = np.zeros((actions.shape[0], action_dim), dtype=dtype)
    out[np.arange(actions.shape[0]), actions] = 1.0
    return out


def ia_world_forward(p: ParamStore, message: Tensor, actions: np.ndarray, action_dim: int = 7) -> dict[str, Tensor]:
    """Dynamics heads on concat(message, one-hot action), with the fixed
    output clipping: observations/rewards to [-10, 10], done probability to
    [1e-7, 1 - 1e-7], next message through tanh."""
    onehot = T.tensor(one_hot_actions(actions, action_dim, dtype=message.data.dtype))
    inp = T.concat([message, onehot], axis=-1)
    next_obs = T.clip(T.matmul(inp, p["next_obs_head.w"]) + p["next_obs_head.b"], -10.0, 10.0)
    reward = T.clip(T.matmul(inp, p["reward_head.w"]) + p["reward_head.b"], -10.0, 10.0)
    done = T.clip(T.sigmoid(T.matmul(inp, p["done_head.w"]) + p["done_head.b"]), 1e-7, 1.0 - 1e-7)
    next_msg = T.tanh(T.matmul(inp, p["next_msg_head.w"]) + p["next_msg_head.b"])
    return {"next_obs": next_obs, "reward": reward, "done": done, "next_msg": next_msg}


class ContextState:
    """Sliding per-env window of raw observations plus validity mask."""

    def __init__(self, n_envs: int, context_len: int, obs_dim: int):
        self.windows = np.zeros((n_envs, context_len, obs_dim), dtype=np.float32)
        self.mask = np.zeros((n_envs, context_len), dtype=np.float32)

    def push(self, obs: np.ndarray) -> None:
        self.windows[:, :-1] = self.windows[:, 1:]
        self.windows[:, -1] = obs
        self.mask[:, :-1] = self.mask[:, 1:]
        self.mask[:, -1] = 1.0

    def pushed(self, obs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Windows/mask as they would be after push(obs), without mutating."""
        win = np.concatenate([self.windows[:, 1:], obs[:, None, :]], axis=1)
        msk = np.concatenate([self.mask[:, 1:], np.ones((obs.shape[0], 1), dtype=np.float32)], axis=1)
        return win, msk

    def reset_env(self, i: int) -> None:
        self.windows[i] = 0.0
        self.mask[i] = 0.0
