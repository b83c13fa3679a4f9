"""Control agent: feed-forward actor-critic over (observation, message)."""

from __future__ import annotations

import numpy as np

from .. import tensor as T
from ..tensor import ParamStore, Tensor


def init_ca_params(obs_dim: int, message_dim: int, rng: np.random.Generator, hidden_dim: int = 128, action_dim: int = 7, dtype=np.float32) -> ParamStore:
    p = ParamStore(dtype=dtype)
    p.add_dense("obs_layer", obs_dim, hidden_dim, np.sqrt(2.0), rng)
    p.add_dense("msg_layer", message_dim, hidden_dim, np.sqrt(2.0), rng)
    p.add_dense("shared_1", hidden_dim * 2, hidden_dim, np.sqrt(2.0), rng)
    p.add_dense("shared_2", hidden_dim, hidden_dim, np.sqrt(2.0), rng)
    p.add_dense("actor_head", hidden_dim, action_dim, 0.01, rng)
    p.add_dense("critic_head", hidden_dim, 1, 1.0, rng)
    return p


def _trunk(p, obs_features: Tensor, msg_features: Tensor) -> tuple[Tensor, Tensor]:
    combined = T.concat([obs_features, msg_features], axis=-1)
    x = T.tanh(T.matmul(combined, p["shared_1.w"]) + p["shared_1.b"])
    x = T.tanh(T.matmul(x, p["shared_2.w"]) + p["shared_2.b"])
    logits = T.matmul(x, p["actor_head.w"]) + p["actor_head.b"]
    value = T.matmul(x, p["critic_head.w"]) + p["critic_head.b"]
    return logits, value


def ca_forward(p, obs, message) -> tuple[Tensor, Tensor]:
    """Policy logits (B, A) and value (B, 1). `p` may be a ParamStore or a
    dict of constant tensors (frozen-weight forward); the message may be the
    zero vector, which is the counterfactual no-communication input."""
    obs_t = obs if isinstance(obs, Tensor) else T.tensor(obs)
    msg_t = message if isinstance(message, Tensor) else T.tensor(message)
    obs_f = T.tanh(T.matmul(obs_t, p["obs_layer.w"]) + p["obs_layer.b"])
    msg_f = T.tanh(T.matmul(msg_t, p["msg_layer.w"]) + p["msg_layer.b"])
    return _trunk(p, obs_f, msg_f)


def ca_forward_pair(p: ParamStore, obs: np.ndarray, message: np.ndarray):
    """Message-conditioned and zero-message forwards sharing the observation
    embedding (rollout fast path). Returns (logits_m, value_m, logits_0, value_0)."""
    obs_t = T.tensor(obs)
    obs_f = T.tanh(T.matmul(obs_t, p["obs_layer.w"]) + p["obs_layer.b"])
    msg_f = T.tanh(T.matmul(T.tensor(message), p["msg_layer.w"]) + p["msg_layer.b"])
    zero_f = T.tanh(T.matmul(T.tensor(np.zeros_like(message)), p["msg_layer.w"]) + p["msg_layer.b"])
    logits_m, value_m = _trunk(p, obs_f, msg_f)
    logits_0, value_0 = _trunk(p, obs_f, zero_f)
    return logits_m, value_m, logits_0, value_0


def log_softmax_np(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def sample_action(logits: np.ndarray, rng: np.random.Generator):
    """Categorical sample per row; returns (actions, log_probs, entropies)."""
    logp = log_softmax_np(logits)
    p = np.exp(logp)
    cdf = np.cumsum(p, axis=-1)
    u = rng.random(logits.shape[0])
    actions = (u[:, None] > cdf).sum(axis=-1).astype(np.int64)
    np.clip(actions, 0, logits.shape[-1] - 1, out=actions)
    rows = np.arange(logits.shape[0])
    return actions, logp[rows, actions], -(p * logp).sum(axis=-1)
