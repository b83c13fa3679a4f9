"""Rollout collection for all run modes.

Each step stores both control-agent evaluations (message-conditioned and
zero-message), the raw observation window that produced the message (so the
information-agent update can rebuild its graph), and the true post-step
observation (terminal, not auto-reset) as the dynamics target.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from ..agents.ca import ca_forward, ca_forward_pair, sample_action
from ..agents.gru import gru_ia_forward
from ..agents.ia import ContextState, ia_forward
from ..agents.wm import wm_heads
from ..envs.vec import VecGridEnv
from ..tensor import no_grad
from .losses import ice_np


@dataclass
class RolloutBatch:
    obs: np.ndarray
    windows: np.ndarray
    win_mask: np.ndarray
    messages: np.ndarray
    next_messages: np.ndarray
    actions: np.ndarray
    log_probs: np.ndarray
    values: np.ndarray
    values_zero: np.ndarray
    logits_msg: np.ndarray
    logits_zero: np.ndarray
    rewards: np.ndarray
    dones: np.ndarray
    truncs: np.ndarray
    trunc_values: np.ndarray
    next_obs_true: np.ndarray
    bootstrap_value: np.ndarray
    gru_h_init: np.ndarray | None = None
    episodes: list = field(default_factory=list)
    # filled in by the trainer after collection
    advantages: np.ndarray | None = None
    returns: np.ndarray | None = None
    delta_v: np.ndarray | None = None
    ice: np.ndarray | None = None
    utilities: np.ndarray | None = None

    @property
    def n_envs(self) -> int:
        return self.obs.shape[0]

    @property
    def rollout_len(self) -> int:
        return self.obs.shape[1]


class Collector:
    """Owns the live environment-side state (envs, context, hidden, obs)."""

    def __init__(self, envs: VecGridEnv, agent_kind: str, obs_dim: int, context_len: int, hidden_dim: int, message_dim: int, num_heads: int, policy_rng: np.random.Generator, msg_rng: np.random.Generator, persistent_context: bool = False):
        self.envs = envs
        self.agent_kind = agent_kind  # coral | gru | wm | ppo | random
        self.obs_dim = obs_dim
        self.context_len = context_len
        self.hidden_dim = hidden_dim
        self.message_dim = message_dim
        self.num_heads = num_heads
        self.policy_rng = policy_rng
        self.msg_rng = msg_rng
        self.persistent_context = persistent_context
        self.ctx = ContextState(envs.n, context_len, obs_dim)
        self.hidden = np.zeros((envs.n, hidden_dim), dtype=np.float32)
        self.h_hist: deque[np.ndarray] = deque(maxlen=context_len)
        self.obs: np.ndarray | None = None

    def reset(self, tasks=None) -> None:
        self.obs = self.envs.reset_all(tasks)
        self.ctx = ContextState(self.envs.n, self.context_len, self.obs_dim)
        self.hidden[:] = 0.0
        self.h_hist.clear()

    # -- message/value helpers -------------------------------------------

    def _message(self, ia_params, windows, mask, hidden=None):
        if self.agent_kind in ("coral", "wm"):
            m, _ = ia_forward(ia_params, windows, mask, num_heads=self.num_heads)
            return m.data
        if self.agent_kind == "gru":
            m, h_new, _ = gru_ia_forward(ia_params, hidden, windows)
            return m.data, h_new.data
        if self.agent_kind == "random":
            return (self.msg_rng.random((windows.shape[0], self.message_dim), dtype=np.float32) * 2.0 - 1.0)
        return np.zeros((windows.shape[0], self.message_dim), dtype=np.float32)

    def _policy(self, ca_params, ia_params, obs, message):
        """Both policy branches; for the WM baseline the heads read the
        message representation directly."""
        if self.agent_kind == "wm":
            logits_m, value_m = wm_heads(ia_params, message)
            zeros = np.zeros_like(message)
            logits_0, value_0 = wm_heads(ia_params, zeros)
            return logits_m.data, value_m.data[:, 0], logits_0.data, value_0.data[:, 0]
        lm, vm, l0, v0 = ca_forward_pair(ca_params, obs, message)
        return lm.data, vm.data[:, 0], l0.data, v0.data[:, 0]

    # -- main loop ---------------------------------------------------------

    def collect(self, ia_params, ca_params, rollout_len: int) -> RolloutBatch:
        assert self.obs is not None, "call reset() before collect()"
        n = self.envs.n
        t_len = rollout_len
        od, md, cl = self.obs_dim, self.message_dim, self.context_len
        a_dim = 7

        b = RolloutBatch(
            obs=np.empty((n, t_len, od), dtype=np.float32),
            windows=np.empty((n, t_len, cl, od), dtype=np.float32),
            win_mask=np.empty((n, t_len, cl), dtype=np.float32),
            messages=np.empty((n, t_len, md), dtype=np.float32),
            next_messages=np.zeros((n, t_len, md), dtype=np.float32),
            actions=np.empty((n, t_len), dtype=np.int64),
            log_probs=np.empty((n, t_len), dtype=np.float32),
            values=np.empty((n, t_len), dtype=np.float32),
            values_zero=np.empty((n, t_len), dtype=np.float32),
            logits_msg=np.empty((n, t_len, a_dim), dtype=np.float32),
            logits_zero=np.empty((n, t_len, a_dim), dtype=np.float32),
            rewards=np.empty((n, t_len), dtype=np.float32),
            dones=np.zeros((n, t_len), dtype=bool),
            truncs=np.zeros((n, t_len), dtype=bool),
            trunc_values=np.zeros((n, t_len), dtype=np.float32),
            next_obs_true=np.empty((n, t_len, od), dtype=np.float32),
            bootstrap_value=np.zeros(n, dtype=np.float32),
            gru_h_init=np.zeros((n, t_len, self.hidden_dim), dtype=np.float32) if self.agent_kind == "gru" else None,
        )

        with no_grad():
            for t in range(t_len):
                obs = self.obs
                if self.agent_kind == "gru":
                    self.h_hist.append(self.hidden.copy())
                    if len(self.h_hist) == self.context_len:
                        b.gru_h_init[:, t] = self.h_hist[0]
                self.ctx.push(obs)
                b.obs[:, t] = obs
                b.windows[:, t] = self.ctx.windows
                b.win_mask[:, t] = self.ctx.mask

                if self.agent_kind == "gru":
                    message, self.hidden = self._message(ia_params, obs, None, hidden=self.hidden)
                else:
                    message = self._message(ia_params, self.ctx.windows, self.ctx.mask)
                logits_m, v_m, logits_0, v_0 = self._policy(ca_params, ia_params, obs, message)
                actions, logp, _ = sample_action(logits_m, self.policy_rng)

                next_obs, step_obs, rewards, dones, truncs, finished = self.envs.batch_step(actions)

                b.messages[:, t] = message
                b.actions[:, t] = actions
                b.log_probs[:, t] = logp
                b.values[:, t] = v_m
                b.values_zero[:, t] = v_0
                b.logits_msg[:, t] = logits_m
                b.logits_zero[:, t] = logits_0
                b.rewards[:, t] = rewards
                b.dones[:, t] = dones
                b.truncs[:, t] = truncs
                b.next_obs_true[:, t] = step_obs
                b.episodes.extend((ret, ln) for _, ret, ln in finished)

                if truncs.any():
                    idx = np.nonzero(truncs)[0]
                    b.trunc_values[idx, t] = self._terminal_values(ia_params, ca_params, idx, step_obs[idx])

                if not self.persistent_context:
                    for i in np.nonzero(dones)[0]:
                        self.ctx.reset_env(int(i))
                        self.hidden[int(i)] = 0.0
                self.obs = next_obs

            # Bootstrap value for the state after the final step, with a
            # fresh message for the next observation.
            win_b, mask_b = self.ctx.pushed(self.obs)
            if self.agent_kind == "gru":
                m_boot, _, _ = gru_ia_forward(ia_params, self.hidden, self.obs)
                m_boot = m_boot.data
            elif self.agent_kind in ("coral", "wm"):
                m_boot, _ = ia_forward(ia_params, win_b, mask_b, num_heads=self.num_heads)
                m_boot = m_boot.data
            elif self.agent_kind == "random":
                m_boot = self.msg_rng.random((n, md), dtype=np.float32) * 2.0 - 1.0
            else:
                m_boot = np.zeros((n, md), dtype=np.float32)
            if self.agent_kind == "wm":
                _, v_boot = wm_heads(ia_params, m_boot)
            else:
                _, v_boot = ca_forward(ca_params, self.obs, m_boot)
            b.bootstrap_value[:] = v_boot.data[:, 0]

            b.next_messages[:, :-1] = b.messages[:, 1:]
            b.next_messages[:, -1] = m_boot

        b.ice = ice_np(b.logits_zero.reshape(-1, a_dim), b.logits_msg.reshape(-1, a_dim)).reshape(n, t_len)
        b.delta_v = b.values - b.values_zero
        return b

    def _terminal_values(self, ia_params, ca_params, idx: np.ndarray, term_obs: np.ndarray) -> np.ndarray:
        """Value of the step-cap terminal observation (used to bootstrap)."""
        if self.agent_kind == "gru":
            m, _, _ = gru_ia_forward(ia_params, self.hidden[idx], term_obs)
            m = m.data
        elif self.agent_kind in ("coral", "wm"):
            win = np.concatenate([self.ctx.windows[idx, 1:], term_obs[:, None, :]], axis=1)
            msk = np.concatenate([self.ctx.mask[idx, 1:], np.ones((len(idx), 1), dtype=np.float32)], axis=1)
            m, _ = ia_forward(ia_params, win, msk, num_heads=self.num_heads)
            m = m.data
        elif self.agent_kind == "random":
            m = self.msg_rng.random((len(idx), self.message_dim), dtype=np.float32) * 2.0 - 1.0
        else:
            m = np.zeros((len(idx), self.message_dim), dtype=np.float32)
        if self.agent_kind == "wm":
            _, v = wm_heads(ia_params, m)
        else:
            _, v = ca_forward(ca_params, term_obs, m)
        return v.data[:, 0]
