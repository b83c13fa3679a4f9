"""Vectorized environment front-end with per-env RNG streams and auto-reset.

Each environment owns an independent RNG stream, so batch results are
independent of iteration order. Episodes that end inside `batch_step` are
reset immediately; the pre-reset (terminal) observation is reported
separately from the next policy input.
"""

from __future__ import annotations

import numpy as np

from .grid import GridState, observe, reset, step
from .tasks import OBS_DIM, TaskSpec


class VecGridEnv:
    """N independent environments stepped as a batch."""

    def __init__(self, tasks: list[TaskSpec], seed: int):
        self.n = len(tasks)
        self.tasks = list(tasks)
        seeds = np.random.SeedSequence(seed).spawn(self.n)
        self.rngs = [np.random.default_rng(s) for s in seeds]
        self.states: list[GridState] = [None] * self.n  # type: ignore[list-item]
        self.episode_return = np.zeros(self.n, dtype=np.float64)
        self.episode_length = np.zeros(self.n, dtype=np.int64)

    def reset_env(self, i: int, task: TaskSpec | None = None) -> np.ndarray:
        if task is not None:
            self.tasks[i] = task
        state, obs = reset(self.tasks[i], self.rngs[i])
        self.states[i] = state
        self.episode_return[i] = 0.0
        self.episode_length[i] = 0
        return obs

    def reset_all(self, tasks: list[TaskSpec] | None = None) -> np.ndarray:
        obs = np.empty((self.n, OBS_DIM), dtype=np.float32)
        for i in range(self.n):
            obs[i] = self.reset_env(i, None if tasks is None else tasks[i])
        return obs

    def observe_all(self) -> np.ndarray:
        obs = np.empty((self.n, OBS_DIM), dtype=np.float32)
        for i in range(self.n):
            obs[i] = observe(self.states[i])
        return obs

    def batch_step(self, actions: np.ndarray):
        """Step every env; auto-reset finished episodes.

        Returns (next_obs, step_obs, rewards, dones, truncateds, finished)
        where `next_obs` is the next policy input (post-reset for finished
        envs), `step_obs` the in-episode observation after the action
        (terminal obs when done), and `finished` a list of
        (env_index, episode_return, episode_length) for episodes that ended.
        """
        next_obs = np.empty((self.n, OBS_DIM), dtype=np.float32)
        step_obs = np.empty((self.n, OBS_DIM), dtype=np.float32)
        rewards = np.zeros(self.n, dtype=np.float32)
        dones = np.zeros(self.n, dtype=bool)
        truncs = np.zeros(self.n, dtype=bool)
        finished: list[tuple[int, float, int]] = []
        for i in range(self.n):
            _, out = step(self.states[i], int(actions[i]))
            rewards[i] = out.reward
            dones[i] = out.done
            truncs[i] = out.truncated
            step_obs[i] = out.obs
            self.episode_return[i] += out.reward
            self.episode_length[i] += 1
            if out.done:
                finished.append((i, float(self.episode_return[i]), int(self.episode_length[i])))
                next_obs[i] = self.reset_env(i)
            else:
                next_obs[i] = out.obs
        return next_obs, step_obs, rewards, dones, truncs, finished
