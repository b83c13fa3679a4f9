"""Run hyperparameters and modes."""

from __future__ import annotations

from dataclasses import dataclass, field, asdict

from ..errors import ConfigInvalid

MODES = (
    "pretrain",
    "deploy",
    "zeroshot",
    "baseline-ppo",
    "baseline-wm",
    "baseline-random-msg",
)


@dataclass
class HyperParams:
    mode: str = "pretrain"
    n_envs: int = 128
    rollout_len: int = 128
    minibatches: int = 8
    epochs: int = 4
    total_steps: int = 50_000_000
    gamma: float = 0.99
    gae_lambda: float = 0.95
    clip_eps: float = 0.2
    entropy_coef: float = 0.02
    vf_coef: float = 0.5
    lambda_dyn: float = 0.5
    lambda_coh: float = 0.05
    lambda_causal: float = 0.1
    alpha: float = 0.5
    base_lr: float = 2.5e-4
    lr_decay: bool = True
    max_grad_norm: float = 0.5
    hidden_dim: int = 128
    message_dim: int = 32
    context_len: int = 4
    num_heads: int = 4
    # Observation term of the dynamics loss: mean over components (scale
    # stable across obs_dim) or plain sum of squares.
    obs_loss_mean: bool = True
    # Keep the IA context window across episode boundaries instead of zeroing
    # it at every reset.
    persistent_context: bool = False
    gru_ia: bool = False
    checkpoint_every: int = 0  # updates between periodic checkpoints; 0 = final only

    @staticmethod
    def defaults_for(mode: str) -> "HyperParams":
        hp = HyperParams(mode=mode)
        if mode != "pretrain":
            hp.n_envs = 16
            hp.total_steps = 10_000_000
        if mode == "zeroshot":
            hp.total_steps = 1_000_000
        return hp

    @property
    def batch_size(self) -> int:
        return self.n_envs * self.rollout_len

    @property
    def total_updates(self) -> int:
        return max(1, self.total_steps // self.batch_size)

    def validate(self) -> None:
        if self.mode not in MODES:
            raise ConfigInvalid(f"mode {self.mode!r} not in {MODES}")
        positive = (
            "n_envs", "rollout_len", "minibatches", "epochs", "total_steps",
            "gamma", "gae_lambda", "clip_eps", "vf_coef", "base_lr", "max_grad_norm",
            "hidden_dim", "message_dim", "context_len", "num_heads",
        )
        for name in positive:
            if getattr(self, name) <= 0:
                raise ConfigInvalid(f"{name} must be positive")
        if self.batch_size % self.minibatches:
            raise ConfigInvalid("n_envs * rollout_len must be divisible by minibatches")
        if not 0.0 <= self.alpha <= 1.0:
            raise ConfigInvalid("alpha must lie in [0, 1]")
        if self.hidden_dim % self.num_heads:
            raise ConfigInvalid("num_heads must divide hidden_dim")

    def to_dict(self) -> dict:
        return asdict(self)
