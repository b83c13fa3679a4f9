from .config import HyperParams
from .gae import compute_gae
from .losses import (
    causal_loss,
    coherence_loss,
    dynamics_loss,
    ice_np,
    ppo_loss,
    ppo_loss_from_outputs,
    utility,
    zscore,
)
from .rollout import RolloutBatch
from .trainer import Trainer

__all__ = [
    "HyperParams",
    "compute_gae",
    "ppo_loss",
    "ppo_loss_from_outputs",
    "dynamics_loss",
    "coherence_loss",
    "ice_np",
    "utility",
    "zscore",
    "causal_loss",
    "RolloutBatch",
    "Trainer",
]
