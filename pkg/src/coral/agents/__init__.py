from .ia import IAConfig, init_ia_params, ia_forward, ia_world_forward, ContextState
from .ca import init_ca_params, ca_forward, ca_forward_pair, sample_action
from .gru import init_gru_ia_params, gru_ia_forward, gru_window_forward
from .wm import init_wm_params, wm_forward

__all__ = [
    "IAConfig",
    "init_ia_params",
    "ia_forward",
    "ia_world_forward",
    "ContextState",
    "init_ca_params",
    "ca_forward",
    "ca_forward_pair",
    "sample_action",
    "init_gru_ia_params",
    "gru_ia_forward",
    "gru_window_forward",
    "init_wm_params",
    "wm_forward",
]
