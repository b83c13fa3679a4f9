from .autodiff import (
    Tensor,
    add,
    exp,
    square,
    concat,
    clip,
    gather_rows,
    layer_norm,
    log,
    log_softmax,
    matmul,
    mean,
    minimum,
    maximum,
    multi_head_self_attention,
    mul,
    no_grad,
    select_last,
    set_debug_checks,
    sigmoid,
    softmax,
    stack_rows,
    sum_,
    tanh,
    tensor,
)
from .params import ParamStore, adam_step, clip_global_norm, lr_schedule
from .gradcheck import grad_check
from . import checkpoint

__all__ = [
    "Tensor",
    "tensor",
    "no_grad",
    "set_debug_checks",
    "add",
    "mul",
    "matmul",
    "tanh",
    "sigmoid",
    "log",
    "softmax",
    "log_softmax",
    "layer_norm",
    "multi_head_self_attention",
    "concat",
    "clip",
    "minimum",
    "maximum",
    "mean",
    "sum_",
    "exp",
    "square",
    "select_last",
    "stack_rows",
    "gather_rows",
    "ParamStore",
    "adam_step",
    "clip_global_norm",
    "lr_schedule",
    "grad_check",
    "checkpoint",
]
