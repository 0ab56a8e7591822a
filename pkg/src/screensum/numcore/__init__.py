"""Minimal differentiable-computation engine used by the supervised models."""

from .engine import (
    Gradients,
    Tape,
    Tensor,
    add,
    backward,
    concat,
    constant,
    cosine,
    dropout,
    kl_div,
    log,
    matmul,
    max_pool,
    mean,
    mul,
    neg,
    normdot,
    sigmoid,
    slice_vec,
    softmax_t,
    stack_rows,
    sub,
    tanh,
    weighted_bce,
    weighted_sum,
)
from .gradcheck import GradCheckFailure, GradCheckReport, check_op, grad_check
from .optim import Adam, AdamConfig
from .checkpoint import CheckpointError, load_tensors, save_tensors

__all__ = [
    "Tensor",
    "Tape",
    "Gradients",
    "backward",
    "constant",
    "add",
    "sub",
    "neg",
    "mul",
    "matmul",
    "concat",
    "slice_vec",
    "stack_rows",
    "tanh",
    "sigmoid",
    "log",
    "softmax_t",
    "mean",
    "weighted_sum",
    "max_pool",
    "dropout",
    "cosine",
    "normdot",
    "weighted_bce",
    "kl_div",
    "Adam",
    "AdamConfig",
    "grad_check",
    "check_op",
    "GradCheckReport",
    "GradCheckFailure",
    "save_tensors",
    "load_tensors",
    "CheckpointError",
]
