from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .optim import ParamStore, adam_step, clip_global_norm, normal_init, xavier_uniform
from .tensor import (
    Tape,
    TapeError,
    Tensor,
    add,
    concat,
    conv_1xL,
    conv_Kx1,
    cross_entropy,
    dropout,
    embedding_lookup,
    gelu,
    layer_norm,
    lstm_step,
    masked_softmax,
    matmul,
    mul,
    relu,
    reshape,
    scale,
    scaled_dot_attention,
    set_debug_numerics,
    sigmoid,
    slice_t,
    softmax,
    sub,
    tanh,
    transpose,
)

__all__ = [
    "CheckpointError",
    "ParamStore",
    "Tape",
    "TapeError",
    "Tensor",
    "adam_step",
    "add",
    "clip_global_norm",
    "concat",
    "conv_1xL",
    "conv_Kx1",
    "cross_entropy",
    "dropout",
    "embedding_lookup",
    "gelu",
    "layer_norm",
    "load_checkpoint",
    "lstm_step",
    "masked_softmax",
    "matmul",
    "mul",
    "normal_init",
    "relu",
    "reshape",
    "save_checkpoint",
    "scale",
    "scaled_dot_attention",
    "set_debug_numerics",
    "sigmoid",
    "slice_t",
    "softmax",
    "sub",
    "tanh",
    "transpose",
    "xavier_uniform",
]
