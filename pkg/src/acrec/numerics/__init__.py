from . import tensor
from .adam import Adam, AdamState
from .checkpoint import CheckpointError, load_blob, save_blob
from .gradcheck import GradCheckReport, grad_check
from .layers import (
    LayerNorm,
    Linear,
    MultiHeadSelfAttention,
    TransformerBlock,
    TransformerEncoder,
    attention_mask,
    sinusoidal_positional_encoding,
    xavier_uniform,
)
from .tensor import ShapeError, Tensor, backward, constant, parameter, set_debug_checks

__all__ = [
    "tensor",
    "Tensor",
    "ShapeError",
    "parameter",
    "constant",
    "backward",
    "set_debug_checks",
    "Adam",
    "AdamState",
    "GradCheckReport",
    "grad_check",
    "Linear",
    "LayerNorm",
    "MultiHeadSelfAttention",
    "TransformerBlock",
    "TransformerEncoder",
    "attention_mask",
    "sinusoidal_positional_encoding",
    "xavier_uniform",
    "CheckpointError",
    "save_blob",
    "load_blob",
]
