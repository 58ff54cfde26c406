"""Convolutional network with full-height kernels, written directly on numpy."""
from .checkpoint import load_checkpoint, save_checkpoint
from .gradcheck import GradCheckReport, gradient_check
from .layers import ShapeError, avg_pool, conv_forward, dropout_forward, lrelu
from .network import (
    AdamConfig,
    ConvBlockSpec,
    NetworkSpec,
    NetworkState,
    adam_step,
    backward,
    forward,
    forward_raw,
    init_state,
)
from .training import NumericError, TrainConfig, predict, train

__all__ = [
    "AdamConfig", "ConvBlockSpec", "GradCheckReport", "NetworkSpec", "NetworkState", "NumericError",
    "ShapeError", "TrainConfig", "adam_step", "avg_pool", "backward", "conv_forward", "dropout_forward",
    "forward", "forward_raw", "gradient_check", "init_state", "load_checkpoint", "lrelu", "predict",
    "save_checkpoint", "train",
]
