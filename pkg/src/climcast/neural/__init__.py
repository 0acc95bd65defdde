"""From-scratch LSTM/GRU with additive attention, trained by reverse-mode gradients and Adam."""

from .layers import (
    attention_forward,
    dense_head_forward,
    gru_forward,
    lstm_forward,
    softmax,
)
from .model import backward, finite_difference_grad, loss_and_grads, max_relative_error, model_forward, mse_loss
from .optim import AdamState, adam_step
from .params import VARIANTS, Dims, ModelParams, init_params, tensor_shapes

__all__ = [
    "AdamState", "Dims", "ModelParams", "VARIANTS", "adam_step", "attention_forward", "backward",
    "dense_head_forward", "finite_difference_grad", "gru_forward", "init_params", "loss_and_grads",
    "lstm_forward", "max_relative_error", "model_forward", "mse_loss", "softmax", "tensor_shapes",
]
