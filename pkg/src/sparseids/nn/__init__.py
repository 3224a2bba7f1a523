"""Minimal differentiable substrate: tensors, layers, distributions, Adam."""

from .adam import AdamState, adam_update
from .functions import (
    lognormal_entropy,
    lognormal_log_density,
    lognormal_mean,
    lognormal_sample,
    sigmoid,
    softmax,
    softplus,
)
from .layers import (
    ParameterStore,
    RecurrentState,
    dense_forward,
    init_dense,
    init_recurrent,
    recurrent_step,
)
from .tensor import Tensor, no_grad

__all__ = [
    "AdamState",
    "ParameterStore",
    "RecurrentState",
    "Tensor",
    "adam_update",
    "dense_forward",
    "init_dense",
    "init_recurrent",
    "lognormal_entropy",
    "lognormal_log_density",
    "lognormal_mean",
    "lognormal_sample",
    "no_grad",
    "recurrent_step",
    "sigmoid",
    "softmax",
    "softplus",
]
