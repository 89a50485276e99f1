"""Residual despeckling network with from-scratch backpropagation."""

from .kernels import backend_name
from .layers import BatchNorm, Conv2D, ReLU
from .loss import composite_loss
from .model import LayerSpec, ResidualModel, default_layer_specs, load_checkpoint
from .optim import Adam, DivergenceError, lr_at
from .training import TrainConfig, train
from .infer import despeckle

__all__ = [
    "Adam", "BatchNorm", "Conv2D", "DivergenceError", "LayerSpec", "ReLU",
    "ResidualModel", "TrainConfig", "backend_name", "composite_loss",
    "default_layer_specs", "despeckle", "load_checkpoint", "lr_at", "train",
]
