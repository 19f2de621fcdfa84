"""Minimal dense network with reverse-mode gradients, Adam, and persistence."""

from .network import LayerSpec, NetworkSpec, Network, dense_spec
from .optim import AdamConfig, Adam, effective_lr
from .train import TrainConfig, TrainHistory, train
from .persist import ModelBundle, save_model, load_model

__all__ = [
    "LayerSpec",
    "NetworkSpec",
    "Network",
    "dense_spec",
    "AdamConfig",
    "Adam",
    "effective_lr",
    "TrainConfig",
    "TrainHistory",
    "train",
    "ModelBundle",
    "save_model",
    "load_model",
]
