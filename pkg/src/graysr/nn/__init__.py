from graysr.nn.layers import (
    AddSkip,
    BatchNorm,
    Conv2d,
    Dense,
    Flatten,
    Layer,
    LeakyReLU,
    PixelShuffle,
    PReLU,
    ReLU,
    Sigmoid,
    kaiming_init,
)
from graysr.nn.network import Network, load_network, save_network
from graysr.nn.optim import AdamState, adam_update
from graysr.nn.gradcheck import grad_check

__all__ = [
    "AdamState",
    "AddSkip",
    "BatchNorm",
    "Conv2d",
    "Dense",
    "Flatten",
    "Layer",
    "LeakyReLU",
    "Network",
    "PixelShuffle",
    "PReLU",
    "ReLU",
    "Sigmoid",
    "adam_update",
    "grad_check",
    "kaiming_init",
    "load_network",
    "save_network",
]
