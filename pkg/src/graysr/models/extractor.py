"""Fixed convolutional feature extractor for the feature-space loss.

The default is a seeded 4-layer stride-1 stack (3 -> 16 -> 16 -> 32 -> 32,
3x3 kernels, relu between convolutions, tap at the last convolution). It is
a stand-in honoring the same interface as a pretrained deep extractor: any
object with frozen parameters, a 3-channel input contract and a feature-map
output can be plugged in instead.
"""

from __future__ import annotations

import numpy as np

from graysr.nn import Conv2d, Network, ReLU


class FeatureExtractor:
    """Non-trainable network wrapper exposing features and input gradients."""

    def __init__(self, network: Network):
        self.net = network
        for arr in network.parameters():
            arr.flags.writeable = False  # parameters are immutable by contract

    @property
    def input_channels(self) -> int:
        for layer in self.net.layers:
            if isinstance(layer, Conv2d):
                return layer.in_ch
        return 3

    def features(self, x: np.ndarray) -> np.ndarray:
        return self.net.forward(x, train=False)[0][-1]

    def features_with_state(self, x: np.ndarray):
        acts, caches = self.net.forward(x, train=False)
        return acts[-1], (acts, caches)

    def input_grad(self, state, grad_features: np.ndarray) -> np.ndarray:
        acts, caches = state
        _, gx = self.net.backward(acts, caches, grad_features)
        return gx


def surrogate_extractor(seed: int = 0) -> FeatureExtractor:
    """Deterministic stand-in extractor; expects 3-channel input in [-1, 1]."""
    rng = np.random.default_rng(seed)
    widths = [(3, 16), (16, 16), (16, 32), (32, 32)]
    layers = []
    for i, (cin, cout) in enumerate(widths):
        layers.append(
            Conv2d(cin, cout, 3, padding="zero", seed=int(rng.integers(2**63)))
        )
        if i < len(widths) - 1:
            layers.append(ReLU())
    return FeatureExtractor(Network(layers, meta={"role": "feature_extractor"}))


def identity_extractor() -> FeatureExtractor:
    """Pass-through tap; features equal the input. Used in tests."""
    return FeatureExtractor(Network([]))
