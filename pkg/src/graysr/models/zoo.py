"""Model builders: three-layer SRCNN, residual upsampling generator, and the
strided-conv discriminator."""

from __future__ import annotations

import numpy as np

from graysr.image import check_scale
from graysr.nn import (
    AddSkip,
    BatchNorm,
    Conv2d,
    Dense,
    Flatten,
    LeakyReLU,
    Network,
    PixelShuffle,
    PReLU,
    ReLU,
    Sigmoid,
)

MODEL_KINDS = ("srcnn", "srresnet_generator", "discriminator")

SRCNN_WIDTH = 64
GENERATOR_WIDTH = 32
GENERATOR_BLOCKS = 4
DISCRIMINATOR_WIDTH = 32
DISCRIMINATOR_DOWNSAMPLES = 4


def build_model(
    kind: str,
    scale: int = 4,
    width: int | None = None,
    blocks: int | None = None,
    seed: int = 0,
    input_size: int = 224,
) -> Network:
    """Construct one of the three SR networks with seeded Kaiming weights.

    ``input_size`` fixes the discriminator's dense head geometry (HR crop
    edge length); the other models are fully convolutional.
    """
    if kind not in MODEL_KINDS:
        raise ValueError(f"kind must be one of {MODEL_KINDS}, got {kind!r}")
    check_scale(scale)
    if scale not in (4, 8):
        raise ValueError(f"models are built for scale 4 or 8, got {scale}")
    rng = np.random.default_rng(seed)

    def s() -> int:
        return int(rng.integers(2**63))

    if kind == "srcnn":
        n1 = width or SRCNN_WIDTH
        n2 = max(1, n1 // 2)
        layers = [
            Conv2d(1, n1, 9, padding="reflective", seed=s()),
            ReLU(),
            Conv2d(n1, n2, 1, padding="none", seed=s()),
            ReLU(),
            Conv2d(n2, 1, 5, padding="reflective", seed=s()),
        ]
        meta = {"kind": kind, "scale": scale, "width": n1}
        return Network(layers, meta=meta)

    if kind == "srresnet_generator":
        w = width or GENERATOR_WIDTH
        b = blocks if blocks is not None else GENERATOR_BLOCKS
        layers = [
            Conv2d(1, w, 9, padding="zero", seed=s()),
            PReLU(w),
        ]
        entry_idx = len(layers) - 1  # output of the entry activation
        for _ in range(b):
            block_in = len(layers) - 1
            layers += [
                Conv2d(w, w, 3, padding="zero", seed=s()),
                BatchNorm(w),
                PReLU(w),
                Conv2d(w, w, 3, padding="zero", seed=s()),
                BatchNorm(w),
                AddSkip(block_in),
            ]
        layers.append(AddSkip(entry_idx))
        for _ in range(int(np.log2(scale))):
            layers += [
                Conv2d(w, w * 4, 3, padding="zero", seed=s()),
                PixelShuffle(2),
                PReLU(w),
            ]
        layers.append(Conv2d(w, 1, 9, padding="zero", seed=s()))
        meta = {"kind": kind, "scale": scale, "width": w, "blocks": b}
        return Network(layers, meta=meta)

    # discriminator
    w = width or DISCRIMINATOR_WIDTH
    downs = blocks if blocks is not None else DISCRIMINATOR_DOWNSAMPLES
    layers = [Conv2d(1, w, 3, padding="zero", seed=s()), LeakyReLU(0.2)]
    size = input_size
    ch = w
    for _ in range(downs):
        layers += [Conv2d(ch, ch * 2, 3, stride=2, padding="zero", seed=s()),
                   LeakyReLU(0.2)]
        ch *= 2
        size = (size + 1) // 2
    layers += [Flatten(), Dense(ch * size * size, 1, seed=s()), Sigmoid()]
    meta = {"kind": kind, "scale": scale, "width": w, "input_size": input_size}
    return Network(layers, meta=meta)
