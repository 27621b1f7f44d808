"""Single-image inference for the trained networks."""

from __future__ import annotations

import numpy as np

from graysr.image import Image, Range, bicubic_resize, rescale_range
from graysr.nn import Network


def super_resolve(model: Network, kind: str, lr: Image, scale: int) -> Image:
    """Upscale one LR image; returns a BYTE255 image of dims * scale.

    The SRCNN path bicubically pre-upscales and refines; generator paths
    upsample internally. Outputs are clamped to [-1, 1] before conversion.
    """
    if kind not in ("srcnn", "srresnet_generator"):
        raise ValueError(f"cannot run inference with model kind {kind!r}")
    meta_scale = model.meta.get("scale")
    if meta_scale is not None and meta_scale != scale:
        raise ValueError(f"model was built for scale {meta_scale}, requested {scale}")
    signed = rescale_range(lr, Range.SIGNED11)
    if kind == "srcnn":
        pre = bicubic_resize(signed, lr.width * scale, lr.height * scale)
        batch = pre.data[None, None]
    else:
        batch = signed.data[None, None]
    out = model.predict(batch)
    if out.shape != (1, 1, lr.height * scale, lr.width * scale):
        raise ValueError(
            f"model produced {out.shape[3]}x{out.shape[2]}, expected "
            f"{lr.width * scale}x{lr.height * scale}"
        )
    sr = Image(np.clip(out[0, 0], -1.0, 1.0), Range.SIGNED11)
    return rescale_range(sr, Range.BYTE255)
