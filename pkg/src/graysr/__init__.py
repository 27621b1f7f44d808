"""Grayscale single-image super-resolution toolkit.

Implements four SR methods at desk scale (bicubic interpolation, sparse
dictionary coding, SRCNN, SRResNet/SRGAN), the full loss stack used in
adversarial SR training, reference quality metrics (MSE/PSNR/SSIM/MOS),
and a blinded mean-opinion-score rating service.
"""

from graysr.image import Image, Range, ScaleFactor

__all__ = ["Image", "Range", "ScaleFactor"]
__version__ = "0.1.0"
