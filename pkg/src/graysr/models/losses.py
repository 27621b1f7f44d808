"""The SR training loss stack.

Pixel MSE, feature-space MSE through a fixed extractor, their weighted sum
(content), the adversarial generator term, the combined perceptual loss, and
the discriminator loss. Logarithms are natural; probabilities are clamped at
1e-12 so a saturated discriminator yields a large finite loss instead of an
infinity. The ``*_grad`` variants also return the gradient with respect to
the super-resolved batch, for the training loop.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from graysr.models.extractor import FeatureExtractor

LOG_CLAMP = 1e-12
ADV_WEIGHT = 1e-3


@dataclass(frozen=True)
class LossReport:
    """Per-step loss values; l_disc is None for steps without a D update."""

    l_mse: float
    l_feat: float
    l_content: float
    l_gen: float
    l_perceptual: float
    l_disc: float | None = None

    def validate(self, adv_weight: float = ADV_WEIGHT, tol: float = 1e-9) -> None:
        if abs(self.l_content - (self.l_mse + self.l_feat)) > tol:
            raise AssertionError(
                f"content identity violated: {self.l_content} != "
                f"{self.l_mse} + {self.l_feat}"
            )
        if abs(self.l_perceptual - (self.l_content + adv_weight * self.l_gen)) > tol:
            raise AssertionError(
                f"perceptual identity violated: {self.l_perceptual} != "
                f"{self.l_content} + {adv_weight} * {self.l_gen}"
            )


def _check_pair(sr: np.ndarray, hr: np.ndarray):
    if sr.shape != hr.shape:
        raise ValueError(f"shape mismatch: sr {sr.shape} vs hr {hr.shape}")


def mse_loss(sr: np.ndarray, hr: np.ndarray, scale: int = 1) -> float:
    """Pixel-wise squared error averaged over the HR pixel grid."""
    return mse_loss_grad(sr, hr, scale)[0]


def mse_loss_grad(sr: np.ndarray, hr: np.ndarray, scale: int = 1):
    _check_pair(sr, hr)
    if scale > 1 and (sr.shape[-1] % scale or sr.shape[-2] % scale):
        raise ValueError(
            f"HR dims {sr.shape[-2:]} not a multiple of the scale factor {scale}"
        )
    diff = sr - hr
    n = diff.size
    return float(np.mean(diff * diff)), (2.0 / n) * diff


def _replicate3(x: np.ndarray, channels: int) -> np.ndarray:
    if x.shape[1] == channels:
        return x
    if x.shape[1] != 1:
        raise ValueError(f"expected 1-channel input, got {x.shape[1]} channels")
    return np.repeat(x, channels, axis=1)


def feature_loss(sr: np.ndarray, hr: np.ndarray, phi: FeatureExtractor) -> float:
    """Mean squared feature-map difference; grayscale planes are replicated
    to the extractor's channel count for this step only."""
    return feature_loss_grad(sr, hr, phi)[0]


def feature_loss_grad(sr: np.ndarray, hr: np.ndarray, phi: FeatureExtractor):
    _check_pair(sr, hr)
    ch = phi.input_channels
    sr3 = _replicate3(sr, ch)
    hr3 = _replicate3(hr, ch)
    f_sr, state = phi.features_with_state(sr3)
    f_hr = phi.features(hr3)
    diff = f_sr - f_hr
    value = float(np.mean(diff * diff))
    grad_sr3 = phi.input_grad(state, (2.0 / diff.size) * diff)
    # replicated planes: channel gradients sum back onto the single plane
    grad_sr = grad_sr3 if sr.shape[1] == ch else grad_sr3.sum(axis=1, keepdims=True)
    return value, grad_sr


def content_loss(
    sr: np.ndarray,
    hr: np.ndarray,
    phi: FeatureExtractor,
    mse_weight: float = 1.0,
    vgg_weight: float = 1.0,
) -> float:
    return content_loss_grad(sr, hr, phi, mse_weight, vgg_weight)[0]


def content_loss_grad(sr, hr, phi, mse_weight=1.0, vgg_weight=1.0, scale=1):
    if mse_weight < 0 or vgg_weight < 0:
        raise ValueError("loss weights must be non-negative")
    v_mse, g_mse = mse_loss_grad(sr, hr, scale)
    if vgg_weight == 0.0:
        v_feat, g_feat = 0.0, np.zeros_like(sr)
    else:
        v_feat, g_feat = feature_loss_grad(sr, hr, phi)
    value = mse_weight * v_mse + vgg_weight * v_feat
    return value, mse_weight * g_mse + vgg_weight * g_feat


def _check_probs(d: np.ndarray, name: str):
    d = np.asarray(d, dtype=np.float64)
    if d.size and (d.min() < 0.0 or d.max() > 1.0):
        raise ValueError(f"{name} values must be probabilities in [0, 1]")
    return d


def adversarial_gen_loss(d_out) -> float:
    """Sum over the batch of -ln D(G(lr)), clamped at 1e-12."""
    return adversarial_gen_loss_grad(d_out)[0]


def adversarial_gen_loss_grad(d_out):
    d = _check_probs(d_out, "discriminator outputs")
    clamped = np.maximum(d, LOG_CLAMP)
    return float(np.sum(-np.log(clamped))), -1.0 / clamped


def perceptual_loss(content: float, gen: float, adv_weight: float = ADV_WEIGHT) -> float:
    """Content plus the 1e-3-weighted adversarial term."""
    if not (np.isfinite(content) and np.isfinite(gen)):
        raise ValueError("loss components must be finite")
    return content + adv_weight * gen


def discriminator_loss(d_real, d_fake) -> float:
    """-sum ln(d_real) - sum ln(1 - d_fake); real samples are HR crops."""
    value, _, _ = discriminator_loss_grad(d_real, d_fake)
    return value


def discriminator_loss_grad(d_real, d_fake):
    dr = _check_probs(d_real, "d_real")
    df = _check_probs(d_fake, "d_fake")
    cr = np.maximum(dr, LOG_CLAMP)
    cf = np.maximum(1.0 - df, LOG_CLAMP)
    value = float(np.sum(-np.log(cr)) + np.sum(-np.log(cf)))
    return value, -1.0 / cr, 1.0 / cf
