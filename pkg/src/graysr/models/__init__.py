from graysr.models.extractor import FeatureExtractor, identity_extractor, surrogate_extractor
from graysr.models.losses import (
    LossReport,
    adversarial_gen_loss,
    content_loss,
    discriminator_loss,
    feature_loss,
    mse_loss,
    perceptual_loss,
)
from graysr.models.zoo import build_model
from graysr.models.train import StepRecord, TrainPlan, TrainResult, train, write_loss_csv
from graysr.models.infer import super_resolve

__all__ = [
    "FeatureExtractor",
    "LossReport",
    "StepRecord",
    "TrainPlan",
    "TrainResult",
    "adversarial_gen_loss",
    "build_model",
    "content_loss",
    "discriminator_loss",
    "feature_loss",
    "identity_extractor",
    "mse_loss",
    "perceptual_loss",
    "super_resolve",
    "surrogate_extractor",
    "train",
    "write_loss_csv",
]
