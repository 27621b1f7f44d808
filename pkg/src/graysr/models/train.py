"""Training loops for the three models.

SRCNN minimizes pixel MSE on bicubically pre-upscaled inputs; the residual
generator minimizes the content loss; the adversarial schedule pretrains the
generator on content loss alone, then alternates one discriminator step and
one generator step (perceptual loss) per batch. Everything is driven by a
single seeded generator, so identical plans produce identical checkpoints.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from graysr.image import Image, Range, bicubic_resize, random_crop, rescale_range
from graysr.models.extractor import FeatureExtractor
from graysr.models.losses import (
    LossReport,
    adversarial_gen_loss_grad,
    discriminator_loss_grad,
    feature_loss_grad,
    mse_loss_grad,
)
from graysr.models.zoo import build_model
from graysr.nn import AdamState, Network, adam_update

MODELS = ("srcnn", "srresnet", "srgan")

LOSS_COLUMNS = ("step", "l_mse", "l_feat", "l_content", "l_gen", "l_perceptual", "l_disc")


@dataclass(frozen=True)
class TrainPlan:
    """Training configuration; None fields resolve to per-model defaults
    (srcnn: 500 epochs, batch 128; srresnet: 50 epochs; srgan: 20 + 50
    epochs; batch 16 for the generator models)."""

    model: str
    scale: int = 4
    pretrain_epochs: int | None = None
    adversarial_epochs: int | None = None
    total_epochs: int | None = None
    batch: int | None = None
    lr: float = 1e-4
    beta1: float = 0.9
    mse_weight: float = 1.0
    vgg_weight: float = 1.0
    adv_weight: float = 1e-3
    seed: int = 0
    width: int | None = None
    blocks: int | None = None
    disc_width: int | None = None
    crop: int = 224

    def __post_init__(self):
        if self.model not in MODELS:
            raise ValueError(f"model must be one of {MODELS}, got {self.model!r}")
        if self.scale not in (4, 8):
            raise ValueError(f"scale must be 4 or 8, got {self.scale}")
        if self.crop % self.scale:
            raise ValueError(f"crop {self.crop} must be a multiple of scale {self.scale}")
        if min(self.mse_weight, self.vgg_weight, self.adv_weight) < 0:
            raise ValueError("loss weights must be >= 0")
        defaults = {
            "srcnn": {"total_epochs": 500, "batch": 128},
            "srresnet": {"total_epochs": 50, "batch": 16},
            "srgan": {"pretrain_epochs": 20, "adversarial_epochs": 50, "batch": 16},
        }[self.model]
        for name, value in defaults.items():
            if getattr(self, name) is None:
                object.__setattr__(self, name, value)
        if self.model == "srgan":
            if self.pretrain_epochs < 0 or self.adversarial_epochs < 0:
                raise ValueError("epoch counts must be >= 0")
        elif self.total_epochs < 0:
            raise ValueError("epoch counts must be >= 0")
        if self.batch < 1:
            raise ValueError("batch must be >= 1")

    @property
    def epochs(self) -> int:
        if self.model == "srgan":
            return self.pretrain_epochs + self.adversarial_epochs
        return self.total_epochs


@dataclass(frozen=True)
class StepRecord:
    epoch: int
    step: int
    report: LossReport


@dataclass
class TrainResult:
    networks: dict
    records: list = field(default_factory=list)

    @property
    def model(self) -> Network:
        return self.networks["model"]


def _make_batches(corpus, plan: TrainPlan, rng) -> list:
    """One seeded random crop per corpus image, shuffled and batched.

    Returns a list of (hr, lr) float arrays in [-1, 1], shapes
    (B, 1, c, c) and (B, 1, c/r, c/r).
    """
    order = rng.permutation(len(corpus))
    c, r = plan.crop, plan.scale
    hr_crops = []
    for i in order:
        crop = random_crop(corpus[i], c, seed=int(rng.integers(2**63)))
        hr_crops.append(rescale_range(crop, Range.SIGNED11))
    batches = []
    for start in range(0, len(hr_crops), plan.batch):
        chunk = hr_crops[start : start + plan.batch]
        hr = np.stack([im.data for im in chunk])[:, None]
        lr = np.stack(
            [bicubic_resize(im, c // r, c // r).data for im in chunk]
        )[:, None]
        batches.append((hr, lr))
    return batches


def _content_grads(sr, hr, phi, plan):
    v_mse, g_mse = mse_loss_grad(sr, hr, plan.scale)
    if plan.vgg_weight > 0 and phi is not None:
        v_feat, g_feat = feature_loss_grad(sr, hr, phi)
    else:
        v_feat, g_feat = 0.0, np.zeros_like(sr)
    l_mse = plan.mse_weight * v_mse
    l_feat = plan.vgg_weight * v_feat
    grad = plan.mse_weight * g_mse + plan.vgg_weight * g_feat
    return l_mse, l_feat, grad


def train(plan: TrainPlan, corpus, phi: FeatureExtractor | None = None) -> TrainResult:
    """Run the plan over HR images; returns networks plus per-step reports.

    ``phi`` is required for the generator models. The loss identities
    (content = mse + feat, perceptual = content + adv_weight * gen) are
    asserted at every step.
    """
    if not corpus:
        raise ValueError("training corpus is empty")
    if plan.model in ("srresnet", "srgan") and phi is None and plan.vgg_weight > 0:
        raise ValueError(f"{plan.model} training requires a feature extractor")

    rng = np.random.default_rng(plan.seed)
    if plan.model == "srcnn":
        net = build_model("srcnn", plan.scale, width=plan.width,
                          seed=int(rng.integers(2**63)))
        networks = {"model": net}
    else:
        gen = build_model("srresnet_generator", plan.scale, width=plan.width,
                          blocks=plan.blocks, seed=int(rng.integers(2**63)))
        networks = {"model": gen}
        if plan.model == "srgan":
            networks["discriminator"] = build_model(
                "discriminator", plan.scale, width=plan.disc_width,
                seed=int(rng.integers(2**63)), input_size=plan.crop)

    states = {
        name: AdamState.for_params(net.parameters(), lr=plan.lr, beta1=plan.beta1)
        for name, net in networks.items()
    }

    result = TrainResult(networks=networks)
    step = 0
    pretrain = plan.pretrain_epochs if plan.model == "srgan" else plan.epochs
    for epoch in range(plan.epochs):
        adversarial = epoch >= pretrain
        for hr, lr in _make_batches(corpus, plan, rng):
            report = _train_step(plan, networks, states, hr, lr, phi, adversarial)
            report.validate(plan.adv_weight)
            result.records.append(StepRecord(epoch=epoch, step=step, report=report))
            step += 1
    return result


def _train_step(plan, networks, states, hr, lr, phi, adversarial) -> LossReport:
    model = networks["model"]
    if plan.model == "srcnn":
        c = hr.shape[-1]
        pre = np.stack(
            [
                bicubic_resize(Image(im[0], Range.SIGNED11), c, c).data
                for im in lr
            ]
        )[:, None]
        acts, caches = model.forward(pre, train=True)
        v_mse, g = mse_loss_grad(acts[-1], hr, plan.scale)
        grads, _ = model.backward(acts, caches, g)
        adam_update(model.parameters(), grads, states["model"])
        return LossReport(l_mse=v_mse, l_feat=0.0, l_content=v_mse,
                          l_gen=0.0, l_perceptual=v_mse, l_disc=None)

    l_disc = None
    if adversarial:
        disc = networks["discriminator"]
        sr_fixed = model.forward(lr, train=True)[0][-1]
        acts_r, caches_r = disc.forward(hr, train=True)
        acts_f, caches_f = disc.forward(sr_fixed, train=True)
        d_real, d_fake = acts_r[-1], acts_f[-1]
        l_disc, g_real, g_fake = discriminator_loss_grad(d_real.ravel(), d_fake.ravel())
        grads_r, _ = disc.backward(acts_r, caches_r, g_real.reshape(d_real.shape))
        grads_f, _ = disc.backward(acts_f, caches_f, g_fake.reshape(d_fake.shape))
        grads_d = [a + b for a, b in zip(grads_r, grads_f)]
        adam_update(disc.parameters(), grads_d, states["discriminator"])

    acts_g, caches_g = model.forward(lr, train=True)
    sr = acts_g[-1]
    l_mse, l_feat, g_sr = _content_grads(sr, hr, phi, plan)
    l_gen = 0.0
    if adversarial:
        disc = networks["discriminator"]
        acts_d, caches_d = disc.forward(sr, train=True)
        d_out = acts_d[-1]
        l_gen, g_dout = adversarial_gen_loss_grad(d_out.ravel())
        _, g_sr_adv = disc.backward(acts_d, caches_d, g_dout.reshape(d_out.shape))
        g_sr = g_sr + plan.adv_weight * g_sr_adv
    grads_g, _ = model.backward(acts_g, caches_g, g_sr)
    adam_update(model.parameters(), grads_g, states["model"])

    l_content = l_mse + l_feat
    return LossReport(
        l_mse=l_mse,
        l_feat=l_feat,
        l_content=l_content,
        l_gen=l_gen,
        l_perceptual=l_content + plan.adv_weight * l_gen,
        l_disc=l_disc,
    )


def write_loss_csv(records, path) -> None:
    """Per-step loss series; l_disc is empty for steps without a D update."""
    with open(Path(path), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(LOSS_COLUMNS)
        for rec in records:
            r = rec.report
            writer.writerow(
                [
                    rec.step,
                    repr(r.l_mse),
                    repr(r.l_feat),
                    repr(r.l_content),
                    repr(r.l_gen),
                    repr(r.l_perceptual),
                    "" if r.l_disc is None else repr(r.l_disc),
                ]
            )


def read_loss_csv(path) -> list:
    """Parse a loss CSV back into StepRecords."""
    records = []
    with open(Path(path), newline="") as fh:
        for row in csv.DictReader(fh):
            report = LossReport(
                l_mse=float(row["l_mse"]),
                l_feat=float(row["l_feat"]),
                l_content=float(row["l_content"]),
                l_gen=float(row["l_gen"]),
                l_perceptual=float(row["l_perceptual"]),
                l_disc=float(row["l_disc"]) if row["l_disc"] else None,
            )
            records.append(StepRecord(epoch=-1, step=int(row["step"]), report=report))
    return records
