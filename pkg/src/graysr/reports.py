"""Evaluation reports: per-method metric aggregation, aligned text tables,
versioned JSON, delimited CSV, and rendered figures."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from graysr.image import load_image
from graysr.metrics import psnr, ssim

REPORT_SCHEMA = 1

# canonical column order for the comparison table
METHOD_ORDER = ("bicubic", "sparse", "srcnn", "srresnet", "srgan")
DISPLAY_NAMES = {
    "bicubic": "Bicubic",
    "sparse": "Sparse Rep.",
    "srcnn": "SRCNN",
    "srresnet": "SRResNet",
    "srgan": "SRGAN",
    "lr": "LR",
    "hr": "HR",
}


@dataclass(frozen=True)
class EvalRow:
    method: str
    psnr_db: float
    ssim: float
    mos: float | None = None


def order_methods(methods) -> list:
    """Canonical ordering; unknown methods follow alphabetically."""
    known = [m for m in METHOD_ORDER if m in methods]
    extra = sorted(m for m in methods if m not in METHOD_ORDER)
    return known + extra


def evaluate_methods(manifest: dict, manifest_dir, sr_dirs: dict, mos_by_method=None):
    """Mean PSNR/SSIM per method over every manifest pair.

    ``sr_dirs`` maps method name to a directory holding one <name>.png per
    pair. Raises if any SR image is missing.
    """
    manifest_dir = Path(manifest_dir)
    mos_by_method = mos_by_method or {}
    rows = []
    for method in order_methods(sr_dirs):
        sr_dir = Path(sr_dirs[method])
        psnrs, ssims = [], []
        for pair in manifest["pairs"]:
            hr = load_image(manifest_dir / pair["hr"])
            sr_path = sr_dir / f"{pair['name']}.png"
            if not sr_path.exists():
                raise FileNotFoundError(
                    f"missing SR image for pair {pair['name']!r}: {sr_path}"
                )
            sr = load_image(sr_path)
            psnrs.append(psnr(sr, hr))
            ssims.append(ssim(sr, hr))
        mean_psnr = math.inf if any(math.isinf(p) for p in psnrs) else float(np.mean(psnrs))
        rows.append(
            EvalRow(
                method=method,
                psnr_db=mean_psnr,
                ssim=float(np.mean(ssims)),
                mos=mos_by_method.get(method),
            )
        )
    return rows


def _fmt_psnr(value: float) -> str:
    return "inf" if math.isinf(value) else f"{value:.2f}"


def render_text_table(rows) -> str:
    """Aligned comparison table, methods as columns."""
    headers = [DISPLAY_NAMES.get(r.method, r.method) for r in rows]
    lines = [
        ("PSNR [dB]", [_fmt_psnr(r.psnr_db) for r in rows]),
        ("SSIM", [f"{r.ssim:.4f}" for r in rows]),
    ]
    if any(r.mos is not None for r in rows):
        lines.append(
            ("MOS", ["-" if r.mos is None else f"{r.mos:.2f}" for r in rows])
        )
    label_w = max(len(label) for label, _ in lines)
    col_w = [max(len(h), max(len(vals[i]) for _, vals in lines)) for i, h in enumerate(headers)]
    col_w = [max(w, len(h)) for w, h in zip(col_w, headers)]
    out = [" " * label_w + "  " + "  ".join(h.rjust(w) for h, w in zip(headers, col_w))]
    for label, vals in lines:
        out.append(label.ljust(label_w) + "  " + "  ".join(v.rjust(w) for v, w in zip(vals, col_w)))
    return "\n".join(out)


def write_report_json(rows, path, scale=None) -> None:
    """Versioned JSON; infinite PSNR serializes as the string sentinel "inf"."""
    payload = {
        "schema": REPORT_SCHEMA,
        "methods": [
            {
                "method": r.method,
                "psnr_db": "inf" if math.isinf(r.psnr_db) else r.psnr_db,
                "ssim": r.ssim,
                "mos": r.mos,
            }
            for r in rows
        ],
    }
    if scale is not None:
        payload["scale"] = scale
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def write_report_csv(rows, path) -> None:
    with open(Path(path), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["method", "psnr_db", "ssim", "mos"])
        for r in rows:
            writer.writerow(
                [
                    r.method,
                    "inf" if math.isinf(r.psnr_db) else repr(r.psnr_db),
                    repr(r.ssim),
                    "" if r.mos is None else repr(r.mos),
                ]
            )


def render_metrics_figure(rows, path) -> None:
    """PSNR/SSIM (and MOS when present) bars per method."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    names = [DISPLAY_NAMES.get(r.method, r.method) for r in rows]
    have_mos = any(r.mos is not None for r in rows)
    n_panels = 3 if have_mos else 2
    fig, axes = plt.subplots(1, n_panels, figsize=(4.2 * n_panels, 3.4))
    psnr_vals = [0.0 if math.isinf(r.psnr_db) else r.psnr_db for r in rows]
    axes[0].bar(names, psnr_vals, color="#4878a8")
    axes[0].set_ylabel("PSNR [dB]")
    axes[1].bar(names, [r.ssim for r in rows], color="#6aa84f")
    axes[1].set_ylabel("SSIM")
    axes[1].set_ylim(0, 1)
    if have_mos:
        axes[2].bar(names, [r.mos or 0.0 for r in rows], color="#b46ac8")
        axes[2].set_ylabel("MOS")
        axes[2].set_ylim(0, 5)
    for ax in axes:
        ax.tick_params(axis="x", rotation=30)
    fig.tight_layout()
    fig.savefig(path, dpi=110, metadata={"Software": "graysr"})
    plt.close(fig)


def render_loss_figure(records, path) -> None:
    """Per-step training loss curves next to the loss CSV."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    steps = [r.step for r in records]
    fig, ax = plt.subplots(figsize=(7.2, 4.2))
    for field, label in [
        ("l_mse", "pixel MSE"),
        ("l_feat", "feature"),
        ("l_content", "content"),
        ("l_perceptual", "perceptual"),
    ]:
        ax.plot(steps, [getattr(r.report, field) for r in records], label=label, lw=1.0)
    disc_steps = [r.step for r in records if r.report.l_disc is not None]
    if disc_steps:
        ax.plot(
            disc_steps,
            [r.report.l_disc for r in records if r.report.l_disc is not None],
            label="discriminator",
            lw=1.0,
            ls="--",
        )
    ax.set_xlabel("step")
    ax.set_ylabel("loss")
    ax.set_yscale("log")
    ax.legend(loc="upper right", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=110, metadata={"Software": "graysr"})
    plt.close(fig)
