"""Sparse-coding super resolution: per-patch coding, overlap blending,
and iterative backprojection toward LR consistency."""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from graysr.image import Image, Range, bicubic_resize, rescale_range
from graysr.image import _resample_rows  # array-level resize, no range clamp
from graysr.sparse.coder import sparse_code_batch
from graysr.sparse.dictionary import DictionaryPair, SparseParams, _patch_grid, gradient_features

CODE_CHUNK = 4096
FLAT_FEATURE_NORM = 1e-8


def _resize_array(data: np.ndarray, out_w: int, out_h: int) -> np.ndarray:
    data = _resample_rows(data, out_h)
    return _resample_rows(data.T, out_w).T


def backproject(sr: Image, lr: Image, scale: int, max_iters: int, on_step=None) -> Image:
    """Gradient-descent correction of ``sr`` toward downsample consistency.

    Each step bicubically upsamples the LR-domain residual and adds it with
    step size 1.0, halving the step whenever it would increase the residual
    norm; accepted steps therefore never increase it. Stops after
    ``max_iters`` steps or when the relative improvement drops below 1e-6.
    ``on_step`` receives the residual norm after each accepted step.
    """
    if (sr.width, sr.height) != (lr.width * scale, lr.height * scale):
        raise ValueError(
            f"geometry mismatch: sr {sr.width}x{sr.height} vs "
            f"lr {lr.width}x{lr.height} at scale {scale}"
        )
    lr = rescale_range(lr, sr.range)
    lo, hi = sr.range.lo, sr.range.hi
    current = sr.data.copy()
    resid = lr.data - _resize_array(current, lr.width, lr.height)
    norm = float(np.linalg.norm(resid))
    step = 1.0
    for _ in range(max_iters):
        if norm == 0.0:
            break
        update = _resize_array(resid, sr.width, sr.height)
        cand = None
        while step >= 1e-6:
            trial = np.clip(current + step * update, lo, hi)
            trial_resid = lr.data - _resize_array(trial, lr.width, lr.height)
            trial_norm = float(np.linalg.norm(trial_resid))
            if trial_norm <= norm:
                cand = (trial, trial_resid, trial_norm)
                break
            step *= 0.5
        if cand is None:
            break
        current, resid, new_norm = cand
        improved = (norm - new_norm) / max(norm, 1e-30)
        norm = new_norm
        if on_step is not None:
            on_step(norm)
        if improved < 1e-6:
            break
    return Image(current, sr.range)


def _code_patches(features: np.ndarray, pair: DictionaryPair, lam: float) -> np.ndarray:
    """Code feature columns (m, n) and return mean-removed HR patches (q, n).

    Features are scaled by 1/sqrt(m) (the training block balance) and
    normalized per patch for coding; near-flat patches skip coding and
    reconstruct as zero (the mean alone).
    """
    m, n = features.shape
    scaled = features / np.sqrt(m)
    t = np.linalg.norm(scaled, axis=0)
    active = t > FLAT_FEATURE_NORM
    out = np.zeros((pair.d_hr.shape[0], n))
    idx = np.flatnonzero(active)
    for start in range(0, len(idx), CODE_CHUNK):
        sel = idx[start : start + CODE_CHUNK]
        y = scaled[:, sel] / t[sel]
        codes = sparse_code_batch(y, pair.d_lr, lam)
        out[:, sel] = (pair.d_hr @ codes) * t[sel]
    return out


def _upscale_stage(lr: Image, pair: DictionaryPair, params: SparseParams) -> Image:
    p = params.patch_size
    mid = bicubic_resize(lr, lr.width * 2, lr.height * 2)
    if min(mid.width, mid.height) < p:
        raise ValueError("input image smaller than one patch after upscaling")
    feats = gradient_features(mid.data)
    ys = _patch_grid(mid.height, p, params.patch_stride)
    xs = _patch_grid(mid.width, p, params.patch_stride)
    grid_y, grid_x = [g.ravel() for g in np.meshgrid(ys, xs, indexing="ij")]

    feat_windows = sliding_window_view(feats, (p, p), axis=(1, 2))
    cols = feat_windows[:, grid_y, grid_x]  # (4, npos, p, p)
    features = cols.transpose(1, 0, 2, 3).reshape(len(grid_y), 4 * p * p).T
    mid_windows = sliding_window_view(mid.data, (p, p))
    means = mid_windows[grid_y, grid_x].mean(axis=(-2, -1))

    patches = _code_patches(features, pair, params.lam) + means
    patches = patches.T.reshape(len(grid_y), p, p)

    canvas = np.zeros_like(mid.data)
    count = np.zeros_like(mid.data)
    for dy in range(p):
        for dx in range(p):
            canvas[grid_y + dy, grid_x + dx] += patches[:, dy, dx]
            count[grid_y + dy, grid_x + dx] += 1.0
    blended = Image(np.clip(canvas / count, 0.0, 1.0), Range.UNIT01)
    return backproject(blended, lr, 2, params.max_backprojection_iters)


def super_resolve_sparse(
    lr: Image, pair: DictionaryPair, params: SparseParams, scale: int = 4
) -> Image:
    """Upscale by 2x stages (4x applies the stage twice, 8x three times)."""
    if scale not in (2, 4, 8):
        raise ValueError(f"scale must be 2, 4 or 8, got {scale}")
    if min(lr.width, lr.height) * 2 < params.patch_size:
        raise ValueError("LR image smaller than one patch")
    out_range = lr.range
    stage_input = rescale_range(lr, Range.UNIT01)
    stages = {2: 1, 4: 2, 8: 3}[scale]
    for _ in range(stages):
        stage_input = _upscale_stage(stage_input, pair, params)
    return rescale_range(stage_input, out_range)
