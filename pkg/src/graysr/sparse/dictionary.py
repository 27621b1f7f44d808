"""Coupled LR-feature / HR-patch dictionary learning for sparse-coding SR.

Training pairs a mean-removed HR patch with gradient features of the
bicubic-upscaled LR rendition at the same location. The two blocks are
balanced by 1/sqrt(dim) and jointly normalized, then a single dictionary is
learned by alternating sparse coding with a least-squares (method of optimal
directions) update; a safeguard keeps the recorded objective non-increasing.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from graysr.image import Image, Range, bicubic_resize, center_crop_to_multiple, rescale_range
from graysr.sparse.coder import sparse_code_batch

DICT_MAGIC = b"SRDICT1"


@dataclass(frozen=True)
class SparseParams:
    """Hyperparameters of the sparse-representation method."""

    lam: float = 0.2
    max_backprojection_iters: int = 20
    patch_size: int = 5
    patch_stride: int = 1
    atoms: int = 512

    def __post_init__(self):
        if self.lam <= 0:
            raise ValueError(f"lam must be > 0, got {self.lam}")
        if self.max_backprojection_iters < 0:
            raise ValueError("max_backprojection_iters must be >= 0")
        if not 1 <= self.patch_stride <= self.patch_size:
            raise ValueError(
                f"stride must be in [1, patch_size], got {self.patch_stride}"
            )
        if self.atoms < 1:
            raise ValueError("atoms must be >= 1")


@dataclass(frozen=True)
class PatchDataset:
    """Matched HR patches (n, p^2) and LR gradient features (n, 4*p^2)."""

    hr_patches: np.ndarray
    lr_features: np.ndarray
    patch_size: int
    scale: int = 2  # per-stage upscaling factor

    def __post_init__(self):
        if len(self.hr_patches) != len(self.lr_features):
            raise ValueError("hr_patches and lr_features must have equal length")
        if self.hr_patches.shape[1] != self.patch_size**2:
            raise ValueError("hr patch vectors must have length patch_size^2")

    def __len__(self) -> int:
        return len(self.hr_patches)


@dataclass(frozen=True)
class DictionaryPair:
    """Coupled dictionaries: d_lr has unit-norm columns, d_hr maps codes to patches."""

    d_lr: np.ndarray
    d_hr: np.ndarray

    def __post_init__(self):
        if self.d_lr.shape[1] != self.d_hr.shape[1]:
            raise ValueError("d_lr and d_hr must have the same number of atoms")
        norms = np.linalg.norm(self.d_lr, axis=0)
        if not np.allclose(norms, 1.0, atol=1e-8):
            raise ValueError("d_lr columns must have unit Euclidean norm")

    @property
    def atoms(self) -> int:
        return self.d_lr.shape[1]

    @property
    def patch_size(self) -> int:
        return int(round(self.d_hr.shape[0] ** 0.5))


def gradient_features(data: np.ndarray) -> np.ndarray:
    """First- and second-order gradient responses, shape (4, H, W).

    Filters [-1, 0, 1] and [1, 0, -2, 0, 1], applied horizontally and
    vertically with replicated edges.
    """
    padded = np.pad(data, 2, mode="edge")
    core = padded[2:-2, 2:-2]
    g1h = padded[2:-2, 3:-1] - padded[2:-2, 1:-3]
    g1v = padded[3:-1, 2:-2] - padded[1:-3, 2:-2]
    g2h = padded[2:-2, 4:] - 2.0 * core + padded[2:-2, :-4]
    g2v = padded[4:, 2:-2] - 2.0 * core + padded[:-4, 2:-2]
    return np.stack([g1h, g1v, g2h, g2v])


def _patch_grid(length: int, patch: int, stride: int) -> np.ndarray:
    last = length - patch
    pos = list(range(0, last + 1, stride))
    if pos[-1] != last:
        pos.append(last)
    return np.asarray(pos)


def sample_patch_pairs(
    hr_images: Sequence[Image],
    per_image: int,
    params: SparseParams,
    seed: int,
    scale: int = 2,
) -> PatchDataset:
    """Draw ``per_image`` seeded random patch pairs from each HR image.

    The LR rendition is a bicubic 1/scale downsample; features are computed
    on its bicubic upscale back to HR size. Intensities work in [0, 1].
    """
    if per_image < 1:
        raise ValueError("per_image must be >= 1")
    p = params.patch_size
    rng = np.random.default_rng(seed)
    hr_vecs, feat_vecs = [], []
    for img in hr_images:
        if min(img.width, img.height) < p * scale:
            raise ValueError(
                f"image {img.width}x{img.height} smaller than "
                f"{p * scale}x{p * scale} (patch_size * scale)"
            )
        hr = rescale_range(center_crop_to_multiple(img, scale), Range.UNIT01)
        lr = bicubic_resize(hr, hr.width // scale, hr.height // scale)
        mid = bicubic_resize(lr, hr.width, hr.height)
        feats = gradient_features(mid.data)
        xs = rng.integers(0, hr.width - p + 1, size=per_image)
        ys = rng.integers(0, hr.height - p + 1, size=per_image)
        for x0, y0 in zip(xs, ys):
            patch = hr.data[y0 : y0 + p, x0 : x0 + p].ravel()
            hr_vecs.append(patch - patch.mean())
            feat_vecs.append(feats[:, y0 : y0 + p, x0 : x0 + p].ravel())
    return PatchDataset(
        hr_patches=np.asarray(hr_vecs),
        lr_features=np.asarray(feat_vecs),
        patch_size=p,
        scale=scale,
    )


def joint_matrix(data: PatchDataset) -> np.ndarray:
    """Stacked training vectors (feature block over HR block), jointly normalized."""
    m = data.lr_features.shape[1]
    q = data.hr_patches.shape[1]
    joint = np.vstack([data.lr_features.T / np.sqrt(m), data.hr_patches.T / np.sqrt(q)])
    norms = np.linalg.norm(joint, axis=0)
    return joint / np.maximum(norms, 1e-12)


def _objective(x, d, codes, lam):
    resid = x - d @ codes
    return 0.5 * float(np.sum(resid * resid)) + lam * float(np.sum(np.abs(codes)))


def train_dictionaries(
    data: PatchDataset,
    params: SparseParams,
    iters: int,
    seed: int,
    on_iteration: Callable[[int, np.ndarray, np.ndarray], None] | None = None,
) -> DictionaryPair:
    """Learn the coupled dictionary pair by alternating optimization.

    Each iteration sparse-codes the joint vectors (warm-started) and then
    updates the dictionary by least squares, renormalizing columns with the
    codes rescaled to preserve the reconstruction. A candidate update is
    rejected if it would increase the objective, so the post-coding objective
    sequence is non-increasing by construction. ``on_iteration`` receives
    (iteration, joint_dictionary, codes) after each coding step.
    """
    if len(data) == 0:
        raise ValueError("empty patch dataset")
    if params.atoms > len(data):
        raise ValueError(f"atoms ({params.atoms}) exceed sample count ({len(data)})")
    x = joint_matrix(data)
    dim, n = x.shape
    atoms = params.atoms
    rng = np.random.default_rng(seed)

    eligible = np.flatnonzero(np.linalg.norm(x, axis=0) > 1e-9)
    if len(eligible) < atoms:
        raise ValueError("not enough non-degenerate samples to seed the dictionary")
    chosen = rng.choice(eligible, size=atoms, replace=False)
    d = x[:, chosen].copy()
    d /= np.linalg.norm(d, axis=0, keepdims=True)

    codes = None
    prev_obj = np.inf
    for it in range(iters):
        codes = sparse_code_batch(x, d, params.lam, init=codes)
        obj = _objective(x, d, codes, params.lam)
        assert obj <= prev_obj + 1e-9
        prev_obj = obj
        if on_iteration is not None:
            on_iteration(it, d, codes)

        # Method of optimal directions: D <- X A^T (A A^T)^-1, small ridge
        # for rank-deficient code matrices.
        gram = codes @ codes.T
        gram[np.diag_indices_from(gram)] += 1e-10
        d_new = np.linalg.solve(gram, codes @ x.T).T

        norms = np.linalg.norm(d_new, axis=0)
        dead = norms < 1e-9
        if dead.any():
            resid = x - d_new @ codes
            worst = np.argsort(-np.linalg.norm(resid, axis=0))
            for k, j in enumerate(np.flatnonzero(dead)):
                d_new[:, j] = x[:, worst[k % n]]
            norms = np.linalg.norm(d_new, axis=0)
            norms[norms < 1e-12] = 1.0
        cand_d = d_new / norms
        cand_codes = codes * norms[:, None]
        if _objective(x, cand_d, cand_codes, params.lam) <= obj + 1e-12:
            d, codes = cand_d, cand_codes

    return split_dictionary(d, data)


def split_dictionary(d_joint: np.ndarray, data: PatchDataset) -> DictionaryPair:
    """Split a joint dictionary into the inference pair.

    The feature block is renormalized to unit columns; the HR block absorbs
    the inverse factors and the block scalings so that a code produced
    against d_lr maps directly to a mean-removed HR patch (up to the
    per-patch feature-norm factor applied at inference).
    """
    m = data.lr_features.shape[1]
    q = data.hr_patches.shape[1]
    u = d_joint[:m, :]
    v = d_joint[m:, :]
    s = np.linalg.norm(u, axis=0)
    s = np.maximum(s, 1e-12)
    return DictionaryPair(d_lr=u / s, d_hr=np.sqrt(q) * v / s)


def save_dictionary(pair: DictionaryPair, path) -> None:
    """Flat binary: magic, int32-LE dims (feature_dim, patch_dim, atoms),
    then d_lr and d_hr as float64-LE, column-major."""
    path = Path(path)
    m, atoms = pair.d_lr.shape
    q = pair.d_hr.shape[0]
    with open(path, "wb") as fh:
        fh.write(DICT_MAGIC)
        fh.write(struct.pack("<iii", m, q, atoms))
        fh.write(np.asfortranarray(pair.d_lr).tobytes(order="F"))
        fh.write(np.asfortranarray(pair.d_hr).tobytes(order="F"))


def load_dictionary(path) -> DictionaryPair:
    path = Path(path)
    raw = path.read_bytes()
    if raw[: len(DICT_MAGIC)] != DICT_MAGIC:
        raise ValueError(f"{path}: not a dictionary file (bad magic)")
    m, q, atoms = struct.unpack_from("<iii", raw, len(DICT_MAGIC))
    off = len(DICT_MAGIC) + 12
    d_lr = np.frombuffer(raw, dtype="<f8", count=m * atoms, offset=off)
    d_lr = d_lr.reshape((m, atoms), order="F")
    off += m * atoms * 8
    d_hr = np.frombuffer(raw, dtype="<f8", count=q * atoms, offset=off)
    d_hr = d_hr.reshape((q, atoms), order="F")
    return DictionaryPair(d_lr=d_lr.copy(), d_hr=d_hr.copy())
