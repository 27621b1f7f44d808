"""L1-regularized sparse coding via cyclic coordinate descent.

Solves min_a 0.5*||x - D a||^2 + lam*||a||_1 for dictionaries with unit-norm
columns. The batch variant shares the Gram matrix across many right-hand
sides, freezes samples as soon as they satisfy the optimality conditions,
and sweeps coordinates cyclically; each coordinate update is an exact
per-coordinate minimizer, so the objective never increases (the dictionary
trainer relies on this when warm-starting).
"""

from __future__ import annotations

import numpy as np

KKT_TOL = 1e-6
MAX_SWEEPS = 10000


def _soft(z: np.ndarray, lam: float) -> np.ndarray:
    return np.sign(z) * np.maximum(np.abs(z) - lam, 0.0)


def kkt_residual(codes: np.ndarray, grad: np.ndarray, lam: float) -> np.ndarray:
    """Max per-sample violation of the lasso optimality conditions.

    ``codes`` and ``grad`` are (atoms, n); ``grad`` is D^T (x - D a). Zero
    coefficients require |grad| <= lam; active ones grad == lam * sign(a).
    """
    return _kkt_rows(codes.T, grad.T, lam)


def _kkt_rows(codes_rows: np.ndarray, grad_rows: np.ndarray, lam: float) -> np.ndarray:
    # row-major variant: (n, atoms) -> per-row violation
    active = codes_rows != 0.0
    viol = np.where(
        active,
        np.abs(grad_rows - lam * np.sign(codes_rows)),
        np.maximum(np.abs(grad_rows) - lam, 0.0),
    )
    return viol.max(axis=1) if viol.size else np.zeros(len(codes_rows))


def sparse_code_batch(
    x: np.ndarray,
    dictionary: np.ndarray,
    lam: float,
    init: np.ndarray | None = None,
    tol: float = KKT_TOL,
    max_sweeps: int = MAX_SWEEPS,
) -> np.ndarray:
    """Code every column of ``x`` (dim, n) against ``dictionary`` (dim, atoms);
    returns codes of shape (atoms, n)."""
    dim, n = x.shape
    d_rows, atoms = dictionary.shape
    if d_rows != dim:
        raise ValueError(f"feature dim {dim} != dictionary rows {d_rows}")
    if lam <= 0:
        raise ValueError(f"sparsity weight must be positive, got {lam}")
    if n == 0:
        return np.zeros((atoms, 0))

    gram = dictionary.T @ dictionary
    corr = x.T @ dictionary  # (n, atoms)
    if init is None:
        codes = np.zeros((n, atoms))
        grad = corr.copy()
    else:
        if init.shape != (atoms, n):
            raise ValueError(f"init shape {init.shape} != {(atoms, n)}")
        codes = np.ascontiguousarray(init.T, dtype=np.float64)
        grad = corr - codes @ gram

    live = np.flatnonzero(_kkt_rows(codes, grad, lam) > tol)
    for _ in range(max_sweeps):
        if live.size == 0:
            break
        c = codes[live]
        g = grad[live]
        for j in range(atoms):
            z = c[:, j] + g[:, j]
            new = _soft(z, lam)
            delta = new - c[:, j]
            moved = np.flatnonzero(delta)
            if moved.size == 0:
                continue
            c[moved, j] = new[moved]
            g[moved] -= delta[moved, None] * gram[j]
        codes[live] = c
        grad[live] = g
        live = live[_kkt_rows(c, g, lam) > tol]
    return codes.T


def sparse_code(
    feature: np.ndarray,
    dictionary: np.ndarray,
    lam: float,
    init: np.ndarray | None = None,
    tol: float = KKT_TOL,
    max_sweeps: int = MAX_SWEEPS,
) -> np.ndarray:
    """Sparse code for a single feature vector; returns a length-``atoms`` vector."""
    feature = np.asarray(feature, dtype=np.float64)
    if feature.ndim != 1:
        raise ValueError(f"feature must be a vector, got shape {feature.shape}")
    init2 = None if init is None else np.asarray(init, dtype=np.float64)[:, None]
    codes = sparse_code_batch(
        feature[:, None], dictionary, lam, init=init2, tol=tol, max_sweeps=max_sweeps
    )
    return codes[:, 0]
