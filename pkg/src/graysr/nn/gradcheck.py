"""Exhaustive central-difference verification of backward gradients."""

from __future__ import annotations

import numpy as np


def _sum_square_loss(y: np.ndarray):
    return 0.5 * float(np.sum(y * y)), y


def grad_check(net, x, eps: float = 1e-5, loss=None, train: bool = True) -> float:
    """Perturb every parameter entry and compare central finite differences
    against backward gradients; returns the maximum relative error.

    ``loss`` maps the network output to (scalar, gradient); default is
    0.5 * sum(y^2). Intended for networks small enough to perturb
    exhaustively.
    """
    loss = loss or _sum_square_loss
    x = np.asarray(x, dtype=np.float64)
    acts, caches = net.forward(x, train)
    _, gout = loss(acts[-1])
    analytic, _ = net.backward(acts, caches, gout)
    params = net.parameters()

    def eval_loss():
        a, _ = net.forward(x, train)
        return loss(a[-1])[0]

    # Entries far below the network's gradient scale are numerically zero;
    # flooring the denominator there keeps cancellation noise from reading
    # as a relative error.
    gmax = max((np.abs(g).max() for g in analytic if g.size), default=0.0)
    floor = max(1e-8, 1e-4 * gmax)

    worst = 0.0
    for p, g in zip(params, analytic):
        flat_p = p.reshape(-1)
        flat_g = g.reshape(-1)
        for i in range(flat_p.size):
            orig = flat_p[i]
            flat_p[i] = orig + eps
            hi = eval_loss()
            flat_p[i] = orig - eps
            lo = eval_loss()
            flat_p[i] = orig
            fd = (hi - lo) / (2.0 * eps)
            an = flat_g[i]
            rel = abs(fd - an) / max(abs(fd), abs(an), floor)
            worst = max(worst, rel)
    return worst
