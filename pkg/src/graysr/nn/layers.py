"""Layer set for the SR networks: convolution, rectifiers, batch norm,
pixel shuffle, dense head. Activations are (batch, channels, H, W) float64;
dense layers operate on (batch, features).

Each layer exposes ordered ``params()``/``buffers()`` arrays (mutated in
place by the optimizer), a ``forward(x, train)`` returning the output plus a
cache, and a ``backward(grad, cache)`` returning the input gradient and
per-parameter gradients in ``params()`` order.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def kaiming_init(shape: tuple, seed: int) -> np.ndarray:
    """Seeded normal draw with variance 2/fan_in.

    fan_in is the product of all dimensions past the first (input channels
    times kernel area for conv kernels, input features for dense weights).
    """
    fan_in = int(np.prod(shape[1:]))
    if fan_in < 1:
        raise ValueError(f"fan_in must be >= 1 for shape {shape}")
    rng = np.random.default_rng(seed)
    return rng.normal(0.0, np.sqrt(2.0 / fan_in), size=shape)


def _reflect_indices(n: int, pad: int) -> np.ndarray:
    if pad >= n:
        raise ValueError(f"reflective padding {pad} needs input extent > {pad}")
    idx = np.abs(np.arange(-pad, n + pad))
    if n > 1:
        m = 2 * (n - 1)
        idx = idx % m
        idx = np.where(idx >= n, m - idx, idx)
    else:
        idx = np.zeros_like(idx)
    return idx


class Layer:
    kind = "layer"

    def params(self) -> list:
        return []

    def buffers(self) -> list:
        return []

    def forward(self, x, train):
        raise NotImplementedError

    def backward(self, grad, cache):
        raise NotImplementedError

    def spec(self) -> dict:
        return {"kind": self.kind}


class Conv2d(Layer):
    kind = "conv2d"

    def __init__(self, in_ch, out_ch, kernel, stride=1, padding="zero", seed=0):
        if padding not in ("none", "zero", "reflective"):
            raise ValueError(f"unknown padding {padding!r}")
        kh, kw = (kernel, kernel) if isinstance(kernel, int) else kernel
        self.in_ch, self.out_ch = in_ch, out_ch
        self.kh, self.kw = kh, kw
        self.stride = stride
        self.padding = padding
        self.weight = kaiming_init((out_ch, in_ch, kh, kw), seed)
        self.bias = np.zeros(out_ch)

    def params(self):
        return [self.weight, self.bias]

    def spec(self):
        return {
            "kind": self.kind,
            "in_ch": self.in_ch,
            "out_ch": self.out_ch,
            "kernel": [self.kh, self.kw],
            "stride": self.stride,
            "padding": self.padding,
        }

    def _pad_amounts(self):
        if self.padding == "none":
            return 0, 0
        return (self.kh - 1) // 2, (self.kw - 1) // 2

    def forward(self, x, train):
        b, c, h, w = x.shape
        if c != self.in_ch:
            raise ValueError(f"conv2d expects {self.in_ch} channels, got {c}")
        ph, pw = self._pad_amounts()
        if self.padding == "reflective" and (ph or pw):
            iy = _reflect_indices(h, ph)
            ix = _reflect_indices(w, pw)
            xp = x[:, :, iy][:, :, :, ix]
        elif self.padding == "zero" and (ph or pw):
            xp = np.pad(x, ((0, 0), (0, 0), (ph, ph), (pw, pw)))
        else:
            xp = x
        if xp.shape[2] < self.kh or xp.shape[3] < self.kw:
            raise ValueError(
                f"input {h}x{w} too small for {self.kh}x{self.kw} kernel"
            )
        win = sliding_window_view(xp, (self.kh, self.kw), axis=(2, 3))
        win = win[:, :, :: self.stride, :: self.stride]
        ho, wo = win.shape[2], win.shape[3]
        cols = win.transpose(0, 2, 3, 1, 4, 5).reshape(b, ho * wo, -1)
        wmat = self.weight.reshape(self.out_ch, -1)
        y = cols @ wmat.T + self.bias
        y = y.transpose(0, 2, 1).reshape(b, self.out_ch, ho, wo)
        return y, (cols, xp.shape, x.shape)

    def backward(self, grad, cache):
        cols, padded_shape, x_shape = cache
        b, _, ho, wo = grad.shape
        gcols = grad.reshape(b, self.out_ch, ho * wo).transpose(0, 2, 1)
        wmat = self.weight.reshape(self.out_ch, -1)
        grad_w = np.einsum("bpo,bpk->ok", gcols, cols).reshape(self.weight.shape)
        grad_b = gcols.sum(axis=(0, 1))
        grad_cols = gcols @ wmat  # (b, ho*wo, in_ch*kh*kw)
        grad_cols = grad_cols.reshape(b, ho, wo, self.in_ch, self.kh, self.kw)

        gpad = np.zeros(padded_shape)
        s = self.stride
        for ky in range(self.kh):
            for kx in range(self.kw):
                gpad[:, :, ky : ky + ho * s : s, kx : kx + wo * s : s] += (
                    grad_cols[:, :, :, :, ky, kx].transpose(0, 3, 1, 2)
                )
        gx = self._unpad_grad(gpad, x_shape)
        return gx, [grad_w, grad_b]

    def _unpad_grad(self, gpad, x_shape):
        ph, pw = self._pad_amounts()
        if self.padding == "none" or (ph == 0 and pw == 0):
            return gpad
        h, w = x_shape[2], x_shape[3]
        if self.padding == "zero":
            return gpad[:, :, ph : ph + h, pw : pw + w]
        # reflective: scatter-add padded gradients back to mirror sources
        iy = _reflect_indices(h, ph)
        ix = _reflect_indices(w, pw)
        tmp = np.zeros((h,) + gpad.shape[:2] + (gpad.shape[3],))
        np.add.at(tmp, iy, gpad.transpose(2, 0, 1, 3))
        gx = np.zeros((w,) + tmp.shape[1:3] + (h,))
        np.add.at(gx, ix, tmp.transpose(3, 1, 2, 0))
        return gx.transpose(1, 2, 3, 0)


class ReLU(Layer):
    kind = "relu"

    def forward(self, x, train):
        mask = x > 0
        return x * mask, mask

    def backward(self, grad, cache):
        return grad * cache, []


class LeakyReLU(Layer):
    kind = "leaky_relu"

    def __init__(self, slope=0.2):
        self.slope = slope

    def spec(self):
        return {"kind": self.kind, "slope": self.slope}

    def forward(self, x, train):
        mask = x > 0
        return np.where(mask, x, self.slope * x), mask

    def backward(self, grad, cache):
        return np.where(cache, grad, self.slope * grad), []


class PReLU(Layer):
    """Per-channel learnable rectifier slope, initialized to 0.25."""

    kind = "prelu"

    def __init__(self, channels):
        self.channels = channels
        self.alpha = np.full(channels, 0.25)

    def params(self):
        return [self.alpha]

    def spec(self):
        return {"kind": self.kind, "channels": self.channels}

    def forward(self, x, train):
        mask = x > 0
        a = self.alpha[None, :, None, None]
        return np.where(mask, x, a * x), (mask, x)

    def backward(self, grad, cache):
        mask, x = cache
        a = self.alpha[None, :, None, None]
        gx = np.where(mask, grad, a * grad)
        ga = np.where(mask, 0.0, grad * x).sum(axis=(0, 2, 3))
        return gx, [ga]


class Sigmoid(Layer):
    kind = "sigmoid"

    def forward(self, x, train):
        y = 1.0 / (1.0 + np.exp(-x))
        return y, y

    def backward(self, grad, cache):
        return grad * cache * (1.0 - cache), []


class BatchNorm(Layer):
    """Per-channel batch normalization; momentum-0.9 running statistics."""

    kind = "batch_norm"

    def __init__(self, channels, momentum=0.9, eps=1e-5):
        self.channels = channels
        self.momentum = momentum
        self.eps = eps
        self.gamma = np.ones(channels)
        self.beta = np.zeros(channels)
        self.running_mean = np.zeros(channels)
        self.running_var = np.ones(channels)

    def params(self):
        return [self.gamma, self.beta]

    def buffers(self):
        return [self.running_mean, self.running_var]

    def spec(self):
        return {
            "kind": self.kind,
            "channels": self.channels,
            "momentum": self.momentum,
            "eps": self.eps,
        }

    def forward(self, x, train):
        g = self.gamma[None, :, None, None]
        b = self.beta[None, :, None, None]
        if train:
            mu = x.mean(axis=(0, 2, 3))
            var = x.var(axis=(0, 2, 3))
            self.running_mean *= self.momentum
            self.running_mean += (1.0 - self.momentum) * mu
            self.running_var *= self.momentum
            self.running_var += (1.0 - self.momentum) * var
        else:
            mu, var = self.running_mean, self.running_var
        ivar = 1.0 / np.sqrt(var + self.eps)
        xhat = (x - mu[None, :, None, None]) * ivar[None, :, None, None]
        return g * xhat + b, (xhat, ivar, train)

    def backward(self, grad, cache):
        xhat, ivar, train = cache
        g_gamma = (grad * xhat).sum(axis=(0, 2, 3))
        g_beta = grad.sum(axis=(0, 2, 3))
        ghat = grad * self.gamma[None, :, None, None]
        iv = ivar[None, :, None, None]
        if not train:
            return ghat * iv, [g_gamma, g_beta]
        n = grad.shape[0] * grad.shape[2] * grad.shape[3]
        sum_g = ghat.sum(axis=(0, 2, 3), keepdims=True)
        sum_gx = (ghat * xhat).sum(axis=(0, 2, 3), keepdims=True)
        gx = iv * (ghat - sum_g / n - xhat * sum_gx / n)
        return gx, [g_gamma, g_beta]


class PixelShuffle(Layer):
    """Rearranges (B, C*r^2, H, W) into (B, C, H*r, W*r)."""

    kind = "pixel_shuffle"

    def __init__(self, factor):
        if factor < 2:
            raise ValueError("pixel shuffle factor must be >= 2")
        self.factor = factor

    def spec(self):
        return {"kind": self.kind, "factor": self.factor}

    def forward(self, x, train):
        b, c, h, w = x.shape
        r = self.factor
        if c % (r * r):
            raise ValueError(f"channels {c} not divisible by r^2={r * r}")
        co = c // (r * r)
        y = x.reshape(b, co, r, r, h, w)
        y = y.transpose(0, 1, 4, 2, 5, 3).reshape(b, co, h * r, w * r)
        return y, (b, c, h, w)

    def backward(self, grad, cache):
        b, c, h, w = cache
        r = self.factor
        co = c // (r * r)
        g = grad.reshape(b, co, h, r, w, r)
        g = g.transpose(0, 1, 3, 5, 2, 4).reshape(b, c, h, w)
        return g, []


class Flatten(Layer):
    kind = "flatten"

    def forward(self, x, train):
        return x.reshape(x.shape[0], -1), x.shape

    def backward(self, grad, cache):
        return grad.reshape(cache), []


class Dense(Layer):
    kind = "dense"

    def __init__(self, in_features, out_features, seed=0):
        self.in_features = in_features
        self.out_features = out_features
        self.weight = kaiming_init((out_features, in_features), seed)
        self.bias = np.zeros(out_features)

    def params(self):
        return [self.weight, self.bias]

    def spec(self):
        return {
            "kind": self.kind,
            "in_features": self.in_features,
            "out_features": self.out_features,
        }

    def forward(self, x, train):
        if x.ndim != 2 or x.shape[1] != self.in_features:
            raise ValueError(
                f"dense expects (batch, {self.in_features}), got {x.shape}"
            )
        return x @ self.weight.T + self.bias, x

    def backward(self, grad, cache):
        grad_w = grad.T @ cache
        grad_b = grad.sum(axis=0)
        return grad @ self.weight, [grad_w, grad_b]


class AddSkip(Layer):
    """Adds the activation of an earlier layer (source index; -1 = network input)."""

    kind = "elementwise_add"

    def __init__(self, source):
        self.source = source

    def spec(self):
        return {"kind": self.kind, "source": self.source}

    def forward(self, x, train):  # handled by Network
        raise RuntimeError("AddSkip is evaluated by the network graph")

    def backward(self, grad, cache):
        raise RuntimeError("AddSkip is evaluated by the network graph")


LAYER_KINDS = {
    cls.kind: cls
    for cls in (
        Conv2d,
        ReLU,
        LeakyReLU,
        PReLU,
        Sigmoid,
        BatchNorm,
        PixelShuffle,
        Flatten,
        Dense,
        AddSkip,
    )
}
