"""Feed-forward network with optional additive skip edges, reverse-mode
gradients, and a flat binary checkpoint format."""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from graysr.nn.layers import LAYER_KINDS, AddSkip, Conv2d, Dense, Layer

NET_MAGIC = b"SRNET1"


class Network:
    """Ordered layers; an AddSkip layer adds the output of an earlier layer
    (index -1 addresses the network input)."""

    def __init__(self, layers: list, meta: dict | None = None):
        self.layers = list(layers)
        self.meta = dict(meta or {})
        for i, layer in enumerate(self.layers):
            if isinstance(layer, AddSkip) and not -1 <= layer.source < i:
                raise ValueError(
                    f"layer {i}: skip source {layer.source} must precede it"
                )

    def parameters(self) -> list:
        out = []
        for layer in self.layers:
            out.extend(layer.params())
        return out

    def forward(self, x, train: bool = True):
        """Run the network; returns (activations, caches).

        activations[0] is the input, activations[i+1] the output of layer i.
        Train mode uses batch statistics and retains everything backward
        needs; eval mode uses batch-norm running statistics.
        """
        acts = [np.asarray(x, dtype=np.float64)]
        caches = []
        for i, layer in enumerate(self.layers):
            cur = acts[-1]
            if isinstance(layer, AddSkip):
                src = acts[layer.source + 1]
                if src.shape != cur.shape:
                    raise ValueError(
                        f"layer {i} (elementwise_add): shape {cur.shape} "
                        f"incompatible with skip source {src.shape}"
                    )
                y, cache = cur + src, None
            else:
                try:
                    y, cache = layer.forward(cur, train)
                except ValueError as err:
                    raise ValueError(f"layer {i} ({layer.kind}): {err}") from err
            acts.append(y)
            caches.append(cache)
        return acts, caches

    def predict(self, x) -> np.ndarray:
        acts, _ = self.forward(x, train=False)
        return acts[-1]

    def backward(self, acts, caches, loss_grad):
        """Reverse-mode pass; returns (param_grads, input_grad).

        param_grads aligns with ``parameters()``; skip edges accumulate
        gradients additively into their source activation.
        """
        if len(acts) != len(self.layers) + 1 or len(caches) != len(self.layers):
            raise ValueError("backward called without matching forward activations")
        n = len(self.layers)
        grad_acts: list = [None] * (n + 1)
        grad_acts[n] = np.asarray(loss_grad, dtype=np.float64)
        if grad_acts[n].shape != acts[n].shape:
            raise ValueError(
                f"loss gradient shape {grad_acts[n].shape} != output {acts[n].shape}"
            )
        param_grads = []
        for i in range(n - 1, -1, -1):
            g = grad_acts[i + 1]
            layer = self.layers[i]
            if isinstance(layer, AddSkip):
                _accumulate(grad_acts, i, g)
                _accumulate(grad_acts, layer.source + 1, g)
            else:
                gx, pgrads = layer.backward(g, caches[i])
                _accumulate(grad_acts, i, gx)
                param_grads[:0] = pgrads
        return param_grads, grad_acts[0]


def _accumulate(grad_acts, index, grad):
    if grad_acts[index] is None:
        grad_acts[index] = grad.copy()
    else:
        grad_acts[index] += grad


def layer_from_spec(spec: dict) -> Layer:
    kind = spec["kind"]
    if kind not in LAYER_KINDS:
        raise ValueError(f"unknown layer kind {kind!r}")
    args = {k: v for k, v in spec.items() if k != "kind"}
    if kind == "conv2d":
        return Conv2d(
            args["in_ch"],
            args["out_ch"],
            tuple(args["kernel"]),
            stride=args["stride"],
            padding=args["padding"],
        )
    if kind == "dense":
        return Dense(args["in_features"], args["out_features"])
    cls = LAYER_KINDS[kind]
    return cls(**args) if args else cls()


def save_network(net: Network, path) -> None:
    """Checkpoint: magic, length-prefixed JSON layer block, then every
    parameter and buffer as float64-LE in declaration order."""
    spec = {"meta": net.meta, "layers": [layer.spec() for layer in net.layers]}
    blob = json.dumps(spec, sort_keys=True).encode()
    with open(Path(path), "wb") as fh:
        fh.write(NET_MAGIC)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        for layer in net.layers:
            for arr in list(layer.params()) + list(layer.buffers()):
                fh.write(arr.astype("<f8").tobytes())


def load_network(path) -> Network:
    raw = Path(path).read_bytes()
    if raw[: len(NET_MAGIC)] != NET_MAGIC:
        raise ValueError(f"{path}: not a checkpoint (bad magic)")
    (blob_len,) = struct.unpack_from("<I", raw, len(NET_MAGIC))
    start = len(NET_MAGIC) + 4
    spec = json.loads(raw[start : start + blob_len].decode())
    net = Network([layer_from_spec(s) for s in spec["layers"]], meta=spec["meta"])
    off = start + blob_len
    for layer in net.layers:
        for arr in list(layer.params()) + list(layer.buffers()):
            flat = np.frombuffer(raw, dtype="<f8", count=arr.size, offset=off)
            arr[...] = flat.reshape(arr.shape)
            off += arr.size * 8
    if off != len(raw):
        raise ValueError(f"{path}: trailing bytes in checkpoint")
    return net
