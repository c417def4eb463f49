"""Minimal MLP engine: forward, reverse-mode gradients, Adam, Polyak, checkpoints.

Parameters live in float64 so the finite-difference gradient checks are
meaningful; checkpoints are stored as float32 (see ``save_checkpoint``).
"""

from __future__ import annotations

import struct

import numpy as np

ACTIVATIONS = ("tanh", "identity")

CHECKPOINT_MAGIC = b"DOCKRL01"


class CheckpointFormatError(ValueError):
    pass


class MlpNet:
    """Fully connected net: ReLU hidden layers, tanh or identity output.

    Weight matrices have shape (out, in); forward computes x @ W.T + b.
    Gradient buffers are paired with the parameters and accumulate across
    backward calls until ``zero_grads``.
    """

    def __init__(
        self,
        sizes: list[int],
        output_activation: str = "identity",
        rng: np.random.Generator | None = None,
        final_scale: float = 1.0,
    ):
        if len(sizes) < 2:
            raise ValueError("MlpNet needs at least input and output sizes")
        if output_activation not in ACTIVATIONS:
            raise ValueError(f"output_activation must be one of {ACTIVATIONS}")
        self.sizes = list(sizes)
        self.output_activation = output_activation
        rng = rng if rng is not None else np.random.default_rng(0)
        self.Ws: list[np.ndarray] = []
        self.bs: list[np.ndarray] = []
        for i, (fan_in, fan_out) in enumerate(zip(sizes[:-1], sizes[1:])):
            bound = 1.0 / np.sqrt(fan_in)
            W = rng.uniform(-bound, bound, size=(fan_out, fan_in))
            b = rng.uniform(-bound, bound, size=fan_out)
            if i == len(sizes) - 2 and final_scale != 1.0:
                W *= final_scale
                b *= final_scale
            self.Ws.append(W)
            self.bs.append(b)
        self.gWs = [np.zeros_like(W) for W in self.Ws]
        self.gbs = [np.zeros_like(b) for b in self.bs]
        self._cache = None

    @property
    def n_layers(self) -> int:
        return len(self.Ws)

    def parameter_count(self) -> int:
        return sum(W.size + b.size for W, b in zip(self.Ws, self.bs))

    def forward(self, x: np.ndarray, cache: bool = False) -> np.ndarray:
        """Evaluate the net; x may be a single vector or a (batch, in) array."""
        x = np.asarray(x, dtype=np.float64)
        single = x.ndim == 1
        h = x[None, :] if single else x
        if h.shape[1] != self.sizes[0]:
            raise ValueError(
                f"input dim {h.shape[1]} does not match first layer {self.sizes[0]}"
            )
        inputs = [h]
        for i, (W, b) in enumerate(zip(self.Ws, self.bs)):
            z = h @ W.T + b
            if i < self.n_layers - 1:
                h = np.maximum(z, 0.0)
            elif self.output_activation == "tanh":
                h = np.tanh(z)
            else:
                h = z
            inputs.append(h)
        self._cache = inputs if cache else None
        return h[0] if single else h

    def backward(self, upstream: np.ndarray) -> np.ndarray:
        """Accumulate parameter gradients; returns the input gradient.

        ``upstream`` is dLoss/dOutput with the same leading shape as the
        cached forward input.  Batch gradients are summed, so divide the
        upstream by the batch size for a mean loss.
        """
        if self._cache is None:
            raise RuntimeError("backward called without a cached forward pass")
        inputs = self._cache
        g = np.asarray(upstream, dtype=np.float64)
        single = g.ndim == 1
        if single:
            g = g[None, :]
        out = inputs[-1]
        if self.output_activation == "tanh":
            g = g * (1.0 - out * out)
        for i in range(self.n_layers - 1, -1, -1):
            h_in = inputs[i]
            if i < self.n_layers - 1:
                # g currently holds dL/d(post-activation of layer i); the
                # ReLU mask comes from the stored post-activation output
                g = g * (inputs[i + 1] > 0.0)
            self.gWs[i] += g.T @ h_in
            self.gbs[i] += g.sum(axis=0)
            g = g @ self.Ws[i]
        return g[0] if single else g

    def zero_grads(self) -> None:
        for gW, gb in zip(self.gWs, self.gbs):
            gW.fill(0.0)
            gb.fill(0.0)

    def copy(self) -> "MlpNet":
        clone = MlpNet.__new__(MlpNet)
        clone.sizes = list(self.sizes)
        clone.output_activation = self.output_activation
        clone.Ws = [W.copy() for W in self.Ws]
        clone.bs = [b.copy() for b in self.bs]
        clone.gWs = [np.zeros_like(W) for W in self.Ws]
        clone.gbs = [np.zeros_like(b) for b in self.bs]
        clone._cache = None
        return clone

    # flat views used by the optimizer and tests
    def params(self):
        for W in self.Ws:
            yield W
        for b in self.bs:
            yield b

    def grads(self):
        for gW in self.gWs:
            yield gW
        for gb in self.gbs:
            yield gb


class Adam:
    """Standard Adam with bias correction over one net's parameters."""

    def __init__(self, net: MlpNet, lr: float = 1e-3, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.net = net
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p) for p in net.params()]
        self.v = [np.zeros_like(p) for p in net.params()]

    def step(self) -> None:
        self.t += 1
        b1t = 1.0 - self.beta1**self.t
        b2t = 1.0 - self.beta2**self.t
        for p, g, m, v in zip(self.net.params(), self.net.grads(), self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.lr * (m / b1t) / (np.sqrt(v / b2t) + self.eps)


def polyak_update(target: MlpNet, source: MlpNet, tau: float) -> None:
    """target <- (1 - tau) * target + tau * source, element-wise."""
    if target.sizes != source.sizes:
        raise ValueError("polyak_update: network shapes differ")
    for pt, ps in zip(target.params(), source.params()):
        pt *= 1.0 - tau
        pt += tau * ps


def save_checkpoint(net: MlpNet, path) -> None:
    """Flat binary: magic, u32 layer count, per-layer (rows, cols) u32 LE,
    then float32 LE parameters in layer order, weights before biases,
    row-major."""
    with open(path, "wb") as f:
        f.write(CHECKPOINT_MAGIC)
        f.write(struct.pack("<I", net.n_layers))
        for W in net.Ws:
            f.write(struct.pack("<II", W.shape[0], W.shape[1]))
        for W, b in zip(net.Ws, net.bs):
            f.write(W.astype("<f4").tobytes())
            f.write(b.astype("<f4").tobytes())


def load_checkpoint(path, output_activation: str = "identity") -> MlpNet:
    with open(path, "rb") as f:
        data = f.read()
    if len(data) < 12 or data[:8] != CHECKPOINT_MAGIC:
        raise CheckpointFormatError(f"{path}: bad magic string (expected DOCKRL01)")
    (n_layers,) = struct.unpack_from("<I", data, 8)
    if n_layers == 0 or n_layers > 1024:
        raise CheckpointFormatError(f"{path}: implausible layer count {n_layers}")
    off = 12
    shapes = []
    for i in range(n_layers):
        if off + 8 > len(data):
            raise CheckpointFormatError(f"{path}: truncated shape header at layer {i}")
        rows, cols = struct.unpack_from("<II", data, off)
        off += 8
        if rows == 0 or cols == 0:
            raise CheckpointFormatError(f"{path}: zero dimension in layer {i} shape")
        shapes.append((rows, cols))
    for i in range(1, n_layers):
        if shapes[i][1] != shapes[i - 1][0]:
            raise CheckpointFormatError(
                f"{path}: layer {i} input dim {shapes[i][1]} does not chain "
                f"with layer {i - 1} output dim {shapes[i - 1][0]}"
            )
    expected = sum(r * c + r for r, c in shapes) * 4
    if len(data) - off != expected:
        raise CheckpointFormatError(
            f"{path}: parameter payload is {len(data) - off} bytes, expected {expected}"
        )
    sizes = [shapes[0][1]] + [r for r, _ in shapes]
    net = MlpNet(sizes, output_activation=output_activation)
    for i, (rows, cols) in enumerate(shapes):
        n = rows * cols
        W = np.frombuffer(data, dtype="<f4", count=n, offset=off).reshape(rows, cols)
        off += n * 4
        b = np.frombuffer(data, dtype="<f4", count=rows, offset=off)
        off += rows * 4
        net.Ws[i] = W.astype(np.float64)
        net.bs[i] = b.astype(np.float64)
        net.gWs[i] = np.zeros_like(net.Ws[i])
        net.gbs[i] = np.zeros_like(net.bs[i])
    return net
