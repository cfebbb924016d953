"""Fully connected feature map with explicit forward/backward passes, plus
the bias-free linear classifier.

The network is a chain of affine layers with ReLU after every layer except
the last (identity output). Everything is float64; forward works on a single
flattened image or a batch (rows are samples).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

CHECKPOINT_MAGIC = "SSFA-CKPT v1"


@dataclass(frozen=True)
class LayerSpec:
    """Layer widths: (input dim, hidden dims..., feature dim)."""

    sizes: tuple

    def __post_init__(self):
        object.__setattr__(self, "sizes", tuple(int(s) for s in self.sizes))
        if len(self.sizes) < 2:
            raise ValueError("need at least input and output widths")
        if min(self.sizes) < 1:
            raise ValueError("all layer widths must be >= 1")

    @property
    def in_dim(self) -> int:
        return self.sizes[0]

    @property
    def out_dim(self) -> int:
        return self.sizes[-1]


class NetworkParams:
    """Per-layer weight matrices (fan_out x fan_in) and bias vectors."""

    def __init__(self, weights, biases):
        weights = [np.asarray(w, dtype=np.float64) for w in weights]
        biases = [np.asarray(b, dtype=np.float64) for b in biases]
        if len(weights) != len(biases) or not weights:
            raise ValueError("weights and biases must be nonempty and aligned")
        for i, (w, b) in enumerate(zip(weights, biases)):
            if w.ndim != 2 or b.ndim != 1 or w.shape[0] != b.shape[0]:
                raise ValueError(f"layer {i}: weight {w.shape} / bias {b.shape} mismatch")
            if i > 0 and w.shape[1] != weights[i - 1].shape[0]:
                raise ValueError(
                    f"layer {i}: fan_in {w.shape[1]} != previous fan_out {weights[i - 1].shape[0]}"
                )
        self.weights = weights
        self.biases = biases

    def layer_spec(self) -> LayerSpec:
        return LayerSpec((self.weights[0].shape[1],) + tuple(w.shape[0] for w in self.weights))

    def copy(self) -> "NetworkParams":
        return NetworkParams([w.copy() for w in self.weights], [b.copy() for b in self.biases])

    def blocks(self):
        """Named parameter arrays in a fixed order (for optimizers)."""
        out = []
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            out.append((f"layer{i}.weight", w))
            out.append((f"layer{i}.bias", b))
        return out


@dataclass
class ActivationTape:
    """Intermediates of one forward pass, consumed by backward()."""

    x: np.ndarray
    pre: list
    post: list
    single: bool


def glorot_uniform(rng, fan_out: int, fan_in: int) -> np.ndarray:
    bound = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=(fan_out, fan_in))


def init_glorot(spec: LayerSpec, seed) -> NetworkParams:
    """Glorot-uniform weights (bound sqrt(6/(fan_in+fan_out))), zero biases."""
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(spec.sizes[:-1], spec.sizes[1:]):
        weights.append(glorot_uniform(rng, fan_out, fan_in))
        biases.append(np.zeros(fan_out))
    return NetworkParams(weights, biases)


def init_classifier(num_classes: int, dim: int, seed) -> np.ndarray:
    """Glorot-uniform (num_classes x dim) classifier matrix, no bias."""
    return glorot_uniform(np.random.default_rng(seed), num_classes, dim)


def forward(params: NetworkParams, x):
    """Map input(s) to feature vector(s).

    Parameters
    ----------
    x : (d,) or (n, d) array of preprocessed, flattened images.

    Returns
    -------
    (z, tape) : features with the same leading shape as ``x``, plus the
    activation tape for backward().
    """
    X = np.asarray(x, dtype=np.float64)
    single = X.ndim == 1
    X2 = X[None, :] if single else X
    if X2.ndim != 2 or X2.shape[1] != params.weights[0].shape[1]:
        raise ValueError(
            f"input dim {X2.shape[-1]} != network input dim {params.weights[0].shape[1]}"
        )
    pre, post = [], []
    h = X2
    last = len(params.weights) - 1
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        a = h @ w.T + b
        pre.append(a)
        h = np.maximum(a, 0.0) if i < last else a
        post.append(h)
    z = post[-1][0] if single else post[-1]
    return z, ActivationTape(X2, pre, post, single)


def backward(params: NetworkParams, tape: ActivationTape, dz):
    """Backpropagate a feature-space gradient through the tape.

    Returns (d_params, dx): a NetworkParams-shaped gradient and the
    gradient w.r.t. the input. The ReLU subgradient at exactly zero
    pre-activation is zero.
    """
    G = np.asarray(dz, dtype=np.float64)
    G2 = G[None, :] if G.ndim == 1 else G
    if G2.shape != tape.post[-1].shape:
        raise ValueError(f"dz shape {G2.shape} != output shape {tape.post[-1].shape}")
    n_layers = len(params.weights)
    dws = [None] * n_layers
    dbs = [None] * n_layers
    delta = G2
    for i in reversed(range(n_layers)):
        inp = tape.x if i == 0 else tape.post[i - 1]
        dws[i] = delta.T @ inp
        dbs[i] = delta.sum(axis=0)
        delta = delta @ params.weights[i]
        if i > 0:
            delta = delta * (tape.pre[i - 1] > 0.0)
    dx = delta[0] if tape.single else delta
    return NetworkParams(dws, dbs), dx


def classify(W: np.ndarray, z):
    """Bias-free linear classifier: logits W @ z, prediction argmax
    (smallest index on ties)."""
    W = np.asarray(W, dtype=np.float64)
    z = np.asarray(z, dtype=np.float64)
    if W.ndim != 2 or z.ndim != 1 or W.shape[1] != z.shape[0]:
        raise ValueError(f"classifier {W.shape} incompatible with feature dim {z.shape}")
    logits = W @ z
    return logits, int(np.argmax(logits))


# ---------------------------------------------------------------------------
# Checkpoints
#
# Byte layout (documented contract):
#   line 1: b"SSFA-CKPT v1\n"
#   line 2: b"layers s0 s1 ... sk\n"     (layer widths, ASCII decimal)
#   line 3: b"classes C\n"               (classifier row count)
#   body:   for each layer i: weight matrix (row-major), then bias vector,
#           as little-endian float64; finally the (C x sk) classifier
#           matrix, row-major little-endian float64. No padding.

def save_checkpoint(path, params: NetworkParams, W: np.ndarray) -> None:
    W = np.asarray(W, dtype=np.float64)
    spec = params.layer_spec()
    if W.ndim != 2 or W.shape[1] != spec.out_dim:
        raise ValueError(f"classifier shape {W.shape} incompatible with feature dim {spec.out_dim}")
    head = (
        f"{CHECKPOINT_MAGIC}\n"
        f"layers {' '.join(str(s) for s in spec.sizes)}\n"
        f"classes {W.shape[0]}\n"
    ).encode("ascii")
    body = [head]
    for w, b in zip(params.weights, params.biases):
        body.append(np.ascontiguousarray(w, dtype="<f8").tobytes())
        body.append(np.ascontiguousarray(b, dtype="<f8").tobytes())
    body.append(np.ascontiguousarray(W, dtype="<f8").tobytes())
    Path(path).write_bytes(b"".join(body))


def load_checkpoint(path):
    """Read a checkpoint; returns (params, classifier W)."""
    data = Path(path).read_bytes()
    try:
        l1, l2, l3, rest = data.split(b"\n", 3)
    except ValueError:
        raise ValueError(f"{path}: truncated checkpoint header") from None
    if l1.decode("ascii", "replace") != CHECKPOINT_MAGIC:
        raise ValueError(f"{path}: bad checkpoint magic {l1!r}")
    t2, t3 = l2.split(), l3.split()
    if not t2 or t2[0] != b"layers" or len(t2) < 3:
        raise ValueError(f"{path}: bad layers line {l2!r}")
    if len(t3) != 2 or t3[0] != b"classes":
        raise ValueError(f"{path}: bad classes line {l3!r}")
    sizes = [int(t) for t in t2[1:]]
    num_classes = int(t3[1])
    spec = LayerSpec(tuple(sizes))

    offset = 0

    def take(shape):
        nonlocal offset
        count = int(np.prod(shape))
        end = offset + count * 8
        if end > len(rest):
            raise ValueError(f"{path}: truncated checkpoint body")
        arr = np.frombuffer(rest[offset:end], dtype="<f8").astype(np.float64).reshape(shape)
        offset = end
        return arr

    weights, biases = [], []
    for fan_in, fan_out in zip(spec.sizes[:-1], spec.sizes[1:]):
        weights.append(take((fan_out, fan_in)))
        biases.append(take((fan_out,)))
    W = take((num_classes, spec.out_dim))
    if offset != len(rest):
        raise ValueError(f"{path}: {len(rest) - offset} trailing bytes in checkpoint")
    return NetworkParams(weights, biases), W
