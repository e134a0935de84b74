"""Generator forward pass: conv encoder, self-attention block, deconv decoder.

Tensors are channel-first float64 arrays of shape (channels, rows, cols).
Convolutions follow the cross-correlation convention with torch-compatible
weight layouts: conv weights are (out_ch, in_ch, kh, kw); deconv (transposed
convolution) weights are (in_ch, out_ch, kh, kw).
"""

from __future__ import annotations

import numpy as np


def leaky_relu(x: np.ndarray, slope: float = 0.2) -> np.ndarray:
    return np.where(x > 0, x, slope * x)


ACTIVATIONS = {
    "linear": lambda x: x,
    "relu": lambda x: np.maximum(x, 0.0),
    "lrelu": leaky_relu,
}


def conv2d(x: np.ndarray, weight: np.ndarray, bias: np.ndarray | None,
           stride: int = 1, padding: int = 1) -> np.ndarray:
    out_ch, in_ch, kh, kw = weight.shape
    if x.shape[0] != in_ch:
        raise ValueError(f"conv expects {in_ch} input channels, got {x.shape[0]}")
    xp = np.pad(x, ((0, 0), (padding, padding), (padding, padding)))
    out_h = (x.shape[1] + 2 * padding - kh) // stride + 1
    out_w = (x.shape[2] + 2 * padding - kw) // stride + 1
    acc = np.zeros((out_ch, out_h, out_w))
    for ki in range(kh):
        for kj in range(kw):
            patch = xp[:, ki:ki + stride * out_h:stride, kj:kj + stride * out_w:stride]
            acc += np.einsum("oi,ihw->ohw", weight[:, :, ki, kj], patch)
    if bias is not None:
        acc += bias[:, None, None]
    return acc


def deconv2d(x: np.ndarray, weight: np.ndarray, bias: np.ndarray | None,
             stride: int = 1, padding: int = 1, output_padding: int = 0) -> np.ndarray:
    in_ch, out_ch, kh, kw = weight.shape
    if x.shape[0] != in_ch:
        raise ValueError(f"deconv expects {in_ch} input channels, got {x.shape[0]}")
    h, w = x.shape[1], x.shape[2]
    buf = np.zeros((out_ch, (h - 1) * stride + kh + output_padding,
                    (w - 1) * stride + kw + output_padding))
    for ki in range(kh):
        for kj in range(kw):
            contrib = np.einsum("io,ihw->ohw", weight[:, :, ki, kj], x)
            buf[:, ki:ki + stride * h:stride, kj:kj + stride * w:stride] += contrib
    out_h = (h - 1) * stride - 2 * padding + kh + output_padding
    out_w = (w - 1) * stride - 2 * padding + kw + output_padding
    out = buf[:, padding:padding + out_h, padding:padding + out_w]
    if bias is not None:
        out = out + bias[:, None, None]
    return out


def average_pool(x: np.ndarray, size: int = 3) -> np.ndarray:
    """Non-overlapping pooling; partial edge blocks average their actual pixels."""
    c, m, n = x.shape
    ri = np.arange(0, m, size)
    ci = np.arange(0, n, size)
    sums = np.add.reduceat(np.add.reduceat(x, ri, axis=1), ci, axis=2)
    rcount = np.minimum(ri + size, m) - ri
    ccount = np.minimum(ci + size, n) - ci
    return sums / (rcount[:, None] * ccount[None, :])


def upsample_nearest(x: np.ndarray, size: int, rows: int, cols: int) -> np.ndarray:
    """Nearest-neighbor upsampling by `size`, cropped to (rows, cols)."""
    up = np.repeat(np.repeat(x, size, axis=1), size, axis=2)
    return up[:, :rows, :cols]


def softmax_rows(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def attention_map(x_pooled: np.ndarray, w_f: np.ndarray, w_g: np.ndarray) -> np.ndarray:
    """Row-stochastic all-pairs affinity over the pooled grid."""
    c = x_pooled.shape[0]
    flat = x_pooled.reshape(c, -1)
    f = w_f @ flat
    g = w_g @ flat
    return softmax_rows(f.T @ g)


def self_attention_forward(x: np.ndarray, w_f: np.ndarray, w_g: np.ndarray,
                           w_h: np.ndarray, gamma: float, pool: int = 3) -> np.ndarray:
    """gamma-gated attention mixing over the 3x3-pooled grid plus residual input."""
    c, m, n = x.shape
    for name, w in (("w_f", w_f), ("w_g", w_g), ("w_h", w_h)):
        if w.shape[1] != c:
            raise ValueError(f"{name} expects {w.shape[1]} channels, tensor has {c}")
    if w_h.shape[0] != c:
        raise ValueError(f"w_h must map back to {c} channels, got {w_h.shape[0]}")
    pooled = average_pool(x, pool)
    amap = attention_map(pooled, w_f, w_g)
    h = w_h @ pooled.reshape(c, -1)
    mixed = (h @ amap).reshape(c, pooled.shape[1], pooled.shape[2])
    return gamma * upsample_nearest(mixed, pool, m, n) + x


def run_layer(x: np.ndarray, spec, params: dict) -> np.ndarray:
    if spec.kind == "conv":
        y = conv2d(x, params["weight"], params.get("bias"), spec.stride, spec.padding)
        return ACTIVATIONS[spec.activation](y)
    if spec.kind == "deconv":
        y = deconv2d(x, params["weight"], params.get("bias"), spec.stride,
                     spec.padding, spec.output_padding)
        return ACTIVATIONS[spec.activation](y)
    if spec.kind == "attention":
        return self_attention_forward(x, params["w_f"], params["w_g"],
                                      params["w_h"], float(params["gamma"]),
                                      spec.pool)
    raise ValueError(f"unknown layer kind {spec.kind!r}")


def generator_forward(image, weights) -> np.ndarray:
    """Full generator pass on a (side, side) image; output has the same shape.

    The input is scaled to [0, 1] by the normalization max recorded in the
    weight file and the output is rescaled back.
    """
    values = np.asarray(getattr(image, "values", image), dtype=np.float64)
    if values.shape != (weights.input_side, weights.input_side):
        raise ValueError(
            f"generator expects side {weights.input_side}, got shape {values.shape}")
    x = values[None, :, :] / weights.norm_max
    for idx, (spec, params) in enumerate(zip(weights.layers, weights.params)):
        x = run_layer(x, spec, params)
        if not np.all(np.isfinite(x)):
            raise FloatingPointError(
                f"non-finite values after layer {idx} ({spec.kind})")
    if x.shape != (1, values.shape[0], values.shape[1]):
        raise ValueError(f"generator output shape {x.shape} does not match input")
    return x[0] * weights.norm_max
