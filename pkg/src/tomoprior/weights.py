"""Portable generator weight file (magic "TPW1").

Layout: magic (4 bytes) | format version u32 | descriptor length u32 |
canonical JSON descriptor | per-layer little-endian float32 parameter blocks
in descriptor order | CRC-32 (u32) of descriptor + parameter bytes.
"""

from __future__ import annotations

import json
import struct
import zlib
from dataclasses import dataclass, field

import numpy as np

MAGIC = b"TPW1"
FORMAT_VERSION = 1


class WeightsError(Exception):
    """Base error for weight-file problems."""


class BadMagicError(WeightsError):
    pass


class VersionMismatchError(WeightsError):
    pass


class TruncatedFileError(WeightsError):
    pass


class ChecksumError(WeightsError):
    pass


class ShapeChainError(WeightsError):
    pass


@dataclass(frozen=True)
class ConvSpec:
    kind: str  # "conv" or "deconv"
    in_ch: int
    out_ch: int
    kernel: tuple = (3, 3)
    stride: int = 1
    padding: int = 1
    output_padding: int = 0  # deconv only
    bias: bool = True
    activation: str = "lrelu"


@dataclass(frozen=True)
class AttentionSpec:
    kind: str = "attention"
    channels: int = 1
    attn_channels: int = 1
    pool: int = 3


def attn_channels_default(channels: int) -> int:
    """Bottleneck width for the attention projections: max(c/8, 1)."""
    return max(channels // 8, 1)


@dataclass
class GeneratorWeights:
    """Self-describing layer list plus parameter arrays (float32 on disk)."""

    input_side: int
    norm_max: float
    layers: list = field(default_factory=list)
    params: list = field(default_factory=list)

    @property
    def has_attention(self) -> bool:
        return any(s.kind == "attention" for s in self.layers)


def _param_shapes(spec) -> list:
    """(name, shape) pairs in on-disk block order."""
    if spec.kind == "conv":
        shapes = [("weight", (spec.out_ch, spec.in_ch) + tuple(spec.kernel))]
        if spec.bias:
            shapes.append(("bias", (spec.out_ch,)))
        return shapes
    if spec.kind == "deconv":
        shapes = [("weight", (spec.in_ch, spec.out_ch) + tuple(spec.kernel))]
        if spec.bias:
            shapes.append(("bias", (spec.out_ch,)))
        return shapes
    if spec.kind == "attention":
        c, cb = spec.channels, spec.attn_channels
        return [("w_f", (cb, c)), ("w_g", (cb, c)), ("w_h", (c, c)), ("gamma", ())]
    raise ShapeChainError(f"unknown layer kind {spec.kind!r}")


def validate_architecture(layers: list, input_channels: int = 1) -> None:
    """Check the channel chain and the at-most-one-attention rule."""
    current = input_channels
    attention_seen = 0
    for idx, spec in enumerate(layers):
        if spec.kind in ("conv", "deconv"):
            if spec.in_ch != current:
                raise ShapeChainError(
                    f"layer {idx} ({spec.kind}) expects in_ch {spec.in_ch} but the "
                    f"preceding layer produces {current} channels")
            if spec.activation not in ("linear", "relu", "lrelu"):
                raise ShapeChainError(f"layer {idx}: unknown activation {spec.activation!r}")
            current = spec.out_ch
        elif spec.kind == "attention":
            attention_seen += 1
            if attention_seen > 1:
                raise ShapeChainError(f"layer {idx}: more than one attention layer")
            if spec.channels != current:
                raise ShapeChainError(
                    f"layer {idx} (attention) expects {spec.channels} channels but the "
                    f"preceding layer produces {current}")
        else:
            raise ShapeChainError(f"layer {idx}: unknown kind {spec.kind!r}")
    if current != input_channels:
        raise ShapeChainError(
            f"architecture ends with {current} channels, expected {input_channels}")


def _spec_to_json(spec) -> dict:
    if spec.kind == "attention":
        return {"kind": "attention", "channels": spec.channels,
                "attn_channels": spec.attn_channels, "pool": spec.pool}
    return {"kind": spec.kind, "in_ch": spec.in_ch, "out_ch": spec.out_ch,
            "kernel": list(spec.kernel), "stride": spec.stride,
            "padding": spec.padding, "output_padding": spec.output_padding,
            "bias": spec.bias, "activation": spec.activation}


def _spec_from_json(obj: dict):
    kind = obj.get("kind")
    if kind == "attention":
        return AttentionSpec(channels=obj["channels"],
                             attn_channels=obj["attn_channels"],
                             pool=obj.get("pool", 3))
    if kind in ("conv", "deconv"):
        return ConvSpec(kind=kind, in_ch=obj["in_ch"], out_ch=obj["out_ch"],
                        kernel=tuple(obj["kernel"]), stride=obj["stride"],
                        padding=obj["padding"],
                        output_padding=obj.get("output_padding", 0),
                        bias=obj["bias"], activation=obj["activation"])
    raise ShapeChainError(f"unknown layer kind {kind!r} in descriptor")


def _descriptor_bytes(weights: GeneratorWeights) -> bytes:
    descriptor = {
        "input_side": weights.input_side,
        "norm_max": weights.norm_max,
        "ablation_no_attention": not weights.has_attention,
        "layers": [_spec_to_json(s) for s in weights.layers],
    }
    return json.dumps(descriptor, sort_keys=True, separators=(",", ":")).encode()


def save_weights(weights: GeneratorWeights, path) -> None:
    validate_architecture(weights.layers)
    desc = _descriptor_bytes(weights)
    blocks = bytearray()
    for spec, params in zip(weights.layers, weights.params):
        for name, shape in _param_shapes(spec):
            arr = np.asarray(params[name], dtype=np.float32)
            if arr.shape != shape:
                raise ShapeChainError(
                    f"{spec.kind} parameter {name} has shape {arr.shape}, expected {shape}")
            blocks += arr.tobytes(order="C")
    payload = desc + bytes(blocks)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", FORMAT_VERSION, len(desc)))
        fh.write(payload)
        fh.write(struct.pack("<I", zlib.crc32(payload) & 0xFFFFFFFF))


def load_weights(path) -> GeneratorWeights:
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:4] != MAGIC:
        if len(raw) < 4 and raw == MAGIC[:len(raw)]:
            raise TruncatedFileError(f"{path}: file shorter than header")
        raise BadMagicError(f"{path}: not a TPW1 weight file")
    if len(raw) < 12:
        raise TruncatedFileError(f"{path}: file shorter than header")
    version, desc_len = struct.unpack("<II", raw[4:12])
    if version != FORMAT_VERSION:
        raise VersionMismatchError(
            f"{path}: format version {version}, expected {FORMAT_VERSION}")
    if len(raw) < 12 + desc_len + 4:
        raise TruncatedFileError(f"{path}: descriptor truncated")
    desc = raw[12:12 + desc_len]
    try:
        descriptor = json.loads(desc.decode())
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise TruncatedFileError(f"{path}: unreadable descriptor: {exc}") from exc
    layers = [_spec_from_json(obj) for obj in descriptor["layers"]]
    validate_architecture(layers)

    expected = sum(
        int(np.prod(shape)) * 4
        for spec in layers for _, shape in _param_shapes(spec)
    )
    body = raw[12 + desc_len:]
    if len(body) < expected + 4:
        raise TruncatedFileError(
            f"{path}: payload truncated ({len(body)} bytes, need {expected + 4})")
    if len(body) > expected + 4:
        raise TruncatedFileError(f"{path}: {len(body) - expected - 4} trailing bytes")
    (stored_crc,) = struct.unpack("<I", body[expected:])
    actual_crc = zlib.crc32(desc + body[:expected]) & 0xFFFFFFFF
    if stored_crc != actual_crc:
        raise ChecksumError(f"{path}: CRC mismatch (file corrupted)")

    params = []
    offset = 0
    for spec in layers:
        layer_params = {}
        for name, shape in _param_shapes(spec):
            count = int(np.prod(shape))
            arr = np.frombuffer(body, dtype="<f4", count=count, offset=offset)
            offset += count * 4
            layer_params[name] = arr.reshape(shape).astype(np.float64)
        params.append(layer_params)
    return GeneratorWeights(
        input_side=int(descriptor["input_side"]),
        norm_max=float(descriptor["norm_max"]),
        layers=layers,
        params=params,
    )


def tiny_architecture(side: int = 24, channels: tuple = (4, 8),
                      attention: bool = True) -> list:
    """Small stride-2 encoder/decoder pair for tests and toy training."""
    layers = []
    chain = (1,) + tuple(channels)
    for i in range(len(channels)):
        layers.append(ConvSpec("conv", chain[i], chain[i + 1], stride=2))
    if attention:
        c = channels[-1]
        layers.append(AttentionSpec(channels=c,
                                    attn_channels=attn_channels_default(c)))
    for i in reversed(range(len(channels))):
        activation = "lrelu" if i > 0 else "linear"
        layers.append(ConvSpec("deconv", chain[i + 1], chain[i], stride=2,
                               output_padding=1, activation=activation))
    return layers


def paper_architecture(attention: bool = True) -> list:
    """Ten encoding and ten decoding layers; stride 2 on every second layer."""
    enc = [(1, 32, 1), (32, 64, 2), (64, 64, 1), (64, 128, 2), (128, 128, 1),
           (128, 256, 2), (256, 256, 1), (256, 512, 2), (512, 512, 1), (512, 512, 2)]
    layers = [ConvSpec("conv", i, o, stride=s) for i, o, s in enc]
    if attention:
        layers.append(AttentionSpec(channels=512,
                                    attn_channels=attn_channels_default(512)))
    for idx, (i, o, s) in enumerate(reversed(enc)):
        activation = "lrelu" if idx < len(enc) - 1 else "linear"
        layers.append(ConvSpec("deconv", o, i, stride=s,
                               output_padding=(1 if s == 2 else 0),
                               activation=activation))
    return layers


def init_random_params(layers: list, seed: int, scale: float = 0.1,
                       gamma: float = 0.0) -> list:
    """Seed-deterministic parameter arrays matching the descriptor shapes."""
    rng = np.random.default_rng(seed)
    params = []
    for spec in layers:
        layer_params = {}
        for name, shape in _param_shapes(spec):
            if name == "gamma":
                layer_params[name] = np.float32(gamma)
            elif name == "bias":
                layer_params[name] = np.zeros(shape, dtype=np.float32)
            else:
                fan_in = int(np.prod(shape[1:])) or 1
                layer_params[name] = rng.normal(
                    0.0, scale / np.sqrt(fan_in), size=shape).astype(np.float32)
        params.append(layer_params)
    return params
