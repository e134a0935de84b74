"""Torch generator and discriminator matching the inference-side numerics.

The generator mirrors the reconstruction package's forward pass exactly:
cross-correlation convolutions with torch layouts, leaky-relu slope 0.2,
3x3 average pooling with partial edge blocks, row-stochastic attention over
the pooled grid, and nearest-neighbor upsampling cropped to the input size.
Equivalence is enforced by the export-time verification step.
"""

from __future__ import annotations

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

from tomoprior.weights import (
    AttentionSpec,
    ConvSpec,
    GeneratorWeights,
    attn_channels_default,
    tiny_architecture,
    validate_architecture,
)


class ConvLayer(nn.Module):
    def __init__(self, spec: ConvSpec):
        super().__init__()
        self.spec = spec
        kh, kw = spec.kernel
        if spec.kind == "conv":
            shape = (spec.out_ch, spec.in_ch, kh, kw)
        else:
            shape = (spec.in_ch, spec.out_ch, kh, kw)
        fan_in = spec.in_ch * kh * kw
        self.weight = nn.Parameter(torch.randn(shape) / fan_in ** 0.5)
        self.bias = nn.Parameter(torch.zeros(spec.out_ch)) if spec.bias else None

    def forward(self, x):
        s = self.spec
        if s.kind == "conv":
            y = F.conv2d(x, self.weight, self.bias, stride=s.stride,
                         padding=s.padding)
        else:
            y = F.conv_transpose2d(x, self.weight, self.bias, stride=s.stride,
                                   padding=s.padding,
                                   output_padding=s.output_padding)
        if s.activation == "lrelu":
            return F.leaky_relu(y, 0.2)
        if s.activation == "relu":
            return F.relu(y)
        return y


class AttentionLayer(nn.Module):
    def __init__(self, spec: AttentionSpec):
        super().__init__()
        self.spec = spec
        c, cb = spec.channels, spec.attn_channels
        self.w_f = nn.Parameter(torch.randn(cb, c) * 0.1)
        self.w_g = nn.Parameter(torch.randn(cb, c) * 0.1)
        self.w_h = nn.Parameter(torch.randn(c, c) * 0.1)
        self.gamma = nn.Parameter(torch.zeros(()))

    def forward(self, x):
        pool = self.spec.pool
        batch, c, m, n = x.shape
        pooled = F.avg_pool2d(x, pool, stride=pool, ceil_mode=True,
                              count_include_pad=False)
        hp, wp = pooled.shape[2], pooled.shape[3]
        flat = pooled.reshape(batch, c, hp * wp)
        f = torch.einsum("oc,bcp->bop", self.w_f, flat)
        g = torch.einsum("oc,bcp->bop", self.w_g, flat)
        logits = torch.einsum("bop,boq->bpq", f, g)
        amap = torch.softmax(logits, dim=-1)
        h = torch.einsum("oc,bcp->bop", self.w_h, flat)
        mixed = torch.einsum("bcp,bpq->bcq", h, amap).reshape(batch, c, hp, wp)
        up = mixed.repeat_interleave(pool, dim=2).repeat_interleave(pool, dim=3)
        return self.gamma * up[:, :, :m, :n] + x


class TorchGenerator(nn.Module):
    """Image-to-image generator over (batch, 1, side, side) tensors.

    Inputs are raw-intensity images; normalization by `norm_max` happens
    inside the forward pass, mirroring the inference engine.
    """

    def __init__(self, layers: list, input_side: int, norm_max: float):
        super().__init__()
        validate_architecture(layers)
        self.specs = layers
        self.input_side = input_side
        self.register_buffer("norm_max", torch.tensor(float(norm_max)))
        self.blocks = nn.ModuleList([
            AttentionLayer(s) if s.kind == "attention" else ConvLayer(s)
            for s in layers
        ])

    def forward(self, x):
        x = x / self.norm_max
        for block in self.blocks:
            x = block(x)
        return x * self.norm_max

    def layer_outputs(self, x):
        """Per-layer activations on the normalized scale (for verification)."""
        x = x / self.norm_max
        outs = []
        for block in self.blocks:
            x = block(x)
            outs.append(x)
        return outs

    def to_weights(self) -> GeneratorWeights:
        params = []
        for spec, block in zip(self.specs, self.blocks):
            if spec.kind == "attention":
                params.append({
                    "w_f": block.w_f.detach().numpy().astype(np.float32),
                    "w_g": block.w_g.detach().numpy().astype(np.float32),
                    "w_h": block.w_h.detach().numpy().astype(np.float32),
                    "gamma": np.float32(block.gamma.detach().item()),
                })
            else:
                entry = {"weight": block.weight.detach().numpy().astype(np.float32)}
                if block.bias is not None:
                    entry["bias"] = block.bias.detach().numpy().astype(np.float32)
                params.append(entry)
        return GeneratorWeights(input_side=self.input_side,
                                norm_max=float(self.norm_max.item()),
                                layers=list(self.specs), params=params)

    @classmethod
    def from_weights(cls, weights: GeneratorWeights,
                     dtype=torch.float64) -> "TorchGenerator":
        model = cls(weights.layers, weights.input_side, weights.norm_max)
        with torch.no_grad():
            for spec, block, params in zip(weights.layers, model.blocks,
                                           weights.params):
                if spec.kind == "attention":
                    block.w_f.copy_(torch.as_tensor(params["w_f"]))
                    block.w_g.copy_(torch.as_tensor(params["w_g"]))
                    block.w_h.copy_(torch.as_tensor(params["w_h"]))
                    block.gamma.copy_(torch.as_tensor(float(params["gamma"])))
                else:
                    block.weight.copy_(torch.as_tensor(params["weight"]))
                    if block.bias is not None:
                        block.bias.copy_(torch.as_tensor(params["bias"]))
        return model.to(dtype)


def default_architecture(channels: tuple = (16, 16),
                         attention: bool = True) -> list:
    """Stride-1 conv stack with an optional attention block before the head.

    Stride-1 keeps the network one delta kernel away from the identity map,
    which a short training budget can actually reach, unlike an
    encoder-decoder that must relearn the whole image.
    """
    layers = [ConvSpec("conv", 1, channels[0])]
    for a, b in zip(channels, channels[1:]):
        layers.append(ConvSpec("conv", a, b))
    if attention:
        layers.append(AttentionSpec(channels=channels[-1],
                                    attn_channels=attn_channels_default(channels[-1])))
    layers.append(ConvSpec("conv", channels[-1], 1, activation="linear"))
    return layers


def build_generator(side: int, channels: tuple = (16, 16),
                    attention: bool = True,
                    norm_max: float = 1.0) -> TorchGenerator:
    """Default trainable generator, initialized near the identity map.

    Channel 0 carries the image through delta kernels; all other weights
    start small, so step 0 already reproduces the input and training only
    has to learn the correction.
    """
    model = TorchGenerator(default_architecture(channels, attention),
                           side, norm_max)
    with torch.no_grad():
        for block in model.blocks:
            if isinstance(block, ConvLayer) and block.spec.stride == 1:
                kh, kw = block.spec.kernel
                block.weight.mul_(0.05)
                block.weight[0, 0, kh // 2, kw // 2] += 1.0
    return model


class Discriminator(nn.Module):
    """Five stride-2 convolutions, global average pooling, affine score.

    The architecture never leaves this package: only the generator is
    exported, and the score feeds the adversarial loss during training.
    """

    def __init__(self, channels: tuple = (8, 16, 32, 32, 32)):
        super().__init__()
        layers = []
        prev = 1
        for ch in channels:
            layers.append(nn.Conv2d(prev, ch, 3, stride=2, padding=1))
            layers.append(nn.LeakyReLU(0.2))
            prev = ch
        self.features = nn.Sequential(*layers)
        self.score = nn.Linear(prev, 1)

    def forward(self, x):
        feats = self.features(x)
        pooled = feats.mean(dim=(2, 3))
        return self.score(pooled).squeeze(-1)
