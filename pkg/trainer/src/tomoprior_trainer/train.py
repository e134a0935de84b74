"""Alternating generator/discriminator training with best-validation export."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from tomoprior.metrics import psnr
from tomoprior.weights import GeneratorWeights, save_weights

from .data import Pair, load_pairs, norm_max_of, split_pairs
from .losses import discriminator_loss, generator_loss
from .model import Discriminator, build_generator

ADAM_BETAS = (0.9, 0.999)
ADAM_EPS = 1e-8


@dataclass
class TrainConfig:
    data_dir: str
    recon_dir: str
    batch_size: int = 16
    total_steps: int = 1000
    lr_start: float = 1e-4
    lr_end: float = 2e-6
    smooth_weight: float = 1.0
    val_fraction: float = 0.2
    checkpoint_every: int = 100
    attention: bool = True
    channels: tuple = (16, 16)
    method: str = "sart"
    seed: int = 0

    def __post_init__(self):
        if self.smooth_weight <= 0:
            raise ValueError("smooth_weight must be > 0")
        if not (0 < self.lr_end <= self.lr_start):
            raise ValueError("need 0 < lr_end <= lr_start")
        if self.total_steps < 1 or self.batch_size < 1:
            raise ValueError("total_steps and batch_size must be >= 1")
        if self.checkpoint_every < 1:
            raise ValueError("checkpoint_every must be >= 1")


def learning_rate(step: int, config: TrainConfig) -> float:
    """Log-linear decay hitting lr_start at step 0 and lr_end at the last step."""
    if config.total_steps == 1:
        return config.lr_start
    t = step / (config.total_steps - 1)
    return config.lr_start * (config.lr_end / config.lr_start) ** t


@dataclass
class TrainingTrace:
    steps: list = field(default_factory=list)
    loss_g: list = field(default_factory=list)
    loss_d: list = field(default_factory=list)
    val_steps: list = field(default_factory=list)
    val_psnr: list = field(default_factory=list)

    def write_csv(self, path) -> None:
        val_at = dict(zip(self.val_steps, self.val_psnr))
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["step", "loss_G", "loss_D", "val_psnr"])
            for step, lg, ld in zip(self.steps, self.loss_g, self.loss_d):
                val = val_at.get(step)
                writer.writerow([step, f"{lg:.6e}", f"{ld:.6e}",
                                 "" if val is None else f"{val:.4f}"])


def _batches(n: int, batch_size: int, generator: torch.Generator):
    while True:
        perm = torch.randperm(n, generator=generator)
        for start in range(0, n, batch_size):
            yield perm[start:start + batch_size]


def _stack(pairs: list[Pair]) -> tuple[torch.Tensor, torch.Tensor]:
    x = torch.tensor(np.stack([p.degraded for p in pairs]),
                     dtype=torch.float32)[:, None]
    y = torch.tensor(np.stack([p.reference for p in pairs]),
                     dtype=torch.float32)[:, None]
    return x, y


def validation_psnr(model, val_x: torch.Tensor, val_y: torch.Tensor) -> float:
    with torch.no_grad():
        out = model(val_x)
    values = [psnr(out[i, 0].numpy().astype(np.float64),
                   val_y[i, 0].numpy().astype(np.float64))
              for i in range(val_x.shape[0])]
    return float(np.mean(values))


def train(config: TrainConfig,
          pairs: list[Pair] | None = None) -> tuple[GeneratorWeights, TrainingTrace]:
    """Run the adversarial loop; returns the best-validation weights and trace."""
    if pairs is None:
        pairs = load_pairs(config.data_dir, config.recon_dir, config.method)
    train_pairs, val_pairs = split_pairs(pairs, config.val_fraction, config.seed)
    side = train_pairs[0].degraded.shape[0]
    norm_max = norm_max_of(pairs)

    torch.manual_seed(config.seed)
    generator = build_generator(side, config.channels, config.attention, norm_max)
    discriminator = Discriminator()
    opt_g = torch.optim.Adam(generator.parameters(), lr=config.lr_start,
                             betas=ADAM_BETAS, eps=ADAM_EPS)
    opt_d = torch.optim.Adam(discriminator.parameters(), lr=config.lr_start,
                             betas=ADAM_BETAS, eps=ADAM_EPS)

    train_x, train_y = _stack(train_pairs)
    val_x, val_y = _stack(val_pairs)
    sampler = torch.Generator().manual_seed(config.seed)
    batches = _batches(len(train_pairs), config.batch_size, sampler)

    trace = TrainingTrace()
    best_psnr = -math.inf
    best_weights = generator.to_weights()
    for step in range(config.total_steps):
        lr = learning_rate(step, config)
        for opt in (opt_g, opt_d):
            for group in opt.param_groups:
                group["lr"] = lr

        idx = next(batches)
        x = train_x[idx]
        y = train_y[idx]

        opt_g.zero_grad()
        generated = generator(x)
        loss_g = generator_loss(y, generated, config.smooth_weight)
        loss_g.backward()
        opt_g.step()

        opt_d.zero_grad()
        loss_d = discriminator_loss(discriminator(y),
                                    discriminator(generated.detach()))
        loss_d.backward()
        opt_d.step()

        lg = float(loss_g.item())
        ld = float(loss_d.item())
        if not (math.isfinite(lg) and math.isfinite(ld)):
            raise RuntimeError(f"non-finite loss at step {step} "
                               f"(loss_G={lg}, loss_D={ld})")
        trace.steps.append(step)
        trace.loss_g.append(lg)
        trace.loss_d.append(ld)

        last = step == config.total_steps - 1
        if (step + 1) % config.checkpoint_every == 0 or last:
            val = validation_psnr(generator, val_x, val_y)
            trace.val_steps.append(step)
            trace.val_psnr.append(val)
            if val > best_psnr:
                best_psnr = val
                best_weights = generator.to_weights()
    return best_weights, trace


def train_and_export(config: TrainConfig, weights_path,
                     trace_path=None) -> tuple[GeneratorWeights, TrainingTrace]:
    weights, trace = train(config)
    save_weights(weights, weights_path)
    if trace_path is not None:
        trace.write_csv(trace_path)
    return weights, trace
