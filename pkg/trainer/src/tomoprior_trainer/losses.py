"""Training objectives: L2-plus-smoothness generator loss, LSGAN-style
discriminator loss.

The generator objective deliberately has no adversarial term: the
adversarial pressure enters only through the discriminator's own updates in
the alternating scheme.
"""

from __future__ import annotations

import torch


def generator_loss(target: torch.Tensor, generated: torch.Tensor,
                   smooth_weight: float = 1.0) -> torch.Tensor:
    """Squared-error data term plus squared forward-difference smoothness.

    Both terms are sums per image, averaged over the batch. `target` and
    `generated` are (batch, 1, h, w) or (h, w) tensors of matching shape.
    """
    if target.shape != generated.shape:
        raise ValueError(
            f"shape mismatch: target {tuple(target.shape)}, "
            f"generated {tuple(generated.shape)}")
    if smooth_weight <= 0:
        raise ValueError("smooth_weight must be > 0")
    if target.dim() == 2:
        target = target[None, None]
        generated = generated[None, None]
    batch = target.shape[0]
    fidelity = ((target - generated) ** 2).sum() / batch
    dh = generated[..., :, 1:] - generated[..., :, :-1]
    dv = generated[..., 1:, :] - generated[..., :-1, :]
    smooth = ((dh ** 2).sum() + (dv ** 2).sum()) / batch
    return fidelity + smooth_weight * smooth


def discriminator_loss(scores_real: torch.Tensor,
                       scores_generated: torch.Tensor) -> torch.Tensor:
    """Least-squares targets: 1 for reference images, 0 for generated ones."""
    return ((scores_real - 1.0) ** 2).mean() + (scores_generated ** 2).mean()
