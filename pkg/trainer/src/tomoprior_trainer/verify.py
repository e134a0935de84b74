"""Cross-component verification: trainer forward vs the inference engine.

Both stacks run the same weight file on identical probe images; agreement is
required element-wise at 1e-4 on the normalized intensity scale. On failure
the per-layer activations are compared to name the first diverging layer.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
import torch

from tomoprior.nn import generator_forward, run_layer
from tomoprior.weights import GeneratorWeights, load_weights, save_weights

from .model import TorchGenerator

TOLERANCE = 1e-4


def _probe_images(weights: GeneratorWeights, num_probes: int,
                  seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    side = weights.input_side
    return rng.random((num_probes, side, side)) * weights.norm_max


def _first_diverging_layer(weights: GeneratorWeights, model: TorchGenerator,
                           probe: np.ndarray, tol: float) -> str:
    with torch.no_grad():
        torch_outs = model.layer_outputs(
            torch.tensor(probe, dtype=torch.float64)[None, None])
    x = probe[None, :, :] / weights.norm_max
    for idx, (spec, params) in enumerate(zip(weights.layers, weights.params)):
        x = run_layer(x, spec, params)
        diff = float(np.abs(x - torch_outs[idx][0].numpy()).max())
        if diff > tol:
            return f"layer {idx} ({spec.kind}), diff {diff:.3e}"
    return "divergence not localized to a single layer"


def verify_weights(weights: GeneratorWeights, num_probes: int = 10,
                   seed: int = 0, tol: float = TOLERANCE,
                   model: TorchGenerator | None = None
                   ) -> tuple[bool, float, str]:
    """(passed, max normalized diff, details) for an in-memory weight set."""
    if model is None:
        model = TorchGenerator.from_weights(weights, dtype=torch.float64)
    max_diff = 0.0
    worst_probe = None
    for probe in _probe_images(weights, num_probes, seed):
        reference = generator_forward(probe, weights)
        with torch.no_grad():
            ours = model(torch.tensor(probe, dtype=torch.float64)[None, None])
        diff = float(np.abs(reference - ours[0, 0].numpy()).max())
        diff /= weights.norm_max  # compare on the [0, 1] normalized scale
        if diff > max_diff:
            max_diff = diff
            worst_probe = probe
    if max_diff < tol:
        return True, max_diff, f"{num_probes} probes agree within {tol:g}"
    detail = _first_diverging_layer(weights, model, worst_probe, tol)
    return False, max_diff, detail


def verify_against_primary(weights_file, num_probes: int = 10,
                           seed: int = 0) -> tuple[bool, float, str]:
    """Load a TPW1 file and check both stacks agree on random probes."""
    return verify_weights(load_weights(weights_file), num_probes, seed)


def export_and_verify(weights: GeneratorWeights, path, num_probes: int = 10,
                      seed: int = 0) -> tuple[bool, float, str]:
    """Write the weight file, reload it, and verify cross-stack agreement."""
    save_weights(weights, path)
    passed, max_diff, detail = verify_against_primary(Path(path), num_probes,
                                                      seed)
    return passed, max_diff, detail
