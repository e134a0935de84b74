"""Paired training data loaded from reconstruction-package output directories.

The trainer never runs reconstructions itself: it consumes the dataset
manifest written by `tomoprior simulate` (reference reconstructions) and the
manifest written by `tomoprior reconstruct` (degraded-input reconstructions),
pairing them by sample id.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from tomoprior.io import load_image


@dataclass
class Pair:
    sample_id: str
    scenario: str
    degraded: np.ndarray  # network input
    reference: np.ndarray  # regression target


def load_pairs(data_dir, recon_dir, method: str = "sart") -> list[Pair]:
    data_dir = Path(data_dir)
    recon_dir = Path(recon_dir)
    manifest = json.loads((data_dir / "manifest.json").read_text())
    recon_manifest = json.loads((recon_dir / "recon_manifest.json").read_text())
    references = {s["id"]: s for s in manifest["samples"]}
    pairs = []
    for entry in recon_manifest["outputs"]:
        if entry["method"] != method:
            continue
        sample = references.get(entry["id"])
        if sample is None:
            raise ValueError(f"recon output {entry['id']} missing from dataset manifest")
        degraded = load_image(recon_dir / entry["image"]).values
        reference = load_image(data_dir / sample["reference_recon"]).values
        pairs.append(Pair(entry["id"], entry["scenario"], degraded, reference))
    if not pairs:
        raise ValueError(f"no '{method}' reconstructions found in {recon_dir}")
    return pairs


def norm_max_of(pairs: list[Pair]) -> float:
    """Normalization peak recorded in the exported weight file."""
    peak = max(max(p.degraded.max(), p.reference.max()) for p in pairs)
    if peak <= 0:
        raise ValueError("dataset images are all nonpositive")
    return float(peak)


def split_pairs(pairs: list[Pair], val_fraction: float,
                seed: int) -> tuple[list[Pair], list[Pair]]:
    if not (0.0 < val_fraction < 1.0):
        raise ValueError("val_fraction must lie in (0, 1)")
    order = np.random.default_rng(seed).permutation(len(pairs))
    n_val = max(1, int(round(val_fraction * len(pairs))))
    if n_val >= len(pairs):
        raise ValueError("validation split leaves no training samples")
    val_idx = set(order[:n_val].tolist())
    train = [p for i, p in enumerate(pairs) if i not in val_idx]
    val = [p for i, p in enumerate(pairs) if i in val_idx]
    return train, val
