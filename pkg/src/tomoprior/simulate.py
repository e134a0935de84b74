"""Scan scenarios, Poisson noise injection, and paired dataset generation."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .geometry import ImageGrid, ParallelGeometry, Sinogram, default_num_detectors
from .projector import forward_project
from .sart import ReconConfig, reconstruct

KINDS = ("normal-dose", "low-dose", "sparse-view", "limited-angle")


@dataclass(frozen=True)
class ScanScenario:
    """Named degradation preset: dose level, view count, angular range."""

    name: str
    kind: str
    beam_intensity: float
    num_views: int
    angular_range: float = math.pi

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if self.beam_intensity <= 0:
            raise ValueError("beam_intensity must be > 0")
        if self.num_views < 1:
            raise ValueError("num_views must be >= 1")

    def geometry(self, side: int, pixel_size: float = 1.0) -> ParallelGeometry:
        return ParallelGeometry(
            num_views=self.num_views,
            num_detectors=default_num_detectors(side),
            angular_range=self.angular_range,
            detector_spacing=pixel_size,
        )


def _deg(d: float) -> float:
    return math.radians(d)


SCENARIOS = {
    # paper protocol: 900 views over 180 degrees, constant 0.2 deg/view density
    "normal": ScanScenario("normal", "normal-dose", 1e6, 900, _deg(180)),
    "low-1e5": ScanScenario("low-1e5", "low-dose", 1e5, 900, _deg(180)),
    "low-1e4": ScanScenario("low-1e4", "low-dose", 1e4, 900, _deg(180)),
    "sparse-100": ScanScenario("sparse-100", "sparse-view", 1e6, 100, _deg(180)),
    "sparse-60": ScanScenario("sparse-60", "sparse-view", 1e6, 60, _deg(180)),
    "sparse-50": ScanScenario("sparse-50", "sparse-view", 1e6, 50, _deg(180)),
    "limited-160": ScanScenario("limited-160", "limited-angle", 1e6, 800, _deg(160)),
    "limited-140": ScanScenario("limited-140", "limited-angle", 1e6, 700, _deg(140)),
    "limited-120": ScanScenario("limited-120", "limited-angle", 1e6, 600, _deg(120)),
    # desk-scale analogues of the above (180 views over 180 degrees reference)
    "desk-normal": ScanScenario("desk-normal", "normal-dose", 1e6, 180, _deg(180)),
    "desk-low-1e5": ScanScenario("desk-low-1e5", "low-dose", 1e5, 180, _deg(180)),
    "desk-low-1e4": ScanScenario("desk-low-1e4", "low-dose", 1e4, 180, _deg(180)),
    "desk-limited-140": ScanScenario("desk-limited-140", "limited-angle", 1e6, 140, _deg(140)),
}

# the training mixture: normal dose plus the five degradations trained on
PAPER_TRAIN_SCENARIOS = ["normal", "low-1e5", "low-1e4", "sparse-100",
                         "sparse-50", "limited-140"]
DESK_TRAIN_SCENARIOS = ["desk-normal", "desk-low-1e5", "desk-low-1e4",
                        "sparse-100", "sparse-50", "desk-limited-140"]


def get_scenario(name: str) -> ScanScenario:
    try:
        return SCENARIOS[name]
    except KeyError:
        raise KeyError(
            f"unknown scenario {name!r}; available: {', '.join(SCENARIOS)}"
        ) from None


def apply_poisson_noise(sino: Sinogram, beam_intensity: float, seed: int) -> Sinogram:
    """Beer-Lambert count noise: c ~ Poisson(I0 * exp(-p)), p' = ln(I0 / max(c, 1)).

    Deterministic for a given (seed, sinogram shape); draws come from a
    counter-based Philox stream keyed by the seed.
    """
    if beam_intensity <= 0:
        raise ValueError("beam_intensity must be > 0")
    p = sino.values
    if np.any(p < 0):
        raise ValueError("line integrals must be nonnegative before noise injection")
    rng = np.random.Generator(np.random.Philox(key=np.uint64(seed)))
    counts = rng.poisson(beam_intensity * np.exp(-p))
    noisy = np.log(beam_intensity / np.maximum(counts, 1))
    return Sinogram(sino.geometry, noisy)


def simulate_scenario(phantom: ImageGrid, scenario: ScanScenario, seed: int,
                      reference: ScanScenario | None = None
                      ) -> tuple[Sinogram, Sinogram]:
    """Clean (reference normal-dose) and degraded (scenario) noisy sinograms."""
    if reference is None:
        reference = SCENARIOS["normal"]
    clean = forward_project(phantom, reference.geometry(phantom.side, phantom.pixel_size))
    degraded = forward_project(phantom, scenario.geometry(phantom.side, phantom.pixel_size))
    # distinct fixed subkeys so the two noise draws are independent
    clean = apply_poisson_noise(clean, reference.beam_intensity, seed * 2 + 0)
    degraded = apply_poisson_noise(degraded, scenario.beam_intensity, seed * 2 + 1)
    return clean, degraded


@dataclass
class PairedSample:
    clean_recon: ImageGrid
    degraded_recon: ImageGrid
    scenario: ScanScenario
    seed: int
    rotation: int = 0  # multiples of 90 degrees


DATASET_RECON = ReconConfig(iterations=20, num_subsets=50, prior="clamp")


def build_paired_dataset(phantoms: list[ImageGrid], scenarios: list[ScanScenario],
                         augment_rotations: int = 1, seed: int = 0,
                         reference: ScanScenario | None = None,
                         recon_config: ReconConfig | None = None) -> list[PairedSample]:
    """SART-reconstructed (clean, degraded) pairs for every phantom x rotation x scenario."""
    if augment_rotations not in (1, 2, 4):
        raise ValueError("augment_rotations must be 1, 2 or 4")
    config = recon_config or DATASET_RECON
    rotations = [0, 2, 1, 3][:augment_rotations]  # 0/180 first, then 90/270
    samples = []
    counter = 0
    for phantom in phantoms:
        if phantom.values.shape[0] != phantom.values.shape[1]:
            raise ValueError("phantoms must be square")
        for rot in sorted(rotations):
            rotated = ImageGrid(np.rot90(phantom.values, rot).copy(), phantom.pixel_size)
            for scenario in scenarios:
                sample_seed = seed + counter
                counter += 1
                clean_sino, degraded_sino = simulate_scenario(
                    rotated, scenario, sample_seed, reference)
                clean_recon, _ = reconstruct(clean_sino, config, side=rotated.side,
                                             pixel_size=rotated.pixel_size)
                degraded_recon, _ = reconstruct(degraded_sino, config, side=rotated.side,
                                                pixel_size=rotated.pixel_size)
                samples.append(PairedSample(clean_recon, degraded_recon,
                                            scenario, sample_seed, rot))
    return samples


def desk_scenario(name: str) -> ScanScenario:
    """Scenario preset with the desk-scale reference density when available."""
    return get_scenario(name)


def scaled_scenario(scenario: ScanScenario, view_scale: float) -> ScanScenario:
    """Scenario with the view count scaled down (angular density preserved)."""
    return replace(scenario, num_views=max(1, int(round(scenario.num_views * view_scale))),
                   name=f"{scenario.name}-x{view_scale:g}")
