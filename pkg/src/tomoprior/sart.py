"""Block-iterative SART with a pluggable per-iteration prior.

One full iteration sweeps every view subset with the normalized residual
update, then applies the configured prior (nonnegativity clamp, TV
superiorization, or a learned generator) followed by the feasibility clamp.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import ImageGrid, Sinogram, SubsetPartition, partition_subsets
from .projector import NormalizationWeights, Projector, normalization_weights

PRIORS = ("clamp", "tv-superiorize", "generator")


@dataclass
class ReconConfig:
    iterations: int = 20
    num_subsets: int = 50
    relaxation: float = 1.0
    prior: str = "clamp"
    prior_cadence: int = 1
    tv_steps: int = 10
    tv_beta0_scale: float = 0.2
    tv_shrink: float = 0.995
    weights_path: str | None = None

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.num_subsets < 1:
            raise ValueError("num_subsets must be >= 1")
        if not (0.0 < self.relaxation <= 2.0):
            raise ValueError("relaxation must lie in (0, 2]")
        if self.prior not in PRIORS:
            raise ValueError(f"prior must be one of {PRIORS}, got {self.prior!r}")
        if self.prior_cadence < 1:
            raise ValueError("prior_cadence must be >= 1")


def project_feasible(x: np.ndarray) -> np.ndarray:
    """Projection onto the nonnegative orthant: element-wise max(x, 0)."""
    return np.maximum(x, 0.0)


def sart_block_update(x: np.ndarray, sino_block: np.ndarray, views: np.ndarray,
                      projector: Projector, col_w: np.ndarray, row_w: np.ndarray,
                      relaxation: float = 1.0) -> np.ndarray:
    """One subset update x - lambda * D_w A_w^T M_w (A_w x - b_w)."""
    residual = projector.fp(x, views) - sino_block
    correction = projector.bp(row_w * residual, views)
    return x - relaxation * col_w * correction


def tv_value(x: np.ndarray, eps: float = 1e-8) -> float:
    """Smoothed isotropic total variation with replicate boundary."""
    dr = np.zeros_like(x)
    dc = np.zeros_like(x)
    dr[:-1, :] = x[1:, :] - x[:-1, :]
    dc[:, :-1] = x[:, 1:] - x[:, :-1]
    return float(np.sqrt(dr * dr + dc * dc + eps * eps).sum())


def tv_gradient(x: np.ndarray, eps: float = 1e-8) -> np.ndarray:
    """Analytic gradient of tv_value."""
    dr = np.zeros_like(x)
    dc = np.zeros_like(x)
    dr[:-1, :] = x[1:, :] - x[:-1, :]
    dc[:, :-1] = x[:, 1:] - x[:, :-1]
    denom = np.sqrt(dr * dr + dc * dc + eps * eps)
    gr = dr / denom
    gc = dc / denom
    grad = -gr - gc
    grad[1:, :] += gr[:-1, :]
    grad[:, 1:] += gc[:, :-1]
    return grad


class TVSuperiorizer:
    """TV-descent perturbations with a shrinking step persisted across calls.

    Each perturbation moves along the normalized negative TV gradient,
    clamps to the feasible set, and is only accepted when TV does not
    increase; otherwise the step is shrunk and retried (bounded retries).
    """

    def __init__(self, step_count: int = 10, beta0: float | None = None,
                 beta0_scale: float = 0.2, shrink: float = 0.995,
                 max_retries: int = 30):
        if not (0.0 < shrink < 1.0):
            raise ValueError("shrink factor must lie in (0, 1)")
        self.step_count = step_count
        self.beta0 = beta0
        self.beta0_scale = beta0_scale
        self.shrink = shrink
        self.max_retries = max_retries
        self.counter = 0
        self.trace: list = []  # (tv_before, tv_after) per accepted perturbation

    def apply(self, x: np.ndarray) -> np.ndarray:
        if self.beta0 is None:
            peak = float(x.max())
            if peak <= 0.0:
                return x
            self.beta0 = self.beta0_scale * peak
        x = project_feasible(x)
        for _ in range(self.step_count):
            g = tv_gradient(x)
            gnorm = float(np.linalg.norm(g))
            if gnorm == 0.0:
                return x
            direction = g / gnorm
            current_tv = tv_value(x)
            for _ in range(self.max_retries):
                beta = self.beta0 * self.shrink ** self.counter
                candidate = project_feasible(x - beta * direction)
                self.counter += 1
                candidate_tv = tv_value(candidate)
                if candidate_tv <= current_tv:
                    self.trace.append((current_tv, candidate_tv))
                    x = candidate
                    break
        return x


def tv_superiorize_step(x: np.ndarray, step_count: int, beta0: float,
                        shrink: float, state: TVSuperiorizer | None = None) -> np.ndarray:
    """Functional wrapper around TVSuperiorizer for one-off use."""
    sup = state or TVSuperiorizer(step_count=step_count, beta0=beta0, shrink=shrink)
    sup.step_count = step_count
    return sup.apply(x)


def _make_prior(config: ReconConfig, side: int):
    """Build the per-iteration prior; returns (array -> array, tv state or None)."""
    if config.prior == "clamp":
        return project_feasible, None
    if config.prior == "tv-superiorize":
        sup = TVSuperiorizer(step_count=config.tv_steps,
                             beta0_scale=config.tv_beta0_scale,
                             shrink=config.tv_shrink)
        return sup.apply, sup
    # generator: loaded lazily so reconstruction without weights never imports nn
    from .nn import generator_forward
    from .weights import load_weights

    if config.weights_path is None:
        raise ValueError("prior 'generator' requires weights_path")
    weights = load_weights(config.weights_path)
    if weights.input_side != side:
        raise ValueError(
            f"weight file expects side {weights.input_side}, sinogram implies {side}")

    def apply_generator(x: np.ndarray) -> np.ndarray:
        return project_feasible(generator_forward(x, weights))

    return apply_generator, None


def sart_full_iteration(x: np.ndarray, sino: Sinogram, partition: SubsetPartition,
                        weights: NormalizationWeights, projector: Projector,
                        relaxation: float = 1.0, prior=None) -> np.ndarray:
    """One pass over all subsets followed by the prior and feasibility clamp."""
    for w, views in enumerate(partition.subsets):
        x = sart_block_update(x, sino.values[views], views, projector,
                              weights.col_weights[w], weights.row_weights[w],
                              relaxation)
    if prior is not None:
        x = prior(x)
    return project_feasible(x)


@dataclass
class ReconDiagnostics:
    residuals: list = field(default_factory=list)   # relative ||Ax-b|| per iteration
    psnr_trace: list = field(default_factory=list)  # only when ground truth given
    tv_trace: list = field(default_factory=list)    # (before, after) TV per perturbation


def reconstruct(sino: Sinogram, config: ReconConfig, side: int | None = None,
                pixel_size: float = 1.0, ground_truth: ImageGrid | None = None,
                backend: str | None = None) -> tuple[ImageGrid, ReconDiagnostics]:
    """Run config.iterations full SART iterations from a zero initial image."""
    geom = sino.geometry
    if side is None:
        side = int(round(geom.num_detectors / 1.5))
    num_subsets = min(config.num_subsets, geom.num_views)
    partition = partition_subsets(geom.num_views, num_subsets)
    projector = Projector(geom, side, pixel_size, backend)
    weights = normalization_weights(geom, side, pixel_size, partition, projector)
    prior, tv_state = _make_prior(config, side)

    x = np.zeros((side, side))
    diag = ReconDiagnostics()
    if tv_state is not None:
        diag.tv_trace = tv_state.trace
    b_norm = float(np.linalg.norm(sino.values))
    for it in range(config.iterations):
        use_prior = prior if (it + 1) % config.prior_cadence == 0 else None
        x = sart_full_iteration(x, sino, partition, weights, projector,
                                config.relaxation, use_prior)
        residual = float(np.linalg.norm(projector.fp(x) - sino.values))
        diag.residuals.append(residual / b_norm if b_norm > 0 else residual)
        if ground_truth is not None:
            from .metrics import psnr
            diag.psnr_trace.append(psnr(x, ground_truth.values))
    return ImageGrid(x, pixel_size), diag
