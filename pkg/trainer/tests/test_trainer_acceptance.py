"""Acceptance gate for the training component.

Each test prints one `[acceptance] <criterion>: PASS/FAIL` line before
asserting, mirroring the reconstruction package's acceptance suite.
The heavy fixtures (toy dataset, three training runs) are module-scoped
and reused by the cross-component checks.
"""

import statistics
import time

import numpy as np
import pytest
import torch

from tomoprior import forward_project
from tomoprior.cli import main as tomoprior_main
from tomoprior.metrics import psnr
from tomoprior.phantoms import phantom_batch
from tomoprior.sart import ReconConfig, reconstruct
from tomoprior.simulate import apply_poisson_noise, get_scenario
from tomoprior.weights import AttentionSpec
from tomoprior_trainer.data import load_pairs, split_pairs
from tomoprior_trainer.losses import generator_loss
from tomoprior_trainer.model import AttentionLayer
from tomoprior_trainer.train import TrainConfig, train
from tomoprior_trainer.verify import export_and_verify

GRAD_RTOL = 1e-3
MIN_MEDIAN_GAIN_DB = 1.0
MAX_TRAIN_SECONDS = 20 * 60
VERIFY_TOL = 1e-4
MAX_PSNR_LOSS_DB = 0.1

TRAIN_SEEDS = (0, 1, 2)
TOY_STEPS = 2000


def report(name: str, passed: bool, detail: str = "") -> None:
    status = "PASS" if passed else "FAIL"
    suffix = f" ({detail})" if detail else ""
    print(f"[acceptance] {name}: {status}{suffix}")
    assert passed, f"{name}: {detail}"


@pytest.fixture(scope="module")
def toy_dataset(tmp_path_factory):
    """51-sample paired dataset: 17 phantoms x 3 degradation scenarios."""
    root = tmp_path_factory.mktemp("toy")
    data = root / "data"
    recon = root / "recon"
    assert tomoprior_main([
        "simulate", "--out", str(data), "--side", "32",
        "--phantoms", "17",
        "--scenario", "desk-low-1e4,sparse-50,desk-limited-140",
        "--reference", "desk-normal", "--seed", "11",
        "--iterations", "10", "--subsets", "10",
    ]) == 0
    assert tomoprior_main([
        "reconstruct", "--data", str(data), "--out", str(recon),
        "--method", "sart", "--iterations", "10", "--subsets", "10",
    ]) == 0
    return data, recon


@pytest.fixture(scope="module")
def training_runs(toy_dataset):
    """Three seeded training runs; returns per-seed PSNR gains, the seed-0
    checkpoint for the cross-component checks, and the wall time."""
    data, recon = toy_dataset
    pairs = load_pairs(data, recon)
    gains = []
    first_weights = None
    start = time.monotonic()
    for seed in TRAIN_SEEDS:
        config = TrainConfig(str(data), str(recon), total_steps=TOY_STEPS,
                             smooth_weight=1e-3, lr_start=2e-3, lr_end=2e-4,
                             checkpoint_every=200, seed=seed)
        weights, trace = train(config, pairs=pairs)
        _, val_pairs = split_pairs(pairs, config.val_fraction, seed)
        baseline = float(np.mean([psnr(p.degraded, p.reference)
                                  for p in val_pairs]))
        gains.append(max(trace.val_psnr) - baseline)
        if first_weights is None:
            first_weights = weights
    elapsed = time.monotonic() - start
    return gains, first_weights, elapsed


def test_acceptance_gradient_checks():
    """Attention-block parameter gradients and the image-domain loss
    gradient both match central finite differences to relative 1e-3."""
    torch.manual_seed(0)
    layer = AttentionLayer(AttentionSpec(channels=3, attn_channels=1)
                           ).to(torch.float64)
    with torch.no_grad():
        layer.gamma.fill_(0.7)
    x = torch.rand(1, 3, 6, 6, dtype=torch.float64)
    target = torch.rand_like(x)
    loss = ((layer(x) - target) ** 2).sum()
    loss.backward()
    h = 1e-6
    worst = 0.0
    for name in ("w_f", "w_g", "w_h", "gamma"):
        param = getattr(layer, name)
        flat = param.detach().reshape(-1)
        grad = param.grad.reshape(-1)
        for k in range(flat.numel()):
            orig = flat[k].item()
            with torch.no_grad():
                flat[k] = orig + h
                plus = ((layer(x) - target) ** 2).sum().item()
                flat[k] = orig - h
                minus = ((layer(x) - target) ** 2).sum().item()
                flat[k] = orig
            fd = (plus - minus) / (2 * h)
            rel = abs(grad[k].item() - fd) / max(abs(fd), 1e-8)
            worst = max(worst, rel)

    y = torch.rand(1, 1, 4, 4, dtype=torch.float64)
    gx = torch.rand(1, 1, 4, 4, dtype=torch.float64, requires_grad=True)
    generator_loss(y, gx, smooth_weight=0.5).backward()
    for idx in np.ndindex(4, 4):
        plus = gx.detach().clone()
        plus[0, 0, idx[0], idx[1]] += h
        minus = gx.detach().clone()
        minus[0, 0, idx[0], idx[1]] -= h
        fd = (generator_loss(y, plus, 0.5)
              - generator_loss(y, minus, 0.5)).item() / (2 * h)
        rel = abs(gx.grad[0, 0, idx[0], idx[1]].item() - fd) / max(abs(fd), 1e-8)
        worst = max(worst, rel)

    report("gradients match finite differences",
           worst < GRAD_RTOL, f"worst relative error {worst:.2e}")


def test_acceptance_toy_training_gain(training_runs):
    """Median held-out PSNR gain over three seeds is at least +1 dB after
    at most 2000 steps, inside the 20-minute CPU budget."""
    gains, _, elapsed = training_runs
    median = statistics.median(gains)
    detail = (f"gains {[f'{g:+.2f}' for g in gains]} dB, "
              f"median {median:+.2f} dB, {elapsed:.0f} s for 3 seeds")
    report("toy training raises held-out PSNR by >= 1 dB",
           median >= MIN_MEDIAN_GAIN_DB and elapsed < MAX_TRAIN_SECONDS,
           detail)


def test_acceptance_cross_component(training_runs, tmp_path):
    """The trained checkpoint round-trips through the weight file and both
    stacks agree at 1e-4; the reconstruction engine using it as a prior on
    50-view data loses no more than 0.1 dB versus plain iteration."""
    _, weights, _ = training_runs
    checkpoint = tmp_path / "toy.tpw"
    passed, max_diff, details = export_and_verify(weights, checkpoint,
                                                  num_probes=10, seed=0)
    report("export_and_verify at 1e-4 on 10 probes",
           passed and max_diff < VERIFY_TOL,
           f"max normalized diff {max_diff:.2e}")

    scenario = get_scenario("sparse-50")
    geom = scenario.geometry(32)
    plain_cfg = ReconConfig(iterations=10, num_subsets=10)
    gen_cfg = ReconConfig(iterations=10, num_subsets=10, prior="generator",
                          weights_path=str(checkpoint))
    plain_psnr, gen_psnr = [], []
    for i, phantom in enumerate(phantom_batch(5, side=32, seed=40)):
        noisy = apply_poisson_noise(forward_project(phantom, geom),
                                    scenario.beam_intensity, seed=300 + i)
        plain, _ = reconstruct(noisy, plain_cfg, side=32)
        withprior, _ = reconstruct(noisy, gen_cfg, side=32)
        plain_psnr.append(psnr(plain.values, phantom.values))
        gen_psnr.append(psnr(withprior.values, phantom.values))
    delta = float(np.mean(gen_psnr) - np.mean(plain_psnr))
    report("learned prior does not harm 50-view reconstruction",
           delta >= -MAX_PSNR_LOSS_DB,
           f"mean PSNR delta {delta:+.3f} dB over 5 phantoms")
