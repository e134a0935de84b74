import numpy as np
import pytest
import torch
import torch.nn.functional as F

from tomoprior.nn import average_pool, upsample_nearest
from tomoprior.weights import (AttentionSpec, ConvSpec, GeneratorWeights,
                               init_random_params, tiny_architecture)
from tomoprior_trainer.model import (AttentionLayer, Discriminator,
                                     TorchGenerator, build_generator,
                                     default_architecture)
from tomoprior_trainer.train import TrainConfig, TrainingTrace, learning_rate
from tomoprior_trainer.verify import verify_weights


def tiny_weights(side=24, channels=(4, 8), attention=True, seed=0,
                 gamma=0.3, norm_max=1.0):
    layers = tiny_architecture(side=side, channels=channels,
                               attention=attention)
    params = init_random_params(layers, seed=seed, gamma=gamma)
    return GeneratorWeights(input_side=side, norm_max=norm_max,
                            layers=layers, params=params)


class TestPoolingParity:
    """The torch ops must compute the same thing as the reference numerics."""

    def test_avg_pool_matches_reference_partial_blocks(self):
        rng = np.random.default_rng(0)
        for side in (6, 7, 8):  # 7, 8 leave partial edge blocks at pool=3
            x = rng.random((2, side, side))
            ref = average_pool(x, 3)
            got = F.avg_pool2d(torch.tensor(x)[None], 3, stride=3,
                               ceil_mode=True, count_include_pad=False)
            np.testing.assert_allclose(got[0].numpy(), ref, atol=1e-15)

    def test_upsample_matches_reference(self):
        rng = np.random.default_rng(1)
        x = rng.random((2, 3, 3))
        ref = upsample_nearest(x, 3, 7, 8)
        t = torch.tensor(x)[None]
        up = t.repeat_interleave(3, dim=-2).repeat_interleave(3, dim=-1)
        np.testing.assert_allclose(up[0, :, :7, :8].numpy(), ref, atol=1e-15)


class TestTorchGenerator:
    def test_roundtrip_weights_preserved(self):
        w = tiny_weights(seed=3)
        model = TorchGenerator.from_weights(w)
        back = model.to_weights()
        assert back.input_side == w.input_side
        assert back.norm_max == w.norm_max
        assert [s.kind for s in back.layers] == [s.kind for s in w.layers]
        for a, b in zip(back.params, w.params):
            assert set(a) == set(b)
            for name in a:
                np.testing.assert_array_equal(a[name], b[name])

    def test_matches_reference_engine_tiny(self):
        passed, max_diff, details = verify_weights(tiny_weights(seed=7),
                                                   num_probes=4, seed=1)
        assert passed, details
        assert max_diff < 1e-10

    def test_matches_reference_engine_default_architecture(self):
        model = build_generator(16, channels=(8, 8)).to(torch.float64)
        passed, max_diff, details = verify_weights(model.to_weights(),
                                                   num_probes=3, seed=2)
        assert passed, details

    def test_norm_max_scaling(self):
        # f with norm_max=2 on 2x equals 2 * (f with norm_max=1 on x)
        w1 = tiny_weights(seed=5, norm_max=1.0)
        w2 = tiny_weights(seed=5, norm_max=2.0)
        m1 = TorchGenerator.from_weights(w1)
        m2 = TorchGenerator.from_weights(w2)
        x = torch.rand(1, 1, 24, 24, dtype=torch.float64,
                       generator=torch.Generator().manual_seed(0))
        with torch.no_grad():
            np.testing.assert_allclose(m2(2 * x).numpy(), 2 * m1(x).numpy(),
                                       atol=1e-12)

    def test_attention_gamma_zero_is_identity(self):
        layers = [AttentionSpec(channels=1, attn_channels=1)]
        params = init_random_params(layers, seed=0, gamma=0.0)
        w = GeneratorWeights(input_side=9, norm_max=1.0,
                             layers=layers, params=params)
        model = TorchGenerator.from_weights(w)
        x = torch.rand(2, 1, 9, 9, dtype=torch.float64,
                       generator=torch.Generator().manual_seed(1))
        with torch.no_grad():
            np.testing.assert_allclose(model(x).numpy(), x.numpy(), atol=0)

    def test_identity_biased_init_is_near_identity(self):
        model = build_generator(16).to(torch.float64)
        x = torch.rand(1, 1, 16, 16, dtype=torch.float64,
                       generator=torch.Generator().manual_seed(2))
        with torch.no_grad():
            out = model(x)
        assert (out - x).abs().max().item() < 0.5
        assert (out - x).abs().max().item() > 0.0  # not exactly identity


def central_fd(fn, tensor, idx, h=1e-6):
    plus = tensor.detach().clone()
    plus[idx] += h
    minus = tensor.detach().clone()
    minus[idx] -= h
    return (fn(plus) - fn(minus)).item() / (2 * h)


class TestGradients:
    def test_attention_block_gradients_match_finite_differences(self):
        spec = AttentionSpec(channels=3, attn_channels=1)
        layer = AttentionLayer(spec).to(torch.float64)
        with torch.no_grad():
            layer.gamma.fill_(0.5)
        x = torch.rand(1, 3, 6, 6, dtype=torch.float64,
                       generator=torch.Generator().manual_seed(3))
        target = torch.rand_like(x)

        def loss_of(**override):
            saved = {}
            with torch.no_grad():
                for name, value in override.items():
                    saved[name] = getattr(layer, name).clone()
                    getattr(layer, name).copy_(value)
            out = ((layer(x) - target) ** 2).sum()
            with torch.no_grad():
                for name, value in saved.items():
                    getattr(layer, name).copy_(value)
            return out

        loss = ((layer(x) - target) ** 2).sum()
        loss.backward()
        for name, idx in [("w_f", (0, 1)), ("w_g", (0, 2)),
                          ("w_h", (1, 0)), ("gamma", ())]:
            param = getattr(layer, name)
            h = 1e-6

            def fn(value, name=name):
                return loss_of(**{name: value})

            fd = central_fd(fn, param, idx, h)
            got = param.grad[idx].item() if idx else param.grad.item()
            assert got == pytest.approx(fd, rel=1e-3, abs=1e-8), name

    def test_generator_end_to_end_gradient(self):
        w = tiny_weights(side=8, channels=(2,), attention=True, seed=9)
        model = TorchGenerator.from_weights(w)
        x = torch.rand(1, 1, 8, 8, dtype=torch.float64,
                       generator=torch.Generator().manual_seed(4))
        loss = (model(x) ** 2).sum()
        loss.backward()
        block = model.blocks[0]
        idx = (0, 0, 1, 1)
        h = 1e-6
        with torch.no_grad():
            orig = block.weight[idx].item()

        def loss_at(value):
            with torch.no_grad():
                block.weight[idx] = value
                out = (model(x) ** 2).sum()
                block.weight[idx] = orig
            return out

        fd = (loss_at(orig + h) - loss_at(orig - h)).item() / (2 * h)
        assert block.weight.grad[idx].item() == pytest.approx(fd, rel=1e-3)


class TestTrainConfig:
    def test_learning_rate_endpoints_and_monotone(self):
        cfg = TrainConfig("d", "r", total_steps=500,
                          lr_start=1e-4, lr_end=2e-6)
        assert learning_rate(0, cfg) == pytest.approx(1e-4, rel=1e-12)
        assert learning_rate(499, cfg) == pytest.approx(2e-6, rel=1e-12)
        rates = [learning_rate(s, cfg) for s in range(500)]
        assert all(a > b for a, b in zip(rates, rates[1:]))

    def test_single_step_uses_lr_start(self):
        cfg = TrainConfig("d", "r", total_steps=1, lr_start=3e-3, lr_end=3e-3)
        assert learning_rate(0, cfg) == 3e-3

    @pytest.mark.parametrize("kwargs", [
        {"smooth_weight": 0.0},
        {"lr_end": 0.0},
        {"lr_start": 1e-6, "lr_end": 1e-4},
        {"total_steps": 0},
        {"batch_size": 0},
        {"checkpoint_every": 0},
    ])
    def test_invalid_config_rejected(self, kwargs):
        with pytest.raises(ValueError):
            TrainConfig("d", "r", **kwargs)


class TestTraceAndDiscriminator:
    def test_trace_csv(self, tmp_path):
        trace = TrainingTrace(steps=[0, 1], loss_g=[2.0, 1.0],
                              loss_d=[0.5, 0.4], val_steps=[1],
                              val_psnr=[31.25])
        path = tmp_path / "trace.csv"
        trace.write_csv(path)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "step,loss_G,loss_D,val_psnr"
        assert lines[1].startswith("0,") and lines[1].endswith(",")
        assert lines[2].endswith("31.2500")

    def test_discriminator_scalar_per_image(self):
        disc = Discriminator()
        out = disc(torch.rand(3, 1, 32, 32))
        assert out.shape == (3,)
        assert torch.isfinite(out).all()
