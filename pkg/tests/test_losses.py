"""Loss-function values, stability and the gradient-norm operator."""

import math

import numpy as np
import pytest
import torch
from torch import nn

from tsgan import losses, networks
from tsgan.losses import LossConfig

ORIG = LossConfig(kind="original")
WGAN = LossConfig(kind="wgan_gp", gp_weight=10.0)
DT = torch.float64


def test_generator_loss_original_at_zero():
    val = losses.generator_loss(torch.zeros(1, dtype=DT), ORIG).item()
    assert abs(val - math.log(2.0)) <= 1e-12


def test_generator_loss_wgan_linear():
    assert losses.generator_loss(torch.tensor([1.5], dtype=DT), WGAN).item() == -1.5


def test_generator_loss_stabilized():
    val = losses.generator_loss(torch.tensor([-50.0], dtype=DT), ORIG).item()
    assert abs(val - math.log1p(math.exp(-(-50.0)))) / 50.0 <= 1e-12 or abs(val - 50.0) <= 1e-12
    assert np.isfinite(val)


def test_discriminator_loss_original_at_zero():
    val = losses.discriminator_loss(torch.zeros(3, dtype=DT), torch.zeros(3, dtype=DT),
                                    None, ORIG).item()
    assert abs(val - 2 * math.log(2.0)) <= 1e-12


def test_discriminator_loss_wgan_unit_norm():
    val = losses.discriminator_loss(torch.tensor([1.0], dtype=DT),
                                    torch.tensor([0.0], dtype=DT),
                                    torch.tensor([1.0], dtype=DT), WGAN).item()
    assert val == -1.0


def test_discriminator_loss_wgan_penalty():
    val = losses.discriminator_loss(torch.tensor([0.0], dtype=DT),
                                    torch.tensor([0.0], dtype=DT),
                                    torch.tensor([2.0], dtype=DT), WGAN).item()
    assert abs(val - 10.0) <= 1e-12


def test_grad_norms_required_iff_wgan():
    z = torch.zeros(2, dtype=DT)
    with pytest.raises(ValueError):
        losses.discriminator_loss(z, z, None, WGAN)
    with pytest.raises(ValueError):
        losses.discriminator_loss(z, z, z, ORIG)


def test_nonsaturating_identity():
    # -ln(sig(x)) equals the fake-score term -ln(1 - sig(-x)); a huge real
    # score makes the real term vanish exactly under softplus
    rng = np.random.default_rng(0)
    for x in rng.normal(scale=3.0, size=20):
        gl = losses.generator_loss(torch.tensor([x], dtype=DT), ORIG).item()
        dl = losses.discriminator_loss(torch.tensor([1.0e4], dtype=DT),
                                       torch.tensor([-x], dtype=DT), None, ORIG).item()
        assert abs(gl - dl) <= 1e-12


def test_penalty_zero_at_one_and_symmetric():
    for eps in (0.25, 1.0, 2.5):
        lo = losses.discriminator_loss(torch.zeros(1, dtype=DT), torch.zeros(1, dtype=DT),
                                       torch.tensor([1.0 - eps], dtype=DT), WGAN).item()
        hi = losses.discriminator_loss(torch.zeros(1, dtype=DT), torch.zeros(1, dtype=DT),
                                       torch.tensor([1.0 + eps], dtype=DT), WGAN).item()
        assert abs(lo - hi) <= 1e-12
    zero = losses.discriminator_loss(torch.zeros(1, dtype=DT), torch.zeros(1, dtype=DT),
                                     torch.ones(1, dtype=DT), WGAN).item()
    assert zero == 0.0


def test_losses_finite_at_extremes():
    for d in (-1.0e4, 1.0e4):
        t = torch.tensor([d], dtype=DT)
        assert np.isfinite(losses.generator_loss(t, ORIG).item())
        assert np.isfinite(losses.discriminator_loss(t, -t, None, ORIG).item())
        assert np.isfinite(losses.discriminator_loss(t, -t, torch.ones(1, dtype=DT), WGAN).item())


class TestInterpolate:
    def test_endpoints(self):
        x = torch.randn(4, 6, 2, dtype=DT, generator=torch.Generator().manual_seed(0))
        y = torch.randn(4, 6, 2, dtype=DT, generator=torch.Generator().manual_seed(1))
        assert torch.equal(losses.gp_interpolate(x, y, torch.zeros(4, dtype=DT)), x)
        assert torch.equal(losses.gp_interpolate(x, y, torch.ones(4, dtype=DT)), y)

    def test_midpoint(self):
        x = torch.zeros(5, 3, dtype=DT)
        y = torch.full((5, 3), 2.0, dtype=DT)
        out = losses.gp_interpolate(x, y, 0.5)
        assert torch.equal(out, torch.ones(5, 3, dtype=DT))

    def test_per_sample_draw(self):
        x = torch.zeros(2, 3, 1, dtype=DT)
        y = torch.ones(2, 3, 1, dtype=DT)
        out = losses.gp_interpolate(x, y, torch.tensor([0.25, 0.75], dtype=DT))
        assert torch.allclose(out[0], torch.full((3, 1), 0.25, dtype=DT))
        assert torch.allclose(out[1], torch.full((3, 1), 0.75, dtype=DT))

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            losses.gp_interpolate(torch.zeros(2, 3), torch.zeros(3, 2), 0.5)


class _SumAll(nn.Module):
    def forward(self, x):
        return x.sum(dim=(-1, -2))


class TestGradientNorm:
    def test_linear_sum_discriminator(self):
        l, d = 7, 3
        x = torch.randn(l, d, dtype=DT, generator=torch.Generator().manual_seed(2))
        norm = losses.gradient_norm(_SumAll(), x).item()
        assert norm == pytest.approx(math.sqrt(l * d), abs=1e-12)

    def test_zero_discriminator(self):
        zero = lambda x: (x * 0.0).sum(dim=(-1, -2))
        x = torch.randn(4, 2, dtype=DT)
        assert losses.gradient_norm(zero, x).item() == 0.0

    def test_batched_norms(self):
        x = torch.randn(5, 7, 3, dtype=DT)
        norms = losses.gradient_norm(_SumAll(), x)
        assert norms.shape == (5,)
        assert torch.allclose(norms, torch.full((5,), math.sqrt(21), dtype=DT))

    def test_matches_finite_differences(self):
        from test_gradients import fd_grad
        spec = networks.DiscriminatorSpec(
            family="ttgan", length=12, data_channels=1, hidden_channels=8,
            attn_layers=1, mlp_hidden=8, num_heads=4, attn_size=8)
        d = networks.build_discriminator(spec, 3, DT)
        d.eval()
        x = torch.randn(12, 1, dtype=DT, generator=torch.Generator().manual_seed(4))
        norm = losses.gradient_norm(d, x).item()
        probe = x.clone()
        g_fd = fd_grad(lambda: d(probe).item(), probe)
        assert norm == pytest.approx(g_fd.norm().item(), rel=1e-4)
