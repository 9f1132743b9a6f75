"""Reverse-mode gradients vs central finite differences, per layer.

Full-network gradient checks live in test_networks.py; the shared tolerance is
rel <= 1e-4 with step 1e-5 in double precision, where rel compares each
gradient tensor's max deviation against its own scale.
"""

import numpy as np
import pytest
import torch

from tsgan import layers

DT = torch.float64
STEP = 1e-5
TOL = 1e-4


def fd_grad(fn, tensor, h=STEP):
    """Central finite differences of scalar fn() w.r.t. tensor entries."""
    grad = torch.zeros_like(tensor)
    flat = tensor.data.view(-1)
    gflat = grad.view(-1)
    with torch.no_grad():
        for i in range(flat.numel()):
            orig = flat[i].item()
            flat[i] = orig + h
            f_plus = fn()
            flat[i] = orig - h
            f_minus = fn()
            flat[i] = orig
            gflat[i] = (f_plus - f_minus) / (2 * h)
    return grad


def rel_err(a, b):
    scale = max(1.0, a.abs().max().item(), b.abs().max().item())
    return (a - b).abs().max().item() / scale


def check_module_grads(module, x, seed=0):
    """Compare autograd and FD gradients for all parameters and the input."""
    gen = torch.Generator().manual_seed(seed)
    out_shape = module(x).shape
    proj = torch.randn(out_shape, dtype=DT, generator=gen)

    def objective():
        return (module(x) * proj).sum()

    x.requires_grad_(True)
    for p in module.parameters():
        p.grad = None
    x.grad = None
    objective().backward()

    worst = 0.0
    for name, p in module.named_parameters():
        fd = fd_grad(lambda: objective().item(), p)
        err = rel_err(p.grad, fd)
        assert err <= TOL, f"gradient mismatch for {name}: {err:.2e}"
        worst = max(worst, err)
    fd_x = fd_grad(lambda: objective().item(), x)
    err = rel_err(x.grad, fd_x)
    assert err <= TOL, f"input gradient mismatch: {err:.2e}"
    return worst


@pytest.mark.parametrize("stride", [1, 2])
def test_regular_conv(stride):
    torch.manual_seed(100 + stride)
    layer = layers.RegularConv1d(3, 4, 3, stride=stride, dtype=DT)
    x = torch.randn(9, 3, dtype=DT)
    check_module_grads(layer, x)


def test_causal_conv():
    torch.manual_seed(102)
    layer = layers.CausalConv1d(2, 3, 4, dtype=DT)
    x = torch.randn(10, 2, dtype=DT)
    check_module_grads(layer, x)


def test_regular_attention():
    torch.manual_seed(103)
    layer = layers.RegularAttention(3, 8, 2, dtype=DT)
    x = torch.randn(7, 3, dtype=DT)
    check_module_grads(layer, x)


def test_sparse_attention():
    torch.manual_seed(104)
    layer = layers.SparseAttention(3, 8, 4, dtype=DT)
    x = torch.randn(9, 3, dtype=DT)
    check_module_grads(layer, x)


def test_causal_attention():
    torch.manual_seed(105)
    layer = layers.CausalAttention(3, 8, 2, rfs=4, dtype=DT)
    x = torch.randn(9, 3, dtype=DT)
    check_module_grads(layer, x)


@pytest.mark.parametrize("act", ["leaky_relu", "gelu", "tanh"])
def test_mlp(act):
    torch.manual_seed(106)
    layer = layers.MlpBlock(3, 5, act, dtype=DT)
    x = torch.randn(6, 3, dtype=DT)
    check_module_grads(layer, x)


def test_batch_norm_train_mode():
    torch.manual_seed(107)
    bn = layers.BatchNorm(3, dtype=DT).train()
    x = torch.randn(4, 5, 3, dtype=DT)
    check_module_grads(bn, x)


def test_batch_norm_eval_mode():
    torch.manual_seed(108)
    bn = layers.BatchNorm(3, dtype=DT)
    with torch.no_grad():
        bn.running_mean.copy_(torch.randn(3, dtype=DT))
        bn.running_var.copy_(torch.rand(3, dtype=DT) + 0.5)
    bn.eval()
    x = torch.randn(4, 5, 3, dtype=DT)
    check_module_grads(bn, x)


def test_layer_norm():
    torch.manual_seed(109)
    ln = layers.LayerNorm(4, dtype=DT)
    x = torch.randn(3, 6, 4, dtype=DT)
    check_module_grads(ln, x)


def test_spectral_normalize_weight_grad():
    # frozen iterate: sigma = |W^T u| is smooth in W, so FD applies directly
    torch.manual_seed(110)
    w = torch.randn(4, 3, dtype=DT)
    u = torch.randn(4, dtype=DT)
    u /= u.norm()
    for _ in range(100):
        layers.spectral_normalize(w, u)  # converge the iterate first
    proj = torch.randn(4, 3, dtype=DT)
    w.requires_grad_(True)

    def objective():
        return (layers.spectral_normalize(w, u, update=False) * proj).sum()

    objective().backward()
    fd = fd_grad(lambda: objective().item(), w)
    assert rel_err(w.grad, fd) <= TOL


def test_spectrally_normalized_layer_grad():
    torch.manual_seed(111)
    layer = layers.CausalConv1d(2, 3, 3, spectral_norm=True, dtype=DT)
    x = torch.randn(8, 2, dtype=DT)
    layer.eval()  # freeze the power iterate so FD sees a fixed function
    check_module_grads(layer, x)
