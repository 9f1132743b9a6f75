"""GAN objectives: the original cross-entropy form and the Wasserstein
gradient-penalty form.

The discriminator emits raw real scores; for the original loss, its sigmoid is
the "looks real" probability.  The generator side of the original loss uses
the non-saturating form -ln(sigmoid(d_fake)).  All sigmoids go through
softplus, i.e. log-sum-exp, so +-1e4 scores stay finite.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
from torch import Tensor
from torch.nn.functional import softplus

LOSS_KINDS = ("original", "wgan_gp")


@dataclass(frozen=True)
class LossConfig:
    kind: str = "wgan_gp"
    gp_weight: float = 10.0  # gradient-penalty coefficient; wgan_gp only

    def __post_init__(self):
        if self.kind not in LOSS_KINDS:
            raise ValueError(f"unknown loss kind {self.kind!r}")
        if self.gp_weight < 0:
            raise ValueError("gp_weight must be >= 0")


def _as_batch(x) -> Tensor:
    t = torch.as_tensor(x, dtype=torch.get_default_dtype() if not torch.is_tensor(x) else None)
    return t.reshape(1) if t.dim() == 0 else t


def generator_loss(d_fake, cfg: LossConfig) -> Tensor:
    """original: mean -ln(sigmoid(d_fake)); wgan_gp: mean -d_fake."""
    d_fake = _as_batch(d_fake)
    if cfg.kind == "original":
        return softplus(-d_fake).mean()
    return -d_fake.mean()


def discriminator_loss(d_real, d_fake, grad_norms, cfg: LossConfig) -> Tensor:
    """original: mean -ln(sig(d_r)) - ln(1 - sig(d_f));
    wgan_gp: mean(-d_r + d_f + gp_weight * (|g| - 1)^2).

    ``grad_norms`` (per-sample gradient norms at the interpolates) must be
    supplied exactly when the loss is wgan_gp.
    """
    d_real, d_fake = _as_batch(d_real), _as_batch(d_fake)
    if cfg.kind == "original":
        if grad_norms is not None:
            raise ValueError("grad_norms are only used by the wgan_gp loss")
        return (softplus(-d_real) + softplus(d_fake)).mean()
    if grad_norms is None:
        raise ValueError("wgan_gp loss needs gradient norms")
    grad_norms = _as_batch(grad_norms)
    penalty = cfg.gp_weight * ((grad_norms - 1.0) ** 2).mean()
    return -d_real.mean() + d_fake.mean() + penalty


def gp_interpolate(x_real: Tensor, x_fake: Tensor, u) -> Tensor:
    """(1-u) * x_real + u * x_fake with one draw per batch element."""
    if x_real.shape != x_fake.shape:
        raise ValueError(f"shape mismatch: {tuple(x_real.shape)} vs {tuple(x_fake.shape)}")
    u = torch.as_tensor(u, dtype=x_real.dtype, device=x_real.device)
    if u.dim() > 0:
        u = u.reshape(u.shape + (1,) * (x_real.dim() - u.dim()))
    return (1.0 - u) * x_real + u * x_fake


def gradient_norm(d, x_tilde: Tensor, create_graph: bool = False) -> Tensor:
    """Frobenius norm of d(d output)/d(x_tilde), per sample.

    ``d`` is any callable mapping (..., l, c) to per-sample scores.  Returns a
    scalar tensor for a single (l, c) input, a (batch,) tensor otherwise.  Pass
    ``create_graph=True`` when the norms feed a loss that is differentiated
    again (the gradient-penalty path).
    """
    x = x_tilde.detach().requires_grad_(True)
    scores = d(x)
    grads, = torch.autograd.grad(scores.sum(), x, create_graph=create_graph)
    if x.dim() <= 2:
        return grads.norm()
    return grads.reshape(grads.shape[0], -1).norm(dim=1)
