"""Sequence-layer primitives.

All layers operate on matrices with rows = time steps and columns = channels,
optionally with leading batch dimensions: ``(..., n_l, n_c)``.  Causal layers
shrink the time axis and their outputs align with the *last* rows of the input,
so output row ``t`` depends only on input rows up to the matching time index.

Attention logits are deliberately unscaled (no ``1/sqrt(head_size)`` factor):
head sizes here are small and the raw product works better.

Every weight-bearing layer accepts ``spectral_norm=True``, in which case the
weight used in the forward pass is the raw parameter divided by a running
power-iteration estimate of its largest singular value.  The estimate advances
one iteration per train-mode call and is frozen in eval mode, keeping
eval-mode networks deterministic functions of their input.
"""

from __future__ import annotations

import math

import torch
from torch import Tensor, nn

NEG_LARGE = 1.0e3  # additive mask magnitude; exp(-1e3) vanishes in both precisions
BN_EPS = 1.0e-5
SN_EPS = 1.0e-12

_ACTIVATIONS = {
    "identity": lambda x: x,
    "relu": torch.relu,
    "leaky_relu": lambda x: torch.nn.functional.leaky_relu(x, 0.2),
    "gelu": torch.nn.functional.gelu,
    "tanh": torch.tanh,
}


def resolve_activation(tag: str):
    try:
        return _ACTIVATIONS[tag]
    except KeyError:
        raise ValueError(f"unknown activation {tag!r}; choose from {sorted(_ACTIVATIONS)}") from None


def _check_input(x: Tensor, channels: int, name: str) -> None:
    if x.dim() < 2:
        raise ValueError(f"{name} expects (..., length, channels), got {tuple(x.shape)}")
    if x.shape[-1] != channels:
        raise ValueError(f"{name} expects {channels} channels, got {x.shape[-1]}")


def spectral_normalize(weight: Tensor, u: Tensor, update: bool = True,
                       eps: float = SN_EPS) -> Tensor:
    """Divide ``weight`` by a power-iteration estimate of its largest singular value.

    ``weight`` is treated as a matrix by flattening all but the last axis into
    rows; ``u`` is the persistent left iterate (a unit vector), advanced one
    power-iteration step in place when ``update`` is true.  The returned tensor
    carries gradients w.r.t. ``weight`` with ``u`` held constant, which matches
    the exact gradient at the power-iteration fixed point.  A zero weight comes
    back unchanged (the estimate is floored at ``eps``).
    """
    w2d = weight.reshape(-1, weight.shape[-1])
    if update:
        with torch.no_grad():
            v = w2d.t() @ u
            v = v / v.norm().clamp_min(eps)
            u_new = w2d @ v
            u_new = u_new / u_new.norm().clamp_min(eps)
            u.copy_(u_new)
    # clone so later in-place power steps cannot invalidate this graph
    sigma = (w2d.t() @ u.detach().clone()).norm().clamp_min(eps)
    return weight / sigma


class _SpectralModule(nn.Module):
    """Base for layers whose weights may be spectrally normalized."""

    def __init__(self, spectral_norm: bool = False):
        super().__init__()
        self.spectral_norm = spectral_norm
        self._sn_names: list[str] = []

    def _register_weight(self, name: str, weight: Tensor) -> None:
        setattr(self, name, nn.Parameter(weight))
        if self.spectral_norm:
            rows = weight.reshape(-1, weight.shape[-1]).shape[0]
            u = torch.randn(rows, dtype=weight.dtype)
            self.register_buffer(f"{name}_u", u / u.norm().clamp_min(SN_EPS))
            self._sn_names.append(name)

    def _w(self, name: str) -> Tensor:
        weight = getattr(self, name)
        if not self.spectral_norm:
            return weight
        return spectral_normalize(weight, getattr(self, f"{name}_u"), update=self.training)


def converge_power_iterations(model: nn.Module, steps: int = 30) -> None:
    """Advance every spectral-norm iterate in ``model`` until the estimates settle.

    Freshly built iterates are random, so the first normalized forward passes
    would divide by loose underestimates; running the iteration up front keeps
    initial activations at sane magnitudes.
    """
    for mod in model.modules():
        if isinstance(mod, _SpectralModule) and mod.spectral_norm:
            for name in mod._sn_names:
                weight = getattr(mod, name)
                u = getattr(mod, f"{name}_u")
                for _ in range(steps):
                    spectral_normalize(weight, u)


class RegularConv1d(_SpectralModule):
    """1-D convolution with odd kernel, stride and edge-replication padding.

    Output length is ``floor(n_l / stride)``; output row ``i`` (1-based) taps
    input rows ``stride*(i-1) + 1 - (n_k+1)/2 + k`` for ``k = 1..n_k``, with
    out-of-range taps replicating the first/last row.
    """

    def __init__(self, in_channels: int, out_channels: int, kernel_size: int,
                 stride: int = 1, spectral_norm: bool = False,
                 dtype: torch.dtype = torch.float32):
        super().__init__(spectral_norm)
        if kernel_size % 2 == 0:
            raise ValueError(f"regular convolution needs an odd kernel, got {kernel_size}")
        if stride < 1:
            raise ValueError("stride must be positive")
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.kernel_size = kernel_size
        self.stride = stride
        bound = 1.0 / math.sqrt(kernel_size * in_channels)
        weight = torch.empty(kernel_size, in_channels, out_channels, dtype=dtype)
        nn.init.uniform_(weight, -bound, bound)
        self._register_weight("weight", weight)
        self.bias = nn.Parameter(torch.zeros(out_channels, dtype=dtype))

    def output_length(self, n_l: int) -> int:
        return n_l // self.stride

    def forward(self, x: Tensor) -> Tensor:
        _check_input(x, self.in_channels, "RegularConv1d")
        n_l = x.shape[-2]
        out_len = self.output_length(n_l)
        if out_len < 1:
            raise ValueError(f"input length {n_l} shorter than stride {self.stride}")
        weight = self._w("weight")
        if self.kernel_size == 1:
            if self.stride > 1:
                x = x[..., : out_len * self.stride: self.stride, :]
            return x @ weight[0] + self.bias
        centers = torch.arange(out_len, device=x.device) * self.stride
        offsets = torch.arange(self.kernel_size, device=x.device) - (self.kernel_size - 1) // 2
        idx = (centers[:, None] + offsets[None, :]).clamp_(0, n_l - 1)
        windows = x[..., idx, :]  # (..., out_len, n_k, n_i)
        flat = windows.reshape(windows.shape[:-2] + (self.kernel_size * self.in_channels,))
        return flat @ weight.reshape(-1, self.out_channels) + self.bias


class CausalConv1d(_SpectralModule):
    """Causal 1-D convolution: output row t sums input rows t-n_k+1 .. t.

    Shrinks the time axis by ``kernel_size - 1``; receptive field = kernel size.
    """

    def __init__(self, in_channels: int, out_channels: int, kernel_size: int,
                 spectral_norm: bool = False, dtype: torch.dtype = torch.float32):
        super().__init__(spectral_norm)
        if kernel_size < 1:
            raise ValueError("kernel size must be >= 1")
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.kernel_size = kernel_size
        bound = 1.0 / math.sqrt(kernel_size * in_channels)
        weight = torch.empty(kernel_size, in_channels, out_channels, dtype=dtype)
        nn.init.uniform_(weight, -bound, bound)
        self._register_weight("weight", weight)
        self.bias = nn.Parameter(torch.zeros(out_channels, dtype=dtype))

    @property
    def shrinkage(self) -> int:
        return self.kernel_size - 1

    def forward(self, x: Tensor) -> Tensor:
        _check_input(x, self.in_channels, "CausalConv1d")
        n_l = x.shape[-2]
        if n_l < self.kernel_size:
            raise ValueError(f"input length {n_l} shorter than kernel {self.kernel_size}")
        weight = self._w("weight")
        if self.kernel_size == 1:
            return x @ weight[0] + self.bias
        windows = x.unfold(-2, self.kernel_size, 1)  # (..., out_len, n_i, n_k)
        flat = windows.reshape(windows.shape[:-2] + (self.in_channels * self.kernel_size,))
        w2d = weight.permute(1, 0, 2).reshape(self.in_channels * self.kernel_size,
                                              self.out_channels)
        return flat @ w2d + self.bias


def build_sparse_masks(n_l: int) -> Tensor:
    """The four boolean attend-allowed masks for length ``n_l`` (True = allowed).

    With stride ``s = floor(sqrt(n_l))`` and 1-based indices (i, j):

    * left floor:  same ``floor((.-1)/s)`` block and ``i >= j``
    * right floor: same block and ``i <= j``
    * left repetitive:  ``mod(j, s) == 0`` or ``i == j``
    * right repetitive: ``mod(j, s) == 1`` or ``i == j``

    Returned stacked as a ``(4, n_l, n_l)`` tensor in that order.
    """
    if n_l < 1:
        raise ValueError("n_l must be >= 1")
    s = int(math.isqrt(n_l))
    i = torch.arange(1, n_l + 1)[:, None]
    j = torch.arange(1, n_l + 1)[None, :]
    same_block = (i - 1) // s == (j - 1) // s
    diag = i == j
    s1 = same_block & (i >= j)
    s2 = same_block & (i <= j)
    s3 = (j % s == 0) | diag
    s4 = (j % s == 1) | diag
    return torch.stack([s1, s2, s3, s4])


class _MultiHeadAttention(_SpectralModule):
    """Shared projections + softmax(Q K^T [+ mask]) V machinery.

    Heads act on contiguous column blocks of size ``attn_size // num_heads``.
    Projections are initialized orthogonally.
    """

    def __init__(self, channels: int, attn_size: int, num_heads: int,
                 neg_large: float = NEG_LARGE, spectral_norm: bool = False,
                 dtype: torch.dtype = torch.float32):
        super().__init__(spectral_norm)
        if attn_size % num_heads != 0:
            raise ValueError(f"attention size {attn_size} not divisible by {num_heads} heads")
        if neg_large <= 0:
            raise ValueError("neg_large must be positive")
        self.channels = channels
        self.attn_size = attn_size
        self.num_heads = num_heads
        self.head_size = attn_size // num_heads
        self.neg_large = neg_large
        for name, shape in (("wq", (channels, attn_size)), ("wk", (channels, attn_size)),
                            ("wv", (channels, attn_size)), ("wo", (attn_size, channels))):
            weight = torch.empty(*shape, dtype=dtype)
            nn.init.orthogonal_(weight)
            self._register_weight(name, weight)
        self.bq = nn.Parameter(torch.zeros(attn_size, dtype=dtype))
        self.bk = nn.Parameter(torch.zeros(attn_size, dtype=dtype))
        self.bv = nn.Parameter(torch.zeros(attn_size, dtype=dtype))
        self.bo = nn.Parameter(torch.zeros(channels, dtype=dtype))
        self._mask_cache: dict[tuple, Tensor] = {}

    def _split_heads(self, m: Tensor) -> Tensor:
        # (..., n_l, n_a) -> (..., n_h, n_l, head)
        shape = m.shape[:-1] + (self.num_heads, self.head_size)
        return m.reshape(shape).transpose(-3, -2)

    def _attend(self, x: Tensor, mask: Tensor | None) -> Tensor:
        """mask: additive (num_heads-or-1, n_l, n_l) tensor, or None for dense."""
        q = self._split_heads(x @ self._w("wq") + self.bq)
        k = self._split_heads(x @ self._w("wk") + self.bk)
        v = self._split_heads(x @ self._w("wv") + self.bv)
        logits = q @ k.transpose(-1, -2)  # unscaled on purpose
        if mask is not None:
            logits = logits + mask
        attn = torch.softmax(logits, dim=-1)
        heads = attn @ v  # (..., n_h, n_l, head)
        merged = heads.transpose(-3, -2).reshape(x.shape[:-1] + (self.attn_size,))
        return merged @ self._w("wo") + self.bo

    def _additive(self, allowed: Tensor, like: Tensor) -> Tensor:
        zero = torch.zeros((), dtype=like.dtype, device=like.device)
        return torch.where(allowed.to(like.device), zero, zero - self.neg_large)


class RegularAttention(_MultiHeadAttention):
    """Dense multi-head attention; every output row may attend to every input row."""

    def forward(self, x: Tensor) -> Tensor:
        _check_input(x, self.channels, "RegularAttention")
        return self._attend(x, None)


class SparseAttention(_MultiHeadAttention):
    """Multi-head attention restricted by the four floor/repetitive masks.

    Head h (1-based) uses mask ``S_m`` with ``h = m (mod 4)``, so the head count
    must be a multiple of 4.
    """

    def __init__(self, channels: int, attn_size: int, num_heads: int,
                 neg_large: float = NEG_LARGE, spectral_norm: bool = False,
                 dtype: torch.dtype = torch.float32):
        if num_heads % 4 != 0:
            raise ValueError(f"sparse attention needs a multiple of 4 heads, got {num_heads}")
        super().__init__(channels, attn_size, num_heads, neg_large, spectral_norm, dtype)

    def _mask_for(self, n_l: int, like: Tensor) -> Tensor:
        key = (n_l, like.dtype, like.device)
        if key not in self._mask_cache:
            base = self._additive(build_sparse_masks(n_l), like)
            order = [h % 4 for h in range(self.num_heads)]
            self._mask_cache[key] = base[order]
        return self._mask_cache[key]

    def forward(self, x: Tensor) -> Tensor:
        _check_input(x, self.channels, "SparseAttention")
        return self._attend(x, self._mask_for(x.shape[-2], x))


class CausalAttention(_MultiHeadAttention):
    """Banded causal attention with receptive field ``rfs``.

    Row t attends rows t-rfs+1 .. t of the input; the first rfs-1 rows (which
    would see an incomplete window) are dropped, so the output has
    ``n_l - rfs + 1`` rows.  Parameter count is independent of ``rfs``.

    Equivalent to full attention with an additive band mask (0 inside the
    band, -neg_large outside), but computed on the rfs-wide windows directly:
    out-of-band softmax terms carry exp(-1e3) and underflow to exactly zero in
    either precision, so restricting the sum changes nothing.
    """

    def __init__(self, channels: int, attn_size: int, num_heads: int, rfs: int,
                 neg_large: float = NEG_LARGE, spectral_norm: bool = False,
                 dtype: torch.dtype = torch.float32):
        super().__init__(channels, attn_size, num_heads, neg_large, spectral_norm, dtype)
        if rfs < 1:
            raise ValueError("rfs must be >= 1")
        self.rfs = rfs

    @property
    def shrinkage(self) -> int:
        return self.rfs - 1

    def forward(self, x: Tensor) -> Tensor:
        _check_input(x, self.channels, "CausalAttention")
        n_l = x.shape[-2]
        if n_l < self.rfs:
            raise ValueError(f"input length {n_l} shorter than receptive field {self.rfs}")
        q = self._split_heads(x @ self._w("wq") + self.bq)[..., self.rfs - 1:, :]
        k = self._split_heads(x @ self._w("wk") + self.bk)
        v = self._split_heads(x @ self._w("wv") + self.bv)
        k_win = k.unfold(-2, self.rfs, 1)  # (..., h, out, head, rfs)
        v_win = v.unfold(-2, self.rfs, 1)
        logits = (q.unsqueeze(-2) @ k_win).squeeze(-2)  # unscaled on purpose
        attn = torch.softmax(logits, dim=-1)
        heads = (v_win @ attn.unsqueeze(-1)).squeeze(-1)  # (..., h, out, head)
        merged = heads.transpose(-3, -2).reshape(
            x.shape[:-2] + (n_l - self.rfs + 1, self.attn_size))
        return merged @ self._w("wo") + self.bo


class MlpBlock(_SpectralModule):
    """Two-layer perceptron applied per time step: h(x W1 + b1) W2 + b2."""

    def __init__(self, channels: int, hidden: int, activation: str = "gelu",
                 spectral_norm: bool = False, dtype: torch.dtype = torch.float32):
        super().__init__(spectral_norm)
        self.channels = channels
        self.hidden = hidden
        self.activation = activation
        self._act = resolve_activation(activation)
        w1 = torch.empty(channels, hidden, dtype=dtype)
        w2 = torch.empty(hidden, channels, dtype=dtype)
        nn.init.uniform_(w1, -1.0 / math.sqrt(channels), 1.0 / math.sqrt(channels))
        nn.init.uniform_(w2, -1.0 / math.sqrt(hidden), 1.0 / math.sqrt(hidden))
        self._register_weight("w1", w1)
        self._register_weight("w2", w2)
        self.b1 = nn.Parameter(torch.zeros(hidden, dtype=dtype))
        self.b2 = nn.Parameter(torch.zeros(channels, dtype=dtype))

    def forward(self, x: Tensor) -> Tensor:
        _check_input(x, self.channels, "MlpBlock")
        return self._act(x @ self._w("w1") + self.b1) @ self._w("w2") + self.b2


class BatchNorm(nn.Module):
    """Per-channel normalization over (batch x time) with running statistics.

    Train mode normalizes by the current batch moments (variance floored at
    ``eps``) and updates the running statistics; eval mode is a fixed affine
    map of the frozen statistics, so an eval-mode network is a deterministic
    function of its input.
    """

    def __init__(self, channels: int, momentum: float = 0.1, eps: float = BN_EPS,
                 dtype: torch.dtype = torch.float32):
        super().__init__()
        self.channels = channels
        self.momentum = momentum
        self.eps = eps
        self.gamma = nn.Parameter(torch.ones(channels, dtype=dtype))
        self.beta = nn.Parameter(torch.zeros(channels, dtype=dtype))
        self.register_buffer("running_mean", torch.zeros(channels, dtype=dtype))
        self.register_buffer("running_var", torch.ones(channels, dtype=dtype))

    def forward(self, x: Tensor) -> Tensor:
        _check_input(x, self.channels, "BatchNorm")
        if self.training:
            if x.dim() < 3 or x.shape[0] < 2:
                raise ValueError("train-mode batch normalization needs a batch of >= 2 samples")
            dims = tuple(range(x.dim() - 1))
            var, mean = torch.var_mean(x, dim=dims, unbiased=False)
            with torch.no_grad():
                self.running_mean.mul_(1 - self.momentum).add_(self.momentum * mean)
                self.running_var.mul_(1 - self.momentum).add_(self.momentum * var)
        else:
            mean, var = self.running_mean, self.running_var
        return (x - mean) / torch.sqrt(var.clamp_min(self.eps)) * self.gamma + self.beta


class LayerNorm(nn.Module):
    """Per-row normalization across channels with a per-channel affine map."""

    def __init__(self, channels: int, eps: float = BN_EPS, dtype: torch.dtype = torch.float32):
        super().__init__()
        self.channels = channels
        self.eps = eps
        self.gamma = nn.Parameter(torch.ones(channels, dtype=dtype))
        self.beta = nn.Parameter(torch.zeros(channels, dtype=dtype))

    def forward(self, x: Tensor) -> Tensor:
        _check_input(x, self.channels, "LayerNorm")
        var, mean = torch.var_mean(x, dim=-1, unbiased=False, keepdim=True)
        return (x - mean) / torch.sqrt(var.clamp_min(self.eps)) * self.gamma + self.beta


def make_norm(kind: str, channels: int, dtype: torch.dtype = torch.float32) -> nn.Module:
    if kind == "batch":
        return BatchNorm(channels, dtype=dtype)
    if kind == "layer":
        return LayerNorm(channels, dtype=dtype)
    raise ValueError(f"unknown normalization kind {kind!r}")
