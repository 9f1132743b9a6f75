"""Generator and discriminator assemblies.

Two families are provided:

* ``tagan`` — convolutional stacks with one attention layer in the middle.
  The generator uses causal convolutions and causal attention; the
  discriminator uses regular strided convolutions (halving the length per
  block while growing channels) and regular attention.
* ``ttgan`` — transformer stacks.  The generator uses causal attention + MLP
  blocks with per-layer receptive fields; the discriminator uses sparse
  attention + MLP blocks and a trainable (length x heads) readout.

Both generators consume noise of length ``l + f - 1`` and emit ``l`` output
rows, where ``f`` is the total receptive field: output row t is a function of
noise rows t-f+1 .. t only, so pieces generated from a shared noise stream
agree on overlaps and can be spliced seamlessly.

Residual connections add the block input to the block output, cropping the
input to the last rows when causal shrinkage misaligns lengths.  Skip
connections project each block output through a 1x1 convolution and sum the
crops into the pre-output accumulator.  Batch normalization sits before each
activation (tagan) or sublayer (ttgan); spectral normalization wraps all
layer weights.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass

import numpy as np
import torch
from torch import Tensor, nn

from tsgan import layers

CHECKPOINT_FORMAT = "tsgan-checkpoint-v1"

AUGMENT_MODES = ("none", "cumsum", "returns")

_FAMILY_ACTIVATIONS = {"tagan": "leaky_relu", "ttgan": "gelu"}


def split_rfs(total_rfs: int, parts: int) -> tuple[int, ...]:
    """Split a total receptive field into per-layer fields, largest first.

    Per-layer shrinkages (rfs_j - 1) must add up to total_rfs - 1.
    """
    if parts < 1:
        raise ValueError("need at least one layer")
    shrink = total_rfs - 1
    if shrink < 0:
        raise ValueError("total rfs must be >= 1")
    base, rem = divmod(shrink, parts)
    return tuple(base + 1 + (1 if i < rem else 0) for i in range(parts))


@dataclass(frozen=True)
class GeneratorSpec:
    """Architecture hyperparameters for a generator."""

    family: str = "ttgan"
    length: int = 128            # l: nominal output window length
    rfs: int = 127               # f: total receptive field
    noise_channels: int = 3      # d_n
    data_channels: int = 1       # d
    hidden_channels: int = 64    # d_h
    # tagan
    kernel_size: int = 3
    blocks_before: int = 3       # conv blocks before the attention layer
    blocks_after: int = 3        # conv blocks after it
    # ttgan
    attn_layers: int = 5
    layer_rfs: tuple[int, ...] | None = None  # per-attention rfs; split evenly when None
    mlp_hidden: int | None = None
    # attention
    num_heads: int = 4
    attn_size: int = 32
    activation: str | None = None
    norm: str = "batch"          # "batch" | "layer"

    def __post_init__(self):
        if self.layer_rfs is not None:
            object.__setattr__(self, "layer_rfs", tuple(int(v) for v in self.layer_rfs))
        self.validate()

    def validate(self) -> None:
        if self.family not in ("tagan", "ttgan"):
            raise ValueError(f"unknown generator family {self.family!r}")
        if self.length < 1 or self.rfs < 1:
            raise ValueError("length and rfs must be positive")
        if self.norm not in ("batch", "layer"):
            raise ValueError(f"unknown norm kind {self.norm!r}")
        if self.attn_size % self.num_heads != 0:
            raise ValueError("attention size must be divisible by the head count")
        if self.family == "tagan":
            if self.attention_rfs < 1:
                raise ValueError(
                    f"rfs budget exhausted: {self.rfs} leaves attention rfs "
                    f"{self.attention_rfs} after {self.blocks_before + self.blocks_after} "
                    f"conv blocks of kernel {self.kernel_size}")
        else:
            rfs = self.resolved_layer_rfs
            if len(rfs) != self.attn_layers:
                raise ValueError("layer_rfs length must equal attn_layers")
            if any(f < 1 for f in rfs):
                raise ValueError("every per-layer rfs must be >= 1")
            if sum(f - 1 for f in rfs) != self.rfs - 1:
                raise ValueError(
                    f"per-layer shrinkages {tuple(f - 1 for f in rfs)} must add up to rfs-1={self.rfs - 1}")

    @property
    def attention_rfs(self) -> int:
        """Receptive field of the embedded attention layer (tagan)."""
        return self.rfs - 2 * (self.blocks_before + self.blocks_after) * (self.kernel_size - 1)

    @property
    def resolved_layer_rfs(self) -> tuple[int, ...]:
        if self.layer_rfs is not None:
            return self.layer_rfs
        return split_rfs(self.rfs, self.attn_layers)

    @property
    def resolved_activation(self) -> str:
        return self.activation or _FAMILY_ACTIVATIONS[self.family]

    @property
    def resolved_mlp_hidden(self) -> int:
        return self.mlp_hidden or 2 * self.hidden_channels


@dataclass(frozen=True)
class DiscriminatorSpec:
    """Architecture hyperparameters for a discriminator."""

    family: str = "ttgan"
    length: int = 128
    data_channels: int = 1
    augment: str = "none"        # "none" | "cumsum" | "returns"
    # tagan
    start_channels: int = 32     # d_s
    max_channels: int = 128      # d_m
    kernel_size: int = 3
    blocks_before: int = 3
    blocks_after: int = 3
    # ttgan
    hidden_channels: int = 64
    attn_layers: int = 5
    mlp_hidden: int | None = None
    # attention
    num_heads: int = 4
    attn_size: int = 32
    activation: str | None = None
    norm: str = "batch"

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.family not in ("tagan", "ttgan"):
            raise ValueError(f"unknown discriminator family {self.family!r}")
        if self.augment not in AUGMENT_MODES:
            raise ValueError(f"unknown augment mode {self.augment!r}")
        if self.augment == "cumsum" and self.data_channels != 1:
            raise ValueError("cumsum augmentation needs a single data channel")
        if self.norm not in ("batch", "layer"):
            raise ValueError(f"unknown norm kind {self.norm!r}")
        if self.attn_size % self.num_heads != 0:
            raise ValueError("attention size must be divisible by the head count")
        if self.family == "tagan":
            if self.length // 2 ** (self.blocks_before + self.blocks_after) < 1:
                raise ValueError("length collapses to zero under the stride-2 schedule")
        else:
            if self.num_heads % 4 != 0:
                raise ValueError("sparse attention needs a multiple of 4 heads")
            if self.num_heads > self.hidden_channels:
                raise ValueError("readout weight needs num_heads <= hidden_channels")

    @property
    def in_channels(self) -> int:
        return self.data_channels * (1 if self.augment == "none" else 2)

    def channel_at(self, depth: int) -> int:
        """Channel width of the stride block at 1-based depth (tagan schedule)."""
        return min(2 ** (depth - 1) * self.start_channels, self.max_channels)

    @property
    def resolved_activation(self) -> str:
        return self.activation or _FAMILY_ACTIVATIONS[self.family]

    @property
    def resolved_mlp_hidden(self) -> int:
        return self.mlp_hidden or 2 * self.hidden_channels


def augment_cumsum(x: Tensor) -> Tensor:
    """Append the running sum channel: (..., l, 1) -> (..., l, 2)."""
    if x.shape[-1] != 1:
        raise ValueError(f"cumsum augmentation needs a single channel, got {x.shape[-1]}")
    return torch.cat([x, x.cumsum(dim=-2)], dim=-1)


def augment_logvol_returns(x: Tensor) -> Tensor:
    """Append first-difference channels (zero first row): (..., l, d) -> (..., l, 2d)."""
    diffs = x[..., 1:, :] - x[..., :-1, :]
    zeros = torch.zeros_like(x[..., :1, :])
    return torch.cat([x, torch.cat([zeros, diffs], dim=-2)], dim=-1)


def apply_augmentation(x: Tensor, mode: str) -> Tensor:
    if mode == "none":
        return x
    if mode == "cumsum":
        return augment_cumsum(x)
    if mode == "returns":
        return augment_logvol_returns(x)
    raise ValueError(f"unknown augment mode {mode!r}")


def _crop_rows(x: Tensor, length: int) -> Tensor:
    if x.shape[-2] == length:
        return x
    return x[..., x.shape[-2] - length:, :]


class _CausalConvBlock(nn.Module):
    """Two pre-normalized, pre-activated causal convolutions with a cropped residual."""

    def __init__(self, channels, kernel_size, activation, norm, dtype):
        super().__init__()
        self._act = layers.resolve_activation(activation)
        self.norm1 = layers.make_norm(norm, channels, dtype)
        self.conv1 = layers.CausalConv1d(channels, channels, kernel_size,
                                         spectral_norm=True, dtype=dtype)
        self.norm2 = layers.make_norm(norm, channels, dtype)
        self.conv2 = layers.CausalConv1d(channels, channels, kernel_size,
                                         spectral_norm=True, dtype=dtype)
        self.shrinkage = 2 * (kernel_size - 1)

    def forward(self, x: Tensor) -> Tensor:
        y = self.conv1(self._act(self.norm1(x)))
        y = self.conv2(self._act(self.norm2(y)))
        return _crop_rows(x, y.shape[-2]) + y


class _TransformerBlock(nn.Module):
    """Attention + MLP with pre-normalization and residuals around each sublayer."""

    def __init__(self, attn: nn.Module, channels, mlp_hidden, activation, norm, dtype):
        super().__init__()
        self.norm1 = layers.make_norm(norm, channels, dtype)
        self.attn = attn
        self.norm2 = layers.make_norm(norm, channels, dtype)
        self.mlp = layers.MlpBlock(channels, mlp_hidden, activation,
                                   spectral_norm=True, dtype=dtype)

    def forward(self, x: Tensor) -> Tensor:
        a = self.attn(self.norm1(x))
        a = _crop_rows(x, a.shape[-2]) + a
        return a + self.mlp(self.norm2(a))


class _StridedConvBlock(nn.Module):
    """Stride-1 then stride-2 regular convolutions with pre-activation norms."""

    def __init__(self, in_channels, out_channels, kernel_size, activation, norm, dtype):
        super().__init__()
        self._act = layers.resolve_activation(activation)
        self.norm1 = layers.make_norm(norm, in_channels, dtype)
        self.conv1 = layers.RegularConv1d(in_channels, out_channels, kernel_size,
                                          stride=1, spectral_norm=True, dtype=dtype)
        self.norm2 = layers.make_norm(norm, out_channels, dtype)
        self.conv2 = layers.RegularConv1d(out_channels, out_channels, kernel_size,
                                          stride=2, spectral_norm=True, dtype=dtype)

    def forward(self, x: Tensor) -> Tensor:
        y = self.conv1(self._act(self.norm1(x)))
        return self.conv2(self._act(self.norm2(y)))


class TaganGenerator(nn.Module):
    """Causal conv stack with one causal attention layer in the middle."""

    def __init__(self, spec: GeneratorSpec, dtype: torch.dtype = torch.float32):
        super().__init__()
        spec.validate()
        self.spec = spec
        self.seed = None
        act, ch = spec.resolved_activation, spec.hidden_channels
        self._act = layers.resolve_activation(act)
        self.stem = layers.CausalConv1d(spec.noise_channels, ch, 1,
                                        spectral_norm=True, dtype=dtype)
        self.pre = nn.ModuleList(
            _CausalConvBlock(ch, spec.kernel_size, act, spec.norm, dtype)
            for _ in range(spec.blocks_before))
        self.attn = layers.CausalAttention(ch, spec.attn_size, spec.num_heads,
                                           rfs=spec.attention_rfs,
                                           spectral_norm=True, dtype=dtype)
        self.post = nn.ModuleList(
            _CausalConvBlock(ch, spec.kernel_size, act, spec.norm, dtype)
            for _ in range(spec.blocks_after))
        n_blocks = spec.blocks_before + 1 + spec.blocks_after
        self.skips = nn.ModuleList(
            layers.CausalConv1d(ch, ch, 1, spectral_norm=True, dtype=dtype)
            for _ in range(n_blocks))
        self.norm_out = layers.make_norm(spec.norm, ch, dtype)
        self.out = layers.CausalConv1d(ch, spec.data_channels, 1,
                                       spectral_norm=True, dtype=dtype)

    def forward(self, z: Tensor) -> Tensor:
        if z.shape[-2] < self.spec.rfs:
            raise ValueError(f"noise length {z.shape[-2]} shorter than receptive field {self.spec.rfs}")
        out_len = z.shape[-2] - (self.spec.rfs - 1)
        x = self.stem(z)
        block_outs = []
        for block in self.pre:
            x = block(x)
            block_outs.append(x)
        x = _crop_rows(x, x.shape[-2] - self.attn.shrinkage) + self.attn(x)
        block_outs.append(x)
        for block in self.post:
            x = block(x)
            block_outs.append(x)
        acc = sum(_crop_rows(proj(out), out_len)
                  for proj, out in zip(self.skips, block_outs))
        return self.out(self._act(self.norm_out(acc)))


class TtganGenerator(nn.Module):
    """Causal transformer: stacked causal attention + MLP blocks."""

    def __init__(self, spec: GeneratorSpec, dtype: torch.dtype = torch.float32):
        super().__init__()
        spec.validate()
        self.spec = spec
        self.seed = None
        act, ch = spec.resolved_activation, spec.hidden_channels
        self.stem = layers.CausalConv1d(spec.noise_channels, ch, 1,
                                        spectral_norm=True, dtype=dtype)
        self.blocks = nn.ModuleList(
            _TransformerBlock(
                layers.CausalAttention(ch, spec.attn_size, spec.num_heads, rfs=f_j,
                                       spectral_norm=True, dtype=dtype),
                ch, spec.resolved_mlp_hidden, act, spec.norm, dtype)
            for f_j in spec.resolved_layer_rfs)
        self.skips = nn.ModuleList(
            layers.CausalConv1d(ch, ch, 1, spectral_norm=True, dtype=dtype)
            for _ in range(spec.attn_layers))
        self.out = layers.CausalConv1d(ch, spec.data_channels, 1,
                                       spectral_norm=True, dtype=dtype)

    def forward(self, z: Tensor) -> Tensor:
        if z.shape[-2] < self.spec.rfs:
            raise ValueError(f"noise length {z.shape[-2]} shorter than receptive field {self.spec.rfs}")
        out_len = z.shape[-2] - (self.spec.rfs - 1)
        x = self.stem(z)
        block_outs = []
        for block in self.blocks:
            x = block(x)
            block_outs.append(x)
        acc = sum(_crop_rows(proj(out), out_len)
                  for proj, out in zip(self.skips, block_outs))
        return self.out(acc)


class TaganDiscriminator(nn.Module):
    """Strided conv stack with one regular attention layer and a channel readout."""

    def __init__(self, spec: DiscriminatorSpec, dtype: torch.dtype = torch.float32):
        super().__init__()
        spec.validate()
        self.spec = spec
        self.seed = None
        act = spec.resolved_activation
        self._act = layers.resolve_activation(act)
        n_blocks = spec.blocks_before + spec.blocks_after
        widths = [spec.channel_at(j) for j in range(1, n_blocks + 1)]
        ins = [spec.in_channels] + widths[:-1]
        blocks = [
            _StridedConvBlock(i, o, spec.kernel_size, act, spec.norm, dtype)
            for i, o in zip(ins, widths)
        ]
        self.pre = nn.ModuleList(blocks[: spec.blocks_before])
        self.post = nn.ModuleList(blocks[spec.blocks_before:])
        attn_ch = widths[spec.blocks_before - 1] if spec.blocks_before else spec.in_channels
        self.attn = layers.RegularAttention(attn_ch, spec.attn_size, spec.num_heads,
                                            spectral_norm=True, dtype=dtype)
        self.final_channels = widths[-1] if widths else spec.in_channels
        self.final_length = spec.length // 2 ** n_blocks
        skip_widths = widths[: spec.blocks_before] + [attn_ch] + widths[spec.blocks_before:]
        self.skips = nn.ModuleList(
            layers.RegularConv1d(w, self.final_channels, 1, stride=1,
                                 spectral_norm=True, dtype=dtype)
            for w in skip_widths)
        self.norm_head = layers.make_norm(spec.norm, self.final_channels, dtype)
        bound = 1.0 / np.sqrt(self.final_channels * self.final_length)
        self.head = nn.Parameter(
            torch.empty(self.final_channels, dtype=dtype).uniform_(-bound, bound))

    def forward(self, y: Tensor) -> Tensor:
        if y.shape[-2] != self.spec.length or y.shape[-1] != self.spec.in_channels:
            raise ValueError(
                f"expected input (..., {self.spec.length}, {self.spec.in_channels}), "
                f"got {tuple(y.shape)}")
        x = y
        block_outs = []
        for block in self.pre:
            x = block(x)
            block_outs.append(x)
        x = self.attn(x)
        block_outs.append(x)
        for block in self.post:
            x = block(x)
            block_outs.append(x)
        acc = sum(_crop_rows(proj(out), self.final_length)
                  for proj, out in zip(self.skips, block_outs))
        h = self._act(self.norm_head(acc))
        return torch.einsum("...tc,c->...", h, self.head)


class TtganDiscriminator(nn.Module):
    """Sparse-attention transformer with a trainable (length x heads) readout."""

    def __init__(self, spec: DiscriminatorSpec, dtype: torch.dtype = torch.float32):
        super().__init__()
        spec.validate()
        self.spec = spec
        self.seed = None
        act, ch = spec.resolved_activation, spec.hidden_channels
        self.stem = layers.RegularConv1d(spec.in_channels, ch, 1, stride=1,
                                         spectral_norm=True, dtype=dtype)
        self.blocks = nn.ModuleList(
            _TransformerBlock(
                layers.SparseAttention(ch, spec.attn_size, spec.num_heads,
                                       spectral_norm=True, dtype=dtype),
                ch, spec.resolved_mlp_hidden, act, spec.norm, dtype)
            for _ in range(spec.attn_layers))
        self.skips = nn.ModuleList(
            layers.RegularConv1d(ch, ch, 1, stride=1, spectral_norm=True, dtype=dtype)
            for _ in range(spec.attn_layers))
        bound = 1.0 / np.sqrt(spec.length * spec.num_heads)
        self.head = nn.Parameter(
            torch.empty(spec.length, spec.num_heads, dtype=dtype).uniform_(-bound, bound))

    def forward(self, y: Tensor) -> Tensor:
        if y.shape[-2] != self.spec.length or y.shape[-1] != self.spec.in_channels:
            raise ValueError(
                f"expected input (..., {self.spec.length}, {self.spec.in_channels}), "
                f"got {tuple(y.shape)}")
        x = self.stem(y)
        block_outs = []
        for block in self.blocks:
            x = block(x)
            block_outs.append(x)
        acc = sum(proj(out) for proj, out in zip(self.skips, block_outs))
        return torch.einsum("...th,th->...", acc[..., :self.spec.num_heads], self.head)


def build_generator(spec: GeneratorSpec, seed: int,
                    dtype: torch.dtype = torch.float32) -> nn.Module:
    """Construct a generator with deterministic, seed-derived initialization."""
    spec.validate()
    torch.manual_seed(seed)
    cls = TaganGenerator if spec.family == "tagan" else TtganGenerator
    model = cls(spec, dtype)
    layers.converge_power_iterations(model)
    model.seed = seed
    model.eval()
    return model


def build_discriminator(spec: DiscriminatorSpec, seed: int,
                        dtype: torch.dtype = torch.float32) -> nn.Module:
    """Construct a discriminator with deterministic, seed-derived initialization."""
    spec.validate()
    torch.manual_seed(seed)
    cls = TaganDiscriminator if spec.family == "tagan" else TtganDiscriminator
    model = cls(spec, dtype)
    layers.converge_power_iterations(model)
    model.seed = seed
    model.eval()
    return model


def generate(g: nn.Module, noise: Tensor) -> Tensor:
    """Run the generator in eval mode: noise (..., l'+f-1, d_n) -> (..., l', d)."""
    if noise.shape[-1] != g.spec.noise_channels:
        raise ValueError(f"expected {g.spec.noise_channels} noise channels, got {noise.shape[-1]}")
    was_training = g.training
    g.eval()
    try:
        with torch.no_grad():
            return g(noise)
    finally:
        g.train(was_training)


def discriminate(d: nn.Module, sample: Tensor) -> float | Tensor:
    """Score a sample (higher = more real); scalar for a single (l, c) input."""
    was_training = d.training
    d.eval()
    try:
        with torch.no_grad():
            out = d(sample)
    finally:
        d.train(was_training)
    return out.item() if out.dim() == 0 else out


def parameter_count(model: nn.Module) -> int:
    return sum(p.numel() for p in model.parameters())


def _spec_to_payload(spec) -> dict:
    payload = dataclasses.asdict(spec)
    payload["kind"] = "generator" if isinstance(spec, GeneratorSpec) else "discriminator"
    return payload


def _spec_from_payload(payload: dict):
    kind = payload.pop("kind")
    if payload.get("layer_rfs") is not None:
        payload["layer_rfs"] = tuple(payload["layer_rfs"])
    cls = GeneratorSpec if kind == "generator" else DiscriminatorSpec
    return cls(**payload)


def save_checkpoint(model: nn.Module, path) -> None:
    """Write spec + seed + all tensors (little-endian float32) to one file."""
    state = model.state_dict()
    header = {
        "format": CHECKPOINT_FORMAT,
        "spec": _spec_to_payload(model.spec),
        "seed": model.seed,
        "tensors": [{"name": k, "shape": list(v.shape)} for k, v in state.items()],
    }
    with open(path, "wb") as fh:
        fh.write(json.dumps(header).encode() + b"\n")
        for value in state.values():
            fh.write(np.ascontiguousarray(
                value.detach().cpu().numpy(), dtype="<f4").tobytes())


def load_checkpoint(path, dtype: torch.dtype = torch.float32) -> nn.Module:
    """Rebuild the module from its spec/seed and restore all stored tensors."""
    with open(path, "rb") as fh:
        header = json.loads(fh.readline().decode())
        if header.get("format") != CHECKPOINT_FORMAT:
            raise ValueError(f"{path}: not a {CHECKPOINT_FORMAT} file")
        spec = _spec_from_payload(dict(header["spec"]))
        if isinstance(spec, GeneratorSpec):
            model = build_generator(spec, header["seed"], dtype)
        else:
            model = build_discriminator(spec, header["seed"], dtype)
        state = model.state_dict()
        with torch.no_grad():
            for entry in header["tensors"]:
                shape = tuple(entry["shape"])
                count = int(np.prod(shape)) if shape else 1
                raw = fh.read(count * 4)
                if len(raw) != count * 4:
                    raise ValueError(f"{path}: truncated tensor payload for {entry['name']}")
                arr = np.frombuffer(raw, dtype="<f4").reshape(shape)
                state[entry["name"]].copy_(torch.as_tensor(arr.copy(), dtype=dtype))
    return model
