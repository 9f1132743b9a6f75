"""Rolling-window data, the adversarial training loop, and path sampling."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from tsgan import metrics, networks
from tsgan.containers import PathBundle
from tsgan.losses import LossConfig, discriminator_loss, generator_loss, gp_interpolate, gradient_norm
from tsgan.networks import apply_augmentation, save_checkpoint


class TrainingDiverged(RuntimeError):
    """Raised when a loss turns non-finite; carries the snapshot location."""

    def __init__(self, message, snapshot_dir=None):
        super().__init__(message)
        self.snapshot_dir = snapshot_dir


@dataclass
class TrainConfig:
    window_length: int = 128
    batch_size: int = 64
    total_iters: int = 20_000
    critic_steps: int | None = None   # default: 5 for wgan_gp, 1 for original
    lr_generator: float = 1.0e-4
    lr_discriminator: float = 1.0e-4
    betas: tuple[float, float] | None = None  # default: (0, .9) wgan_gp, (.5, .9) original
    loss: LossConfig = field(default_factory=LossConfig)
    seed: int = 0
    augment: str = "none"
    eval_every: int = 0               # score-report cadence in iterations; 0 = off
    eval_paths: int = 32
    eval_length: int = 512
    eval_delta: int = 64
    snapshot_dir: str | None = None   # diagnostic dump target on divergence

    def __post_init__(self):
        if self.window_length < 1 or self.batch_size < 1 or self.total_iters < 0:
            raise ValueError("window_length/batch_size must be positive, total_iters >= 0")
        if self.lr_generator <= 0 or self.lr_discriminator <= 0:
            raise ValueError("learning rates must be positive")
        if self.augment not in networks.AUGMENT_MODES:
            raise ValueError(f"unknown augment mode {self.augment!r}")

    @property
    def resolved_critic_steps(self) -> int:
        if self.critic_steps is not None:
            return self.critic_steps
        return 5 if self.loss.kind == "wgan_gp" else 1

    @property
    def resolved_betas(self) -> tuple[float, float]:
        if self.betas is not None:
            return tuple(self.betas)
        return (0.0, 0.9) if self.loss.kind == "wgan_gp" else (0.5, 0.9)


class WindowDataset:
    """All contiguous length-l slices of a series, sampled uniformly."""

    def __init__(self, series, window_length: int):
        series = np.asarray(series, dtype=np.float64)
        if series.ndim == 1:
            series = series[:, None]
        if series.ndim != 2:
            raise ValueError("series must be 1-D or (T, d)")
        if series.shape[0] < window_length:
            raise ValueError(
                f"series of length {series.shape[0]} shorter than window {window_length}")
        self.series = series
        self.window_length = window_length

    def __len__(self) -> int:
        return self.series.shape[0] - self.window_length + 1

    @property
    def channels(self) -> int:
        return self.series.shape[1]

    def window(self, i: int) -> np.ndarray:
        if not 0 <= i < len(self):
            raise IndexError(f"window index {i} out of range 0..{len(self) - 1}")
        return self.series[i: i + self.window_length]

    def sample(self, batch_size: int, rng: np.random.Generator) -> np.ndarray:
        idx = rng.integers(0, len(self), size=batch_size)
        return np.stack([self.window(int(i)) for i in idx])


def make_windows(series, window_length: int) -> WindowDataset:
    return WindowDataset(series, window_length)


def _check_compat(g, d, data: WindowDataset, cfg: TrainConfig) -> None:
    if g.spec.data_channels != d.spec.data_channels:
        raise ValueError("generator and discriminator data channels differ")
    if d.spec.augment != cfg.augment:
        raise ValueError(
            f"config augment {cfg.augment!r} does not match discriminator spec "
            f"{d.spec.augment!r}")
    if data.channels != g.spec.data_channels:
        raise ValueError(
            f"dataset has {data.channels} channels, generator emits {g.spec.data_channels}")
    if d.spec.length != cfg.window_length:
        raise ValueError("discriminator length must equal the training window length")


def train(g, d, data: WindowDataset, cfg: TrainConfig) -> list[dict]:
    """Alternating critic/generator updates; returns the per-iteration history.

    Deterministic for a fixed seed when torch runs single-threaded.  A
    non-finite loss aborts with a checkpoint dump (if snapshot_dir is set).
    """
    _check_compat(g, d, data, cfg)
    dtype = next(g.parameters()).dtype
    noise_gen = torch.Generator().manual_seed(cfg.seed)
    window_rng = np.random.default_rng(cfg.seed)
    betas = cfg.resolved_betas
    opt_g = torch.optim.Adam(g.parameters(), lr=cfg.lr_generator, betas=betas)
    opt_d = torch.optim.Adam(d.parameters(), lr=cfg.lr_discriminator, betas=betas)
    l, f = cfg.window_length, g.spec.rfs
    d_n = g.spec.noise_channels
    wgan = cfg.loss.kind == "wgan_gp"
    history: list[dict] = []

    def draw_noise(batch):
        return torch.randn(batch, l + f - 1, d_n, dtype=dtype, generator=noise_gen)

    def abort(reason, iteration):
        if cfg.snapshot_dir is not None:
            snap = Path(cfg.snapshot_dir)
            snap.mkdir(parents=True, exist_ok=True)
            save_checkpoint(g, snap / "generator-diverged.ckpt")
            save_checkpoint(d, snap / "discriminator-diverged.ckpt")
            save_history(history, snap / "history-diverged.jsonl")
        raise TrainingDiverged(
            f"non-finite {reason} at iteration {iteration}", cfg.snapshot_dir)

    g.train()
    d.train()
    for it in range(cfg.total_iters):
        loss_d_val = 0.0
        gp_sum = 0.0
        for _ in range(cfg.resolved_critic_steps):
            real = torch.as_tensor(data.sample(cfg.batch_size, window_rng), dtype=dtype)
            with torch.no_grad():
                fake = g(draw_noise(cfg.batch_size))
            d_real = d(apply_augmentation(real, cfg.augment))
            d_fake = d(apply_augmentation(fake, cfg.augment))
            if wgan:
                u = torch.rand(cfg.batch_size, dtype=dtype, generator=noise_gen)
                x_mid = gp_interpolate(real, fake, u)
                norms = gradient_norm(
                    lambda v: d(apply_augmentation(v, cfg.augment)), x_mid,
                    create_graph=True)
                loss_d = discriminator_loss(d_real, d_fake, norms, cfg.loss)
                gp_sum += (cfg.loss.gp_weight * (norms - 1.0) ** 2).mean().item()
            else:
                loss_d = discriminator_loss(d_real, d_fake, None, cfg.loss)
            loss_d_val = loss_d.item()
            if not math.isfinite(loss_d_val):
                abort("discriminator loss", it)
            opt_d.zero_grad()
            loss_d.backward()
            opt_d.step()

        fake = g(draw_noise(cfg.batch_size))
        loss_g = generator_loss(d(apply_augmentation(fake, cfg.augment)), cfg.loss)
        loss_g_val = loss_g.item()
        if not math.isfinite(loss_g_val):
            abort("generator loss", it)
        opt_g.zero_grad()
        loss_g.backward()
        opt_g.step()

        record = {
            "iter": it,
            "loss_G": loss_g_val,
            "loss_D": loss_d_val,
            "grad_penalty_mean": gp_sum / max(cfg.resolved_critic_steps, 1),
        }
        if cfg.eval_every and (it + 1) % cfg.eval_every == 0:
            record["scores"] = _cadence_scores(g, data, cfg, it)
            g.train()
        history.append(record)

    g.eval()
    d.eval()
    return history


def _cadence_scores(g, data: WindowDataset, cfg: TrainConfig, iteration: int) -> dict:
    bundle = sample_paths(g, cfg.eval_paths, cfg.eval_length,
                          seed=cfg.seed + 7_919 * (iteration + 1))
    if data.channels == 1:
        report = metrics.index_scores(data.series[:, 0], bundle,
                                      delta=cfg.eval_delta, horizons=(1, 5, 20))
    else:
        grid_free = metrics.ScoreReport(
            scores={
                "W_1^(1)": float(np.mean([
                    metrics.wasserstein1(data.series[:, j], bundle.paths[:, :, j])
                    for j in range(data.channels)])),
                "cross-corr": metrics.cross_correlation_gap(data.series, bundle),
            },
            delta=cfg.eval_delta, meta={"mode": "surface-partial"})
        report = grid_free
    return report.scores


def sample_paths(g, n_paths: int, length: int, seed: int,
                 piece_length: int | None = None, chunk_size: int = 16,
                 model_id: str | None = None) -> PathBundle:
    """Generate a bundle by splicing fixed-length pieces from one noise stream.

    Consecutive pieces share their noise overlap, so the spliced series equals
    the one-shot generation of the full length; chunking over paths only
    bounds memory.
    """
    if n_paths < 1 or length < 1:
        raise ValueError("n_paths and length must be positive")
    piece = piece_length or min(g.spec.length, length)
    f = g.spec.rfs
    n_pieces = -(-length // piece)
    dtype = next(g.parameters()).dtype
    gen = torch.Generator().manual_seed(seed)
    noise = torch.randn(n_paths, n_pieces * piece + f - 1, g.spec.noise_channels,
                        dtype=dtype, generator=gen)
    out = np.empty((n_paths, n_pieces * piece, g.spec.data_channels), dtype=np.float64)
    for start in range(0, n_paths, chunk_size):
        stop = min(start + chunk_size, n_paths)
        for i in range(n_pieces):
            z = noise[start:stop, i * piece: (i + 1) * piece + f - 1]
            out[start:stop, i * piece: (i + 1) * piece] = networks.generate(g, z).numpy()
    return PathBundle(paths=out[:, :length], seed=seed,
                      model_id=model_id or g.spec.family)


def save_history(history: list[dict], path) -> None:
    """One JSON record per line."""
    with open(path, "w") as fh:
        for record in history:
            fh.write(json.dumps(record) + "\n")


def load_history(path) -> list[dict]:
    with open(path) as fh:
        return [json.loads(line) for line in fh if line.strip()]
