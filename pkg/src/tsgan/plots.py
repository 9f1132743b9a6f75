"""Static evaluation plots: density overlays, autocorrelation overlays,
cross-correlation difference heatmaps, loss curves."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from tsgan import metrics
from tsgan.containers import PathBundle


def density_overlay(real_series, bundle: PathBundle, path, channel: int = 0) -> None:
    real = np.asarray(real_series, dtype=float).ravel()
    generated = bundle.paths[:, :, channel].ravel()
    lo = min(real.min(), np.quantile(generated, 0.0005))
    hi = max(real.max(), np.quantile(generated, 0.9995))
    bins = np.linspace(lo, hi, 120)
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.hist(generated, bins=bins, density=True, alpha=0.55, label="generated")
    ax.hist(real, bins=bins, density=True, histtype="step", lw=1.5,
            color="black", label="historical")
    ax.set_yscale("log")
    ax.set_xlabel("value")
    ax.set_ylabel("density")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def acf_overlay(real_series, bundle: PathBundle, path, delta: int = 100,
                kinds=("acf", "acf_abs"), channel: int = 0) -> None:
    fig, axes = plt.subplots(1, len(kinds), figsize=(5.5 * len(kinds), 4), squeeze=False)
    lags = np.arange(1, delta + 1)
    for ax, kind in zip(axes[0], kinds):
        real_curve = metrics.correlation_curve(
            np.asarray(real_series, dtype=float).ravel(), kind, delta)
        mean_curve = metrics.bundle_mean_curve(bundle, kind, delta, channel)
        ax.plot(lags, real_curve, color="black", lw=1.2, label="historical")
        ax.plot(lags, mean_curve, lw=1.2, label="generated mean")
        ax.axhline(0.0, color="grey", lw=0.5)
        ax.set_xlabel("lag")
        ax.set_title(kind)
        ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def crosscorr_heatmap(real_matrix, bundle: PathBundle, path) -> None:
    real = np.asarray(real_matrix, dtype=float)
    pooled = bundle.paths.reshape(-1, bundle.channels)
    diff = np.abs(np.corrcoef(real, rowvar=False) - np.corrcoef(pooled, rowvar=False))
    fig, ax = plt.subplots(figsize=(6, 5))
    im = ax.imshow(diff, cmap="viridis")
    fig.colorbar(im, ax=ax, label="|corr gap|")
    ax.set_xlabel("channel")
    ax.set_ylabel("channel")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def loss_curves(history: list[dict], path) -> None:
    iters = [r["iter"] for r in history]
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.plot(iters, [r["loss_G"] for r in history], label="generator", lw=0.8)
    ax.plot(iters, [r["loss_D"] for r in history], label="discriminator", lw=0.8)
    ax.set_xlabel("iteration")
    ax.set_ylabel("loss")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
