"""Attention-based GANs for financial time-series and volatility-surface simulation."""

from tsgan.containers import PathBundle, ScoreReport, SurfaceGrid
from tsgan.estimators import ArbitrageRepair, GanSimulator, SurfacePca
from tsgan.losses import LossConfig
from tsgan.networks import (DiscriminatorSpec, GeneratorSpec, build_discriminator,
                            build_generator, generate, discriminate,
                            load_checkpoint, save_checkpoint)
from tsgan.training import TrainConfig, WindowDataset, make_windows, sample_paths, train

__version__ = "0.1.0"

__all__ = [
    "ArbitrageRepair", "DiscriminatorSpec", "GanSimulator", "GeneratorSpec",
    "LossConfig", "PathBundle", "ScoreReport", "SurfaceGrid", "TrainConfig",
    "WindowDataset", "build_discriminator", "build_generator", "discriminate",
    "generate", "load_checkpoint", "make_windows", "sample_paths",
    "save_checkpoint", "train", "__version__",
]
