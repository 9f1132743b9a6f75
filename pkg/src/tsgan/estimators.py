"""scikit-learn style wrappers so the simulators compose with pipelines.

``GanSimulator`` is a fit/sample generative estimator over return or surface
series; ``SurfacePca`` is a fit/transform/inverse_transform dimensionality
reducer (uncentered SVD, matching the simulation pipeline); ``ArbitrageRepair``
is a stateless transformer that maps log-vol rows to their closest
arbitrage-free counterparts.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from tsgan import networks, surfaces, training
from tsgan.containers import SurfaceGrid
from tsgan.losses import LossConfig
from tsgan.networks import DiscriminatorSpec, GeneratorSpec
from tsgan.training import TrainConfig


class GanSimulator(BaseEstimator):
    """Adversarially trained time-series simulator.

    ``fit`` expects a (T,) or (T, d) array of training series (returns,
    log-vols, or principal components); ``sample`` draws new paths of any
    length from the trained generator.
    """

    def __init__(self, family="ttgan", loss="wgan_gp", window_length=64, rfs=63,
                 hidden_channels=32, noise_channels=3, attn_layers=3, num_heads=4,
                 attn_size=16, mlp_hidden=None, kernel_size=3, blocks_before=2,
                 blocks_after=2, start_channels=16, max_channels=64, norm="batch",
                 augment="none", batch_size=32, total_iters=2000, critic_steps=None,
                 learning_rate=1e-4, gp_weight=10.0, eval_every=0, seed=0):
        self.family = family
        self.loss = loss
        self.window_length = window_length
        self.rfs = rfs
        self.hidden_channels = hidden_channels
        self.noise_channels = noise_channels
        self.attn_layers = attn_layers
        self.num_heads = num_heads
        self.attn_size = attn_size
        self.mlp_hidden = mlp_hidden
        self.kernel_size = kernel_size
        self.blocks_before = blocks_before
        self.blocks_after = blocks_after
        self.start_channels = start_channels
        self.max_channels = max_channels
        self.norm = norm
        self.augment = augment
        self.batch_size = batch_size
        self.total_iters = total_iters
        self.critic_steps = critic_steps
        self.learning_rate = learning_rate
        self.gp_weight = gp_weight
        self.eval_every = eval_every
        self.seed = seed

    def _specs(self, channels: int) -> tuple[GeneratorSpec, DiscriminatorSpec]:
        gspec = GeneratorSpec(
            family=self.family, length=self.window_length, rfs=self.rfs,
            noise_channels=self.noise_channels, data_channels=channels,
            hidden_channels=self.hidden_channels, kernel_size=self.kernel_size,
            blocks_before=self.blocks_before, blocks_after=self.blocks_after,
            attn_layers=self.attn_layers, mlp_hidden=self.mlp_hidden,
            num_heads=self.num_heads, attn_size=self.attn_size, norm=self.norm)
        dspec = DiscriminatorSpec(
            family=self.family, length=self.window_length, data_channels=channels,
            augment=self.augment, start_channels=self.start_channels,
            max_channels=self.max_channels, kernel_size=self.kernel_size,
            blocks_before=self.blocks_before, blocks_after=self.blocks_after,
            hidden_channels=self.hidden_channels, attn_layers=self.attn_layers,
            mlp_hidden=self.mlp_hidden,
            num_heads=self.num_heads if self.family == "tagan" else max(self.num_heads, 4),
            attn_size=self.attn_size, norm=self.norm)
        return gspec, dspec

    def fit(self, X, y=None):
        X = check_array(np.asarray(X, dtype=float).reshape(len(X), -1),
                        ensure_2d=True, ensure_all_finite=True)
        gspec, dspec = self._specs(X.shape[1])
        generator = networks.build_generator(gspec, self.seed)
        discriminator = networks.build_discriminator(dspec, self.seed + 1)
        cfg = TrainConfig(
            window_length=self.window_length, batch_size=self.batch_size,
            total_iters=self.total_iters, critic_steps=self.critic_steps,
            lr_generator=self.learning_rate, lr_discriminator=self.learning_rate,
            loss=LossConfig(kind=self.loss, gp_weight=self.gp_weight),
            seed=self.seed, augment=self.augment, eval_every=self.eval_every)
        data = training.make_windows(X, self.window_length)
        self.history_ = training.train(generator, discriminator, data, cfg)
        self.generator_ = generator
        self.discriminator_ = discriminator
        self.n_features_in_ = X.shape[1]
        return self

    def sample(self, n_paths: int, length: int, seed: int | None = None) -> np.ndarray:
        """Draw (n_paths, length, d) simulated paths from the trained generator."""
        check_is_fitted(self, "generator_")
        bundle = training.sample_paths(self.generator_, n_paths, length,
                                       seed=self.seed if seed is None else seed)
        return bundle.paths

    def sample_bundle(self, n_paths: int, length: int, seed: int | None = None):
        check_is_fitted(self, "generator_")
        return training.sample_paths(self.generator_, n_paths, length,
                                     seed=self.seed if seed is None else seed)


class SurfacePca(TransformerMixin, BaseEstimator):
    """Uncentered truncated SVD of the raw data matrix.

    ``fit_transform`` returns the left singular vectors (the low-dimensional
    series a simulator trains on); ``inverse_transform`` maps component rows
    back through the scaled basis.
    """

    def __init__(self, n_components=10):
        self.n_components = n_components

    def fit(self, X, y=None):
        X = check_array(X, ensure_2d=True)
        self.model_, self.components_series_ = surfaces.pca_fit(X, self.n_components)
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X) -> np.ndarray:
        check_is_fitted(self, "model_")
        X = check_array(X, ensure_2d=True)
        inv_s = np.where(self.model_.singular_values > 0,
                         1.0 / np.where(self.model_.singular_values > 0,
                                        self.model_.singular_values, 1.0), 0.0)
        return X @ self.model_.basis * inv_s

    def fit_transform(self, X, y=None, **fit_params):
        self.fit(X)
        return self.components_series_

    def inverse_transform(self, X) -> np.ndarray:
        check_is_fitted(self, "model_")
        return surfaces.pca_invert(self.model_, np.asarray(X, dtype=float))


class ArbitrageRepair(TransformerMixin, BaseEstimator):
    """Map flattened log-vol rows to the closest arbitrage-free surfaces."""

    def __init__(self, strikes=(0.85, 0.90, 0.95, 1.00, 1.05, 1.10, 1.15),
                 maturities=(1 / 12, 2 / 12, 3 / 12, 6 / 12)):
        self.strikes = strikes
        self.maturities = maturities

    def _grid(self, channels: int) -> SurfaceGrid:
        return SurfaceGrid(strikes=np.asarray(self.strikes, dtype=float),
                           maturities=np.asarray(self.maturities, dtype=float),
                           data=np.zeros((1, channels)))

    def fit(self, X, y=None):
        X = check_array(X, ensure_2d=True)
        self._grid(X.shape[1])  # validates channel count against the grid
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X) -> np.ndarray:
        X = check_array(X, ensure_2d=True)
        grid = self._grid(X.shape[1])
        repaired, self.violated_ = surfaces.repair_pipeline(X[None], grid)
        return repaired[0]
