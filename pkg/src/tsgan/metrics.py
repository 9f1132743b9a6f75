"""Stylized-fact scores for generated paths.

Conventions, used consistently everywhere:

* moments are population moments (biased); kurtosis is non-excess (normal = 3);
* autocorrelations are sample Pearson correlations of the designated pair over
  the lag-tau overlapping windows, with means/variances computed per lag;
* per-path curves are averaged across the bundle first, then compared with the
  real curve, and the per-lag gaps are combined with a Euclidean norm.
"""

from __future__ import annotations

import numpy as np

from tsgan.containers import PathBundle, ScoreReport, SurfaceGrid

INDEX_HORIZONS = (1, 5, 20, 100, 200)
INDEX_DELTA = 250
SURFACE_DELTA = 64

CORRELATION_KINDS = ("acf", "acf_abs", "acf_sq", "lev", "acf_r")


def wasserstein1(samples_a, samples_b) -> float:
    """Exact L1 distance between the two empirical CDFs.

    Both CDFs are piecewise constant, so the integral is a finite sum over the
    merged sorted support.
    """
    a = np.sort(np.asarray(samples_a, dtype=float).ravel())
    b = np.sort(np.asarray(samples_b, dtype=float).ravel())
    if a.size == 0 or b.size == 0:
        raise ValueError("empty sample set")
    support = np.concatenate([a, b])
    support.sort(kind="mergesort")
    # CDF values of each distribution just after every support point
    fa = np.searchsorted(a, support, side="right") / a.size
    fb = np.searchsorted(b, support, side="right") / b.size
    gaps = np.diff(support)
    return float(np.abs(fa[:-1] - fb[:-1]) @ gaps)


def multiday_returns(series, tau: int) -> np.ndarray:
    """All overlapping tau-step sums of a 1-D series."""
    x = np.asarray(series, dtype=float).ravel()
    if tau < 1:
        raise ValueError("tau must be >= 1")
    if x.size < tau:
        raise ValueError(f"series of length {x.size} shorter than tau={tau}")
    if tau == 1:
        return x.copy()
    windows = np.lib.stride_tricks.sliding_window_view(x, tau)
    return windows.sum(axis=1)


def skewness(x) -> float:
    x = np.asarray(x, dtype=float).ravel()
    centered = x - x.mean()
    m2 = np.mean(centered ** 2)
    if m2 == 0:
        raise ValueError("zero variance")
    return float(np.mean(centered ** 3) / m2 ** 1.5)


def kurtosis(x) -> float:
    """Non-excess kurtosis: 3 for a normal distribution."""
    x = np.asarray(x, dtype=float).ravel()
    centered = x - x.mean()
    m2 = np.mean(centered ** 2)
    if m2 == 0:
        raise ValueError("zero variance")
    return float(np.mean(centered ** 4) / m2 ** 2)


def moment_gap(real_series, bundle: PathBundle, which: str, channel: int = 0) -> float:
    """|moment(real) - mean over paths of moment(path)|.

    Computed as |mean of (real - path) gaps|, which is the same number but
    exactly zero when every path equals the real series.
    """
    fn = {"skew": skewness, "kurt": kurtosis}[which]
    real_val = fn(real_series)
    gaps = [real_val - fn(p) for p in bundle.paths[:, :, channel]]
    return float(abs(np.mean(gaps)))


def _pair_series(x: np.ndarray, kind: str) -> tuple[np.ndarray, np.ndarray]:
    """Left/right transforms whose lagged correlation defines each score."""
    if kind == "acf":
        return x, x
    if kind == "acf_abs":
        return np.abs(x), np.abs(x)
    if kind == "acf_sq":
        return x ** 2, x ** 2
    if kind == "lev":
        return x, x ** 2
    raise ValueError(f"unknown correlation kind {kind!r}")


def correlation_curves(mat, kind: str, delta: int) -> np.ndarray:
    """Per-row lag-1..delta sample correlations of the designated pair.

    ``mat`` is (n_series, length); ``acf_r`` is the plain autocorrelation of
    the first differences.  Returns (n_series, delta).
    """
    mat = np.atleast_2d(np.asarray(mat, dtype=float))
    if kind == "acf_r":
        return correlation_curves(np.diff(mat, axis=1), "acf", delta)
    if mat.shape[1] <= delta:
        raise ValueError(f"series of length {mat.shape[1]} too short for delta={delta}")
    left_all, right_all = _pair_series(mat, kind)
    out = np.empty((mat.shape[0], delta))
    for i, tau in enumerate(range(1, delta + 1)):
        left, right = left_all[:, :-tau], right_all[:, tau:]
        ls = left - left.mean(axis=1, keepdims=True)
        rs = right - right.mean(axis=1, keepdims=True)
        denom = np.sqrt((ls ** 2).sum(axis=1) * (rs ** 2).sum(axis=1))
        if np.any(denom == 0):
            raise ValueError(f"degenerate (constant) series at lag {tau}")
        out[:, i] = (ls * rs).sum(axis=1) / denom
    return out


def correlation_curve(series, kind: str, delta: int) -> np.ndarray:
    return correlation_curves(np.asarray(series, dtype=float).ravel()[None, :], kind, delta)[0]


def correlation_score(real_series, bundle: PathBundle, kind: str, delta: int,
                      channel: int = 0) -> float:
    """Euclidean norm of (real curve - bundle-mean curve) over lags 1..delta.

    The per-lag gap is averaged as mean of (real - path) differences, which is
    the same number but exactly zero when every path equals the real series.
    """
    real_curve = correlation_curve(real_series, kind, delta)
    curves = correlation_curves(bundle.paths[:, :, channel], kind, delta)
    gap = (real_curve[None, :] - curves).mean(axis=0)
    return float(np.sqrt((gap ** 2).sum()))


def bundle_mean_curve(bundle: PathBundle, kind: str, delta: int, channel: int = 0) -> np.ndarray:
    """Bundle-averaged correlation curve (for plots and reports)."""
    return correlation_curves(bundle.paths[:, :, channel], kind, delta).mean(axis=0)


def _pooled_multiday(bundle: PathBundle, tau: int, channel: int) -> np.ndarray:
    pooled = [multiday_returns(p, tau) for p in bundle.paths[:, :, channel]]
    return np.concatenate(pooled)


def index_scores(real_returns, bundle: PathBundle, delta: int = INDEX_DELTA,
                 horizons=INDEX_HORIZONS) -> ScoreReport:
    """The single-channel return scores, keyed by their conventional names."""
    real = np.asarray(real_returns, dtype=float).ravel()
    scores: dict[str, float] = {}
    for tau in horizons:
        scores[f"W_1^({tau})"] = wasserstein1(
            multiday_returns(real, tau), _pooled_multiday(bundle, tau, 0))
    scores["skewness"] = moment_gap(real, bundle, "skew")
    scores["kurtosis"] = moment_gap(real, bundle, "kurt")
    scores["ACF"] = correlation_score(real, bundle, "acf", delta)
    scores["ACF^(abs)"] = correlation_score(real, bundle, "acf_abs", delta)
    scores["ACF^(sq)"] = correlation_score(real, bundle, "acf_sq", delta)
    scores["Lev"] = correlation_score(real, bundle, "lev", delta)
    return ScoreReport(scores=scores, delta=delta,
                       meta={"mode": "index", "n_paths": bundle.n_paths,
                             "path_length": bundle.length, "model_id": bundle.model_id})


def cross_correlation_gap(real_matrix, bundle: PathBundle) -> float:
    """Frobenius norm of the gap between correlation matrices.

    The bundle side pools every (path, time) row into one sample.
    """
    real = np.asarray(real_matrix, dtype=float)
    pooled = bundle.paths.reshape(-1, bundle.channels)
    sig_x = np.corrcoef(real, rowvar=False)
    sig_y = np.corrcoef(pooled, rowvar=False)
    return float(np.linalg.norm(sig_x - sig_y))


def arbitrage_rate(bundle: PathBundle, grid: SurfaceGrid) -> float:
    """Fraction of (path, time) surfaces violating the no-arbitrage constraints."""
    from tsgan import surfaces

    if bundle.channels != grid.channels:
        raise ValueError(f"bundle has {bundle.channels} channels, grid wants {grid.channels}")
    violated = surfaces.violation_mask_logvol(bundle.paths, grid)
    return float(violated.mean())


def surface_scores(real: SurfaceGrid, bundle: PathBundle, delta: int = SURFACE_DELTA,
                   with_arbitrage: bool = True) -> ScoreReport:
    """Channel-averaged distribution/correlation scores plus the surface extras."""
    d = real.channels
    if bundle.channels != d:
        raise ValueError(f"bundle has {bundle.channels} channels, grid wants {d}")
    w1 = skew = kurt = acf = acf_r = 0.0
    for j in range(d):
        col = real.data[:, j]
        w1 += wasserstein1(col, bundle.paths[:, :, j])
        skew += moment_gap(col, bundle, "skew", channel=j)
        kurt += moment_gap(col, bundle, "kurt", channel=j)
        acf += correlation_score(col, bundle, "acf", delta, channel=j)
        acf_r += correlation_score(col, bundle, "acf_r", delta, channel=j)
    scores = {
        "W_1^(1)": w1 / d,
        "skewness": skew / d,
        "kurtosis": kurt / d,
        "ACF": acf / d,
        "ACF^(r)": acf_r / d,
        "cross-corr": cross_correlation_gap(real.data, bundle),
    }
    if with_arbitrage:
        scores["arbitrage rate"] = arbitrage_rate(bundle, real)
    return ScoreReport(scores=scores, delta=delta,
                       meta={"mode": "surface", "n_paths": bundle.n_paths,
                             "path_length": bundle.length, "model_id": bundle.model_id})
