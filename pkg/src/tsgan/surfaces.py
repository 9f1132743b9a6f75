"""Option-surface machinery: PCA, vol/price conversion, no-arbitrage repair.

Pricing convention: unit spot, zero rates.  A call at relative strike K and
maturity M (years) with volatility sigma costs

    C = Phi(d1) - K * Phi(d2),   d1 = (-ln K + sigma^2 M / 2) / (sigma sqrt(M)),
    d2 = d1 - sigma sqrt(M).

With this normalization the boundary strikes used by the static no-arbitrage
constraints are K_low = 0, where the price is exactly 1, and a far upper
strike K_high = K_max + 10 with price pinned to 0.  K_high must sit far enough
out that real surfaces carry no value there; ten spot units covers
volatilities up to ~200% at multi-year maturities, where a tighter boundary
(say K_max + dK) would flag genuinely clean surfaces.

Surfaces travel as log-volatility rows flattened strike-major (see
``SurfaceGrid``); call grids are (n_strikes, n_maturities) arrays.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq
from scipy.stats import norm

from tsgan import simplex
from tsgan.containers import PathBundle, SurfaceGrid

ARB_TOL = 1.0e-8


# ---------------------------------------------------------------------------
# PCA
# ---------------------------------------------------------------------------

@dataclass
class PcaModel:
    """Truncated right singular system of the fitted data matrix."""

    basis: np.ndarray            # (d, k) orthonormal columns
    singular_values: np.ndarray  # (k,) nonincreasing, >= 0

    @property
    def n_components(self) -> int:
        return self.basis.shape[1]


def pca_fit(data, n_components: int) -> tuple[PcaModel, np.ndarray]:
    """SVD-based components of the raw (uncentered) data matrix.

    Returns (model, components) where components are the first ``n_components``
    left singular vectors, i.e. the series the generators get trained on.
    """
    data = np.asarray(data, dtype=float)
    if data.ndim != 2:
        raise ValueError("data must be a (T, d) matrix")
    t, d = data.shape
    if not 1 <= n_components <= min(t, d):
        raise ValueError(f"n_components must be in 1..{min(t, d)}")
    u, s, vt = np.linalg.svd(data, full_matrices=False)
    k = n_components
    return PcaModel(basis=vt[:k].T.copy(), singular_values=s[:k].copy()), u[:, :k].copy()


def pca_invert(model: PcaModel, components) -> np.ndarray:
    """Map component rows back to data rows: y_t = V D comp_t."""
    comps = np.asarray(components, dtype=float)
    if comps.ndim != 2 or comps.shape[1] != model.n_components:
        raise ValueError(f"components must be (T, {model.n_components})")
    return comps @ np.diag(model.singular_values) @ model.basis.T


# ---------------------------------------------------------------------------
# vol <-> price
# ---------------------------------------------------------------------------

def black_call(strike, sigma, maturity):
    """Unit-spot zero-rate call price; broadcasts over array inputs."""
    strike = np.asarray(strike, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    maturity = np.asarray(maturity, dtype=float)
    if np.any(maturity <= 0):
        raise ValueError("maturities must be positive")
    if np.any(strike <= 0):
        raise ValueError("strikes must be positive under this pricing convention")
    vol = sigma * np.sqrt(maturity)
    d1 = (-np.log(strike) + vol ** 2 / 2.0) / vol
    d2 = d1 - vol
    return norm.cdf(d1) - strike * norm.cdf(d2)


def vols_to_calls(logvols, grid: SurfaceGrid) -> np.ndarray:
    """(..., d) log-vol rows -> (..., n_strikes, n_maturities) call prices."""
    logvols = np.asarray(logvols, dtype=float)
    if logvols.shape[-1] != grid.channels:
        raise ValueError(f"expected {grid.channels} channels, got {logvols.shape[-1]}")
    if not np.all(np.isfinite(logvols)):
        raise ValueError("non-finite log-volatilities")
    surf = grid.to_surface_array(logvols)
    return black_call(grid.strikes[:, None], np.exp(surf), grid.maturities[None, :])


def calls_to_vols(calls, grid: SurfaceGrid, price_tol: float = 1.0e-12) -> np.ndarray:
    """Invert ``vols_to_calls`` pointwise by bracketed root finding.

    Prices must lie strictly inside the static bounds
    ``max(1 - K, 0) < C < 1``; anything at or beyond a bound raises with the
    offending grid point named.
    """
    calls = np.asarray(calls, dtype=float)
    if calls.shape[-2:] != (grid.n_strikes, grid.n_maturities):
        raise ValueError(
            f"expected (..., {grid.n_strikes}, {grid.n_maturities}) call grid")
    flat = calls.reshape(-1, grid.n_strikes, grid.n_maturities)
    out = np.empty_like(flat)
    lo, hi = -12.0, 3.0  # log-vol bracket: sigma from ~6e-6 to ~20
    for idx in range(flat.shape[0]):
        for i, k in enumerate(grid.strikes):
            intrinsic = max(1.0 - k, 0.0)
            for j, m in enumerate(grid.maturities):
                target = flat[idx, i, j]
                if not intrinsic < target < 1.0:
                    raise ValueError(
                        f"price {target:.6g} at strike {k:g}, maturity {m:g} "
                        f"(surface {idx}) is outside the invertible range "
                        f"({intrinsic:.6g}, 1)")
                f = lambda lv: black_call(k, np.exp(lv), m) - target
                out[idx, i, j] = brentq(f, lo, hi, xtol=1e-14, rtol=8.9e-16)
    result = grid.to_flat_rows(out.reshape(calls.shape))
    achieved = vols_to_calls(result, grid)
    if np.abs(achieved - calls).max() > price_tol * 10:
        raise ValueError("price inversion failed to reach tolerance")
    return result


# ---------------------------------------------------------------------------
# no-arbitrage constraints
# ---------------------------------------------------------------------------

K_HIGH_SPAN = 10.0  # distance of the pinned-to-zero upper boundary strike


def _extended_strikes(strikes: np.ndarray) -> np.ndarray:
    """Boundary strikes K_low = 0 and K_high = K_max + 10 around the grid."""
    return np.concatenate([[0.0], strikes, [strikes[-1] + K_HIGH_SPAN]])


def _padded_calls(calls: np.ndarray) -> np.ndarray:
    """Attach the fixed boundary prices (1 at K_low, 0 at K_high) as rows."""
    shape = calls.shape[:-2] + (1, calls.shape[-1])
    ones = np.ones(shape)
    zeros = np.zeros(shape)
    return np.concatenate([ones, calls, zeros], axis=-2)


@dataclass(frozen=True)
class Violation:
    kind: str       # "lower_itm" | "lower_otm" | "calendar" | "convexity"
    strike_idx: int  # 0-based; convexity indexes the center strike
    maturity_idx: int
    amount: float   # positive slack deficit


def check_no_arbitrage(calls, strikes, tol: float = ARB_TOL) -> list[Violation]:
    """Evaluate all four static constraint families on one call grid.

    Returns the violated constraints (empty when arbitrage-free at ``tol``).
    """
    calls = np.asarray(calls, dtype=float)
    strikes = np.asarray(strikes, dtype=float)
    n_k, n_m = calls.shape
    out: list[Violation] = []
    for j in range(n_m):
        gap = calls[0, j] - (1.0 - strikes[0])
        if gap < -tol:
            out.append(Violation("lower_itm", 0, j, -gap))
        if calls[-1, j] < -tol:
            out.append(Violation("lower_otm", n_k - 1, j, -calls[-1, j]))
    for j in range(1, n_m):
        for i in range(n_k):
            gap = calls[i, j] - calls[i, j - 1]
            if gap < -tol:
                out.append(Violation("calendar", i, j, -gap))
    k_ext = _extended_strikes(strikes)
    padded = _padded_calls(calls)
    slopes = np.diff(padded, axis=0) / np.diff(k_ext)[:, None]
    curvature = np.diff(slopes, axis=0)
    for i in range(n_k):
        for j in range(n_m):
            if curvature[i, j] < -tol:
                out.append(Violation("convexity", i, j, -curvature[i, j]))
    return out


def violation_mask(calls, strikes, tol: float = ARB_TOL) -> np.ndarray:
    """Vectorized any-constraint-violated flag over (..., n_k, n_m) call grids."""
    calls = np.asarray(calls, dtype=float)
    strikes = np.asarray(strikes, dtype=float)
    lower_itm = (calls[..., 0, :] - (1.0 - strikes[0]) < -tol).any(axis=-1)
    lower_otm = (calls[..., -1, :] < -tol).any(axis=-1)
    calendar = (np.diff(calls, axis=-1) < -tol).any(axis=(-1, -2))
    k_ext = _extended_strikes(strikes)
    slopes = np.diff(_padded_calls(calls), axis=-2) / np.diff(k_ext)[:, None]
    convex = (np.diff(slopes, axis=-2) < -tol).any(axis=(-1, -2))
    return lower_itm | lower_otm | calendar | convex


def violation_mask_logvol(logvol_rows, grid: SurfaceGrid, tol: float = ARB_TOL) -> np.ndarray:
    """Violation flags for (..., d) flattened log-vol rows, computed in chunks."""
    rows = np.asarray(logvol_rows, dtype=float)
    lead = rows.shape[:-1]
    flat = rows.reshape(-1, grid.channels)
    out = np.empty(flat.shape[0], dtype=bool)
    step = 65_536
    for start in range(0, flat.shape[0], step):
        chunk = flat[start: start + step]
        out[start: start + len(chunk)] = violation_mask(
            vols_to_calls(chunk, grid), grid.strikes, tol)
    return out.reshape(lead)


# ---------------------------------------------------------------------------
# LP repair
# ---------------------------------------------------------------------------

REPAIR_PRICE_MARGIN = 1.0e-5  # interior slack (price units) for bound/calendar rows
REPAIR_SLOPE_MARGIN = 1.0e-4  # interior slack (slope units) for convexity rows
MAX_LOG_VOL = 3.0             # inversion bracket cap: sigma up to ~e^3


def _repair_lp(calls: np.ndarray, strikes: np.ndarray,
               maturities: np.ndarray | None = None,
               interior: bool = False) -> tuple[np.ndarray, float]:
    """Closest (L1) arbitrage-free surface via the split-deviation LP.

    Variables are the positive/negative deviations (p, m) with
    C = C_hat + p - m; every static constraint becomes a row of A x <= b.

    ``interior=True`` tightens every constraint by a small margin and caps
    prices at the largest representable volatility, so the result survives
    float32 persistence and always inverts to finite log-vols.  The plain form
    solves the exact constraint system.
    """
    n_k, n_m = calls.shape
    n = n_k * n_m
    k_ext = _extended_strikes(strikes)
    h = np.diff(k_ext)  # strike gaps, length n_k + 1
    m_price = REPAIR_PRICE_MARGIN if interior else 0.0
    m_slope = REPAIR_SLOPE_MARGIN if interior else 0.0

    def var(i, j):
        return i * n_m + j

    rows, rhs = [], []

    def add(coeffs: dict[int, float], bound: float):
        # sum coeffs[v] * C_v >= bound  ->  -sum coeffs (p - m) <= sum coeffs C_hat - bound
        row = np.zeros(2 * n)
        base = 0.0
        for v, a in coeffs.items():
            row[v] -= a
            row[n + v] += a
            base += a * calls.flat[v]
        rows.append(row)
        rhs.append(base - bound)

    for j in range(n_m):
        add({var(0, j): 1.0}, 1.0 - strikes[0] + m_price)  # C_{1,j} >= 1 - K_1
        add({var(n_k - 1, j): 1.0}, m_price)               # C_{NK,j} >= 0
    for j in range(1, n_m):
        for i in range(n_k):                               # calendar: C_ij >= C_i,j-1
            add({var(i, j): 1.0, var(i, j - 1): -1.0}, m_price)
    for i in range(n_k):                                   # convexity around strike i
        ai, bi = 1.0 / h[i], 1.0 / h[i + 1]
        for j in range(n_m):
            coeffs = {var(i, j): -(ai + bi)}
            bound = m_slope
            if i > 0:
                coeffs[var(i - 1, j)] = ai
            else:
                bound -= ai * 1.0                          # C_low = 1 at K = 0
            if i < n_k - 1:
                coeffs[var(i + 1, j)] = bi
            # C_high = 0 contributes nothing
            add(coeffs, bound)
    if interior:
        if maturities is None:
            raise ValueError("interior repair needs maturities for the price caps")
        sigma_cap = float(np.exp(MAX_LOG_VOL - 0.1))
        for i in range(n_k):
            for j in range(n_m):                           # keep vols invertible
                cap = black_call(strikes[i], sigma_cap, maturities[j])
                add({var(i, j): -1.0}, -float(cap))        # C_ij <= cap

    c = np.ones(2 * n)
    x, objective = simplex.solve_lp(c, np.array(rows), np.array(rhs))
    deviation = x[:n] - x[n:]
    repaired = calls + deviation.reshape(n_k, n_m)
    return np.clip(repaired, 0.0, 1.0), objective


def repair_arbitrage(calls, strikes, tol: float = ARB_TOL) -> np.ndarray:
    """Return the L1-closest arbitrage-free call grid (input returned as-is
    when already feasible)."""
    calls = np.asarray(calls, dtype=float)
    strikes = np.asarray(strikes, dtype=float)
    if not check_no_arbitrage(calls, strikes, tol):
        return calls.copy()
    repaired, _ = _repair_lp(calls, strikes, interior=False)
    return repaired


def repair_pipeline(bundle, grid: SurfaceGrid,
                    tol: float = ARB_TOL) -> tuple[PathBundle, np.ndarray]:
    """Detect and repair arbitrage across a whole bundle of log-vol surfaces.

    Returns (clean bundle, violation flags per (path, time)).  Surfaces that
    already satisfy the constraints pass through bit-identical; violated ones
    go through the interior-margin LP, so the repaired vols stay feasible even
    after a float32 save/load round trip.
    """
    paths = bundle.paths if isinstance(bundle, PathBundle) else np.asarray(bundle, dtype=float)
    if paths.shape[-1] != grid.channels:
        raise ValueError(f"bundle has {paths.shape[-1]} channels, grid wants {grid.channels}")
    lead = paths.shape[:-1]
    flat = paths.reshape(-1, grid.channels)
    flags = violation_mask_logvol(flat, grid, tol)
    out = flat.copy()
    for idx in np.where(flags)[0]:
        calls = vols_to_calls(flat[idx], grid)
        repaired, _ = _repair_lp(calls, grid.strikes, grid.maturities, interior=True)
        out[idx] = calls_to_vols(repaired, grid)
    out = out.reshape(paths.shape)
    flags = flags.reshape(lead)
    if isinstance(bundle, PathBundle):
        return PathBundle(paths=out, seed=bundle.seed, model_id=bundle.model_id), flags
    return out, flags
