"""Synthetic data generators for smoke tests and demos."""

from __future__ import annotations

import numpy as np

from tsgan.containers import SurfaceGrid


def garch_returns(n: int, omega: float = 4.0e-6, alpha: float = 0.10,
                  beta: float = 0.88, seed: int = 0, burn_in: int = 500) -> np.ndarray:
    """A GARCH(1,1) return series with normal innovations.

    Defaults give daily-return-like scale (~1.4% vol), strong volatility
    clustering (persistence 0.98) and kurtosis around 6.
    """
    if alpha + beta >= 1:
        raise ValueError("need alpha + beta < 1 for stationarity")
    rng = np.random.default_rng(seed)
    eps = rng.standard_normal(n + burn_in)
    var = omega / (1.0 - alpha - beta)
    out = np.empty(n + burn_in)
    for t in range(n + burn_in):
        out[t] = np.sqrt(var) * eps[t]
        var = omega + alpha * out[t] ** 2 + beta * var
    return out[burn_in:]


def synthetic_surface_grid(n: int, seed: int = 0,
                           strikes=(0.85, 0.90, 0.95, 1.00, 1.05, 1.10, 1.15),
                           maturities=(1 / 12, 2 / 12, 3 / 12, 6 / 12)) -> SurfaceGrid:
    """Log-volatility surfaces driven by mean-reverting level/smile/term factors.

    The smile is convex in strike and the term structure mildly upward, so the
    generated call surfaces are arbitrage-free most of the time; noise on top
    produces occasional violations, which is what repair demos want.
    """
    strikes = np.asarray(strikes, dtype=float)
    maturities = np.asarray(maturities, dtype=float)
    rng = np.random.default_rng(seed)
    n_k, n_m = len(strikes), len(maturities)

    level = np.empty(n)
    smile = np.empty(n)
    term = np.empty(n)
    lv, sm, tm = np.log(0.2), 0.3, 0.05
    for t in range(n):
        lv += 0.02 * (np.log(0.2) - lv) + 0.02 * rng.standard_normal()
        sm += 0.05 * (0.3 - sm) + 0.01 * rng.standard_normal()
        tm += 0.05 * (0.05 - tm) + 0.005 * rng.standard_normal()
        level[t], smile[t], term[t] = lv, sm, tm

    moneyness = strikes - 1.0
    data = np.empty((n, n_k * n_m))
    for i, k in enumerate(moneyness):
        for j, m in enumerate(maturities):
            col = i * n_m + j
            data[:, col] = (level + smile * k ** 2 - 0.1 * k + term * m
                            + 0.002 * rng.standard_normal(n))
    return SurfaceGrid(strikes=strikes, maturities=maturities, data=data)
