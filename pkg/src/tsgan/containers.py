"""Shared data containers: generated path bundles, surface grids, score reports."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np


@dataclass
class PathBundle:
    """A batch of simulated paths: ``paths[i, t, j]`` is path i, step t, channel j."""

    paths: np.ndarray
    seed: int = 0
    model_id: str = ""

    def __post_init__(self):
        self.paths = np.asarray(self.paths)
        if self.paths.ndim == 2:
            self.paths = self.paths[:, :, None]
        if self.paths.ndim != 3:
            raise ValueError(f"paths must be (n_paths, length, channels), got shape {self.paths.shape}")
        if self.paths.shape[0] < 1 or self.paths.shape[1] < 1:
            raise ValueError("bundle must contain at least one path of length >= 1")
        if not np.all(np.isfinite(self.paths)):
            raise ValueError("bundle contains non-finite values")

    @property
    def n_paths(self) -> int:
        return self.paths.shape[0]

    @property
    def length(self) -> int:
        return self.paths.shape[1]

    @property
    def channels(self) -> int:
        return self.paths.shape[2]


@dataclass
class SurfaceGrid:
    """Log-volatility surfaces on a strike/maturity grid, flattened per row.

    Strikes are relative (spot-normalized) and equally spaced; maturities are in
    years.  Column ``(j1 - 1) * n_maturities + j2`` (1-based) holds the point at
    strike ``j1`` and maturity ``j2``, i.e. strike-major flattening.
    """

    strikes: np.ndarray
    maturities: np.ndarray
    data: np.ndarray  # (T, n_strikes * n_maturities) log-volatilities

    def __post_init__(self):
        self.strikes = np.asarray(self.strikes, dtype=float)
        self.maturities = np.asarray(self.maturities, dtype=float)
        self.data = np.asarray(self.data, dtype=float)
        if self.strikes.ndim != 1 or self.maturities.ndim != 1:
            raise ValueError("strikes and maturities must be 1-D")
        diffs = np.diff(self.strikes)
        if len(self.strikes) > 1 and (np.any(diffs <= 0) or not np.allclose(diffs, diffs[0])):
            raise ValueError("strikes must be strictly increasing and equally spaced")
        if np.any(np.diff(self.maturities) <= 0):
            raise ValueError("maturities must be strictly increasing")
        if self.data.ndim != 2 or self.data.shape[1] != self.channels:
            raise ValueError(
                f"data must be (T, {self.channels}) for this grid, got {self.data.shape}"
            )

    @property
    def n_strikes(self) -> int:
        return len(self.strikes)

    @property
    def n_maturities(self) -> int:
        return len(self.maturities)

    @property
    def channels(self) -> int:
        return self.n_strikes * self.n_maturities

    def flat_index(self, strike_idx: int, maturity_idx: int) -> int:
        """0-based flattened column index of (strike, maturity)."""
        if not 0 <= strike_idx < self.n_strikes:
            raise IndexError(f"strike index {strike_idx} out of range")
        if not 0 <= maturity_idx < self.n_maturities:
            raise IndexError(f"maturity index {maturity_idx} out of range")
        return strike_idx * self.n_maturities + maturity_idx

    def grid_index(self, flat: int) -> tuple[int, int]:
        """Inverse of :meth:`flat_index`."""
        if not 0 <= flat < self.channels:
            raise IndexError(f"flat index {flat} out of range")
        return flat // self.n_maturities, flat % self.n_maturities

    def to_surface_array(self, flat_rows: np.ndarray) -> np.ndarray:
        """Reshape (..., channels) flattened rows into (..., n_strikes, n_maturities)."""
        flat_rows = np.asarray(flat_rows)
        return flat_rows.reshape(flat_rows.shape[:-1] + (self.n_strikes, self.n_maturities))

    def to_flat_rows(self, surfaces: np.ndarray) -> np.ndarray:
        surfaces = np.asarray(surfaces)
        return surfaces.reshape(surfaces.shape[:-2] + (self.channels,))


@dataclass
class ScoreReport:
    """Named evaluation scores plus the lag horizon and run metadata.

    Key order is meaningful (it is the emission order of reports) and is
    preserved through JSON round trips.
    """

    scores: dict[str, float]
    delta: int = 0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        for name, value in self.scores.items():
            if not np.isfinite(value):
                raise ValueError(f"score {name!r} is not finite: {value}")
            if value < 0:
                raise ValueError(f"score {name!r} is negative: {value}")

    def to_json(self) -> str:
        payload = {
            "scores": {k: float(v) for k, v in self.scores.items()},
            "delta": self.delta,
            "meta": self.meta,
        }
        return json.dumps(payload, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "ScoreReport":
        payload = json.loads(text)
        return cls(scores=payload["scores"], delta=payload.get("delta", 0), meta=payload.get("meta", {}))
