"""CSV ingestion, return/log-vol transforms, and bundle persistence.

File formats:

* price CSV: header ``date,close``, ISO dates strictly increasing, positive
  closes;
* surface CSV: header ``date,<maturity>-<strike>%,...`` (e.g. ``1m-85%``),
  cells are implied volatilities (not logs), one row per date;
* path bundle: one JSON header line (shape, seed, model id, format tag)
  followed by the raw little-endian float32 payload.

Any NaN cell aborts ingestion with its row/column named; silent imputation
would corrupt the tail/correlation statistics everything downstream measures.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass

import numpy as np

from tsgan.containers import PathBundle, SurfaceGrid
from tsgan.metrics import kurtosis, skewness

BUNDLE_FORMAT = "tsgan-bundle-v1"


@dataclass
class PriceSeries:
    dates: list[str]
    prices: np.ndarray

    def __post_init__(self):
        self.prices = np.asarray(self.prices, dtype=float)
        if len(self.dates) != len(self.prices):
            raise ValueError("dates and prices length mismatch")
        if np.any(self.prices <= 0):
            raise ValueError("prices must be strictly positive")
        if any(a >= b for a, b in zip(self.dates, self.dates[1:])):
            raise ValueError("dates must be strictly increasing")


@dataclass
class DatasetStats:
    length: int
    mean: float
    std: float
    skewness: float
    kurtosis: float


def to_log_returns(series: PriceSeries) -> np.ndarray:
    """x_t = ln(p_t / p_{t-1}); one entry shorter than the price series."""
    if len(series.prices) < 2:
        raise ValueError("need at least two prices")
    return np.diff(np.log(series.prices))


def dataset_stats(x) -> DatasetStats:
    x = np.asarray(x, dtype=float).ravel()
    if x.size < 4:
        raise ValueError("need at least 4 observations")
    return DatasetStats(length=x.size, mean=float(x.mean()), std=float(x.std()),
                        skewness=skewness(x), kurtosis=kurtosis(x))


def _parse_cell(value: str, row: int, col: str) -> float:
    try:
        out = float(value)
    except ValueError:
        raise ValueError(f"row {row}: column {col!r}: bad number {value!r}") from None
    if math.isnan(out):
        raise ValueError(f"row {row}: column {col!r}: NaN cell")
    return out


def load_price_csv(path) -> PriceSeries:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip().lower() for h in header[:2]] != ["date", "close"]:
            raise ValueError(f"{path}: expected 'date,close' header, got {header}")
        dates, prices = [], []
        for row_no, row in enumerate(reader, start=2):
            if not row or not "".join(row).strip():
                continue
            dates.append(row[0].strip())
            prices.append(_parse_cell(row[1], row_no, "close"))
    if not dates:
        raise ValueError(f"{path}: no data rows")
    return PriceSeries(dates=dates, prices=np.array(prices))


def save_price_csv(path, series: PriceSeries) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["date", "close"])
        for date, price in zip(series.dates, series.prices):
            writer.writerow([date, repr(float(price))])


def maturity_label(years: float) -> str:
    months = years * 12.0
    if abs(months - round(months)) < 1e-9:
        return f"{int(round(months))}m"
    return f"{years:g}y"


def parse_maturity_label(label: str) -> float:
    label = label.strip().lower()
    if label.endswith("m"):
        return float(label[:-1]) / 12.0
    if label.endswith("y"):
        return float(label[:-1])
    return float(label)


def strike_label(strike: float) -> str:
    return f"{strike * 100:g}%"


def parse_strike_label(label: str) -> float:
    label = label.strip()
    if label.endswith("%"):
        return float(label[:-1]) / 100.0
    return float(label)


def load_surface_csv(path) -> SurfaceGrid:
    """Parse a vol-surface CSV; column order is header-driven, values logged."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or header[0].strip().lower() != "date" or len(header) < 2:
            raise ValueError(f"{path}: expected 'date,<maturity>-<strike>,...' header")
        points = []
        for col in header[1:]:
            try:
                mat_part, strike_part = col.strip().split("-", maxsplit=1)
                points.append((parse_maturity_label(mat_part), parse_strike_label(strike_part)))
            except (ValueError, IndexError):
                raise ValueError(f"{path}: bad column label {col!r} "
                                 "(want e.g. '1m-85%')") from None
        rows, dates = [], []
        for row_no, row in enumerate(reader, start=2):
            if not row or not "".join(row).strip():
                continue
            if len(row) != len(header):
                raise ValueError(f"{path}: row {row_no} has {len(row)} cells, "
                                 f"expected {len(header)}")
            dates.append(row[0].strip())
            rows.append([_parse_cell(v, row_no, header[1 + i])
                         for i, v in enumerate(row[1:])])
    if not rows:
        raise ValueError(f"{path}: no data rows")
    if any(a >= b for a, b in zip(dates, dates[1:])):
        raise ValueError(f"{path}: dates must be strictly increasing")

    strikes = sorted({s for _, s in points})
    maturities = sorted({m for m, _ in points})
    vols = np.asarray(rows, dtype=float)
    if np.any(vols <= 0):
        raise ValueError(f"{path}: volatilities must be positive")
    data = np.empty((len(rows), len(strikes) * len(maturities)))
    seen = set()
    for col_idx, (m, s) in enumerate(points):
        flat = strikes.index(s) * len(maturities) + maturities.index(m)
        if flat in seen:
            raise ValueError(f"{path}: duplicate grid point {header[1 + col_idx]!r}")
        seen.add(flat)
        data[:, flat] = np.log(vols[:, col_idx])
    if len(seen) != data.shape[1]:
        raise ValueError(f"{path}: header does not cover the full strike x maturity grid")
    return SurfaceGrid(strikes=np.array(strikes), maturities=np.array(maturities), data=data)


def save_surface_csv(path, grid: SurfaceGrid, dates=None) -> None:
    """Write implied vols (exp of the stored log-vols) under Fig-style labels."""
    labels = [f"{maturity_label(m)}-{strike_label(k)}"
              for k in grid.strikes for m in grid.maturities]
    dates = dates or [f"{i:08d}" for i in range(grid.data.shape[0])]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["date"] + labels)
        for date, row in zip(dates, np.exp(grid.data)):
            writer.writerow([date] + [repr(float(v)) for v in row])


def save_bundle(path, bundle: PathBundle) -> None:
    header = {
        "format": BUNDLE_FORMAT,
        "shape": list(bundle.paths.shape),
        "seed": bundle.seed,
        "model_id": bundle.model_id,
    }
    with open(path, "wb") as fh:
        fh.write(json.dumps(header).encode() + b"\n")
        fh.write(np.ascontiguousarray(bundle.paths, dtype="<f4").tobytes())


def load_bundle(path) -> PathBundle:
    with open(path, "rb") as fh:
        header = json.loads(fh.readline().decode())
        if header.get("format") != BUNDLE_FORMAT:
            raise ValueError(f"{path}: not a {BUNDLE_FORMAT} file")
        shape = tuple(header["shape"])
        count = int(np.prod(shape))
        raw = fh.read(count * 4)
        if len(raw) != count * 4:
            raise ValueError(f"{path}: truncated payload")
        paths = np.frombuffer(raw, dtype="<f4").reshape(shape).copy()
    return PathBundle(paths=paths, seed=header.get("seed", 0),
                      model_id=header.get("model_id", ""))
