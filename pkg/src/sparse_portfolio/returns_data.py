"""Price ingestion, return conversion, moment estimation and synthetic panels.

Price CSV layout::

    date,AAA,BBB,...
    2017-06-21,101.2,33.7,...

Returns are simple (arithmetic) period returns. Moments use population
(1/N) normalization.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import IO, Sequence

import numpy as np


class DataError(ValueError):
    """Raised for malformed or insufficient market data."""


@dataclass(frozen=True)
class PricePanel:
    dates: tuple[str, ...]
    tickers: tuple[str, ...]
    prices: np.ndarray

    def __post_init__(self):
        prices = np.asarray(self.prices, dtype=float)
        if prices.ndim != 2:
            raise DataError("prices must be a 2-D array")
        if prices.shape != (len(self.dates), len(self.tickers)):
            raise DataError(
                f"prices shape {prices.shape} does not match "
                f"{len(self.dates)} dates x {len(self.tickers)} tickers"
            )
        if not np.all(prices > 0):
            raise DataError("all prices must be strictly positive")
        object.__setattr__(self, "prices", prices)


@dataclass(frozen=True)
class ReturnsPanel:
    tickers: tuple[str, ...]
    returns: np.ndarray
    sectors: tuple[str, ...] | None = None

    def __post_init__(self):
        returns = np.asarray(self.returns, dtype=float)
        if returns.ndim != 2 or returns.shape[0] < 1:
            raise DataError("returns must be a 2-D array with at least one row")
        if returns.shape[1] != len(self.tickers):
            raise DataError(
                f"returns has {returns.shape[1]} columns but {len(self.tickers)} tickers"
            )
        if not np.all(np.isfinite(returns)):
            raise DataError("returns contain non-finite entries")
        if self.sectors is not None and len(self.sectors) != len(self.tickers):
            raise DataError("sector labels must match tickers one-to-one")
        object.__setattr__(self, "tickers", tuple(self.tickers))
        object.__setattr__(self, "returns", returns)
        if self.sectors is not None:
            object.__setattr__(self, "sectors", tuple(self.sectors))

    @property
    def n_samples(self) -> int:
        return self.returns.shape[0]

    @property
    def n_assets(self) -> int:
        return self.returns.shape[1]

    def subset(self, indices: Sequence[int]) -> "ReturnsPanel":
        """Panel restricted to the given asset columns, in the given order."""
        idx = list(indices)
        sectors = None if self.sectors is None else tuple(self.sectors[i] for i in idx)
        return ReturnsPanel(
            tuple(self.tickers[i] for i in idx), self.returns[:, idx], sectors
        )


@dataclass(frozen=True)
class Moments:
    mu: np.ndarray
    sigma: np.ndarray


def load_prices(source: bytes | str | IO) -> PricePanel:
    """Parse a price CSV from bytes, text, or a (binary or text) stream.

    Errors name the 1-based line number of the offending row.
    """
    if isinstance(source, bytes):
        text = source.decode("utf-8")
    elif isinstance(source, str):
        text = source
    else:
        raw = source.read()
        text = raw.decode("utf-8") if isinstance(raw, bytes) else raw
    text = text.lstrip("﻿")

    reader = csv.reader(io.StringIO(text))
    rows = [(i + 1, row) for i, row in enumerate(reader) if row and any(c.strip() for c in row)]
    if not rows:
        raise DataError("empty price file")
    _, header = rows[0]
    header = [h.strip() for h in header]
    if header[0] != "date":
        raise DataError(f"line 1: first column header must be 'date', got {header[0]!r}")
    tickers = header[1:]
    if not tickers:
        raise DataError("line 1: no ticker columns")
    seen = set()
    for t in tickers:
        if not t:
            raise DataError("line 1: empty ticker name")
        if t in seen:
            raise DataError(f"line 1: duplicate ticker {t!r}")
        seen.add(t)

    dates, values = [], []
    for lineno, row in rows[1:]:
        if len(row) != len(header):
            raise DataError(
                f"line {lineno}: expected {len(header)} fields, got {len(row)}"
            )
        parsed = []
        for ticker, cell in zip(tickers, row[1:]):
            try:
                x = float(cell)
            except ValueError:
                raise DataError(
                    f"line {lineno}: cannot parse price {cell!r} for {ticker}"
                ) from None
            if not np.isfinite(x) or x <= 0:
                raise DataError(f"line {lineno}: non-positive price {cell!r} for {ticker}")
            parsed.append(x)
        dates.append(row[0].strip())
        values.append(parsed)
    if not values:
        raise DataError("price file has a header but no data rows")
    return PricePanel(tuple(dates), tuple(tickers), np.array(values, dtype=float))


def read_prices_csv(path) -> PricePanel:
    with open(path, "rb") as fh:
        return load_prices(fh)


def to_returns(panel: PricePanel, sectors: Sequence[str] | None = None) -> ReturnsPanel:
    prices = panel.prices
    if prices.shape[0] < 2:
        raise DataError(f"need at least 2 price rows to form returns, got {prices.shape[0]}")
    returns = (prices[1:] - prices[:-1]) / prices[:-1]
    return ReturnsPanel(panel.tickers, returns, None if sectors is None else tuple(sectors))


def estimate_moments(returns: ReturnsPanel | np.ndarray) -> Moments:
    R = returns.returns if isinstance(returns, ReturnsPanel) else np.asarray(returns, float)
    if R.ndim != 2 or R.shape[0] < 1:
        raise DataError("need at least one return sample")
    mu = R.mean(axis=0)
    centered = R - mu
    sigma = centered.T @ centered / R.shape[0]
    # exact symmetry, matmul rounding can differ in the last bit
    sigma = 0.5 * (sigma + sigma.T)
    return Moments(mu, sigma)


@dataclass(frozen=True)
class SynthConfig:
    """Parameters of the one-factor-per-sector Gaussian return model.

    Asset ``i`` in sector ``s`` has per-period return
    ``mean_i + factor_s + noise_i`` with ``factor_s ~ N(0, factor_vol**2)``,
    ``noise_i ~ N(0, idio_vol**2)`` and ``mean_i ~ U(mean_low, mean_high)``.
    Defaults are on the scale of daily equity returns.
    """

    factor_vol: float = 0.01
    idio_vol: float = 0.015
    mean_low: float = 0.0
    mean_high: float = 0.001


def sector_sizes(n_assets: int, sectors: int | Sequence[int]) -> list[int]:
    """Expand a sector count into near-equal sizes, or validate explicit sizes."""
    if isinstance(sectors, (int, np.integer)):
        m = int(sectors)
        if m < 1 or m > n_assets:
            raise DataError(f"cannot split {n_assets} assets into {m} nonempty sectors")
        base, extra = divmod(n_assets, m)
        return [base + (1 if s < extra else 0) for s in range(m)]
    sizes = [int(s) for s in sectors]
    if any(s <= 0 for s in sizes):
        raise DataError(f"empty sector in partition {sizes}")
    if sum(sizes) != n_assets:
        raise DataError(f"sector sizes {sizes} do not sum to {n_assets}")
    return sizes


def synth_returns(
    n_assets: int,
    n_samples: int,
    sectors: int | Sequence[int] = 1,
    seed: int = 0,
    config: SynthConfig | None = None,
) -> ReturnsPanel:
    if n_assets < 1:
        raise DataError("n_assets must be at least 1")
    if n_samples < 2:
        raise DataError("n_samples must be at least 2")
    config = config or SynthConfig()
    sizes = sector_sizes(n_assets, sectors)
    labels = np.repeat(np.arange(len(sizes)), sizes)

    rng = np.random.default_rng(seed)
    means = rng.uniform(config.mean_low, config.mean_high, size=n_assets)
    factors = rng.normal(0.0, config.factor_vol, size=(n_samples, len(sizes)))
    noise = rng.normal(0.0, config.idio_vol, size=(n_samples, n_assets))
    R = means + factors[:, labels] + noise

    width = len(str(n_assets - 1))
    tickers = tuple(f"A{i:0{width}d}" for i in range(n_assets))
    sector_names = tuple(f"sector_{s}" for s in labels)
    return ReturnsPanel(tickers, R, sector_names)


def returns_to_prices(panel: ReturnsPanel, start: float = 100.0) -> PricePanel:
    """Compound returns into a price path starting at ``start``; inverse of to_returns."""
    growth = np.vstack([np.ones(panel.n_assets), np.cumprod(1.0 + panel.returns, axis=0)])
    dates = tuple(f"t{j:04d}" for j in range(growth.shape[0]))
    return PricePanel(dates, panel.tickers, start * growth)
