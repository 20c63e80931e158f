"""Zero-fill, cumulative feature augmentation and shifted min-max scaling."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import InputError

SUFFIXES = ("", "_ctime", "_cmax", "_csum")


@dataclass(frozen=True, eq=False)
class RawSeries:
    times: np.ndarray
    values: np.ndarray  # (T, D_raw); NaN allowed where masked
    missing_mask: np.ndarray  # (T, D_raw) bool
    feature_names: tuple

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        mask = np.asarray(self.missing_mask, dtype=bool)
        if mask.shape != values.shape:
            raise InputError(f"mask shape {mask.shape} != values shape {values.shape}")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "missing_mask", mask)
        object.__setattr__(self, "feature_names", tuple(self.feature_names))

    @classmethod
    def from_values(cls, times, values, feature_names=None):
        values = np.asarray(values, dtype=np.float64)
        names = feature_names or [f"f{i}" for i in range(values.shape[1])]
        return cls(np.asarray(times, dtype=np.float64), values, np.isnan(values), names)


@dataclass(frozen=True, eq=False)
class AugmentedSeries:
    times: np.ndarray
    values: np.ndarray  # (T, 4 * D_raw)
    feature_names: tuple


def fill_missing(raw: RawSeries) -> RawSeries:
    values = np.where(raw.missing_mask, 0.0, raw.values)
    return replace(raw, values=values)


def augmented_names(names) -> list[str]:
    return [f"{n}{suffix}" for suffix in SUFFIXES for n in names]


def augment_values(values) -> np.ndarray:
    values = np.asarray(values, dtype=np.float64)
    if np.isnan(values).any():
        raise InputError("augment expects missing values to be filled first")
    ctime = np.cumsum(values != 0, axis=0).astype(np.float64)
    cmax = np.maximum.accumulate(values, axis=0)
    csum = np.cumsum(values, axis=0)
    return np.concatenate([values, ctime, cmax, csum], axis=1)


def augment(raw: RawSeries) -> AugmentedSeries:
    """Append running non-zero count, running max and running sum of every raw feature.

    Columns come in four blocks (raw, ``_ctime``, ``_cmax``, ``_csum``), each
    in the raw feature order.
    """
    return AugmentedSeries(raw.times, augment_values(raw.values), tuple(augmented_names(raw.feature_names)))


@dataclass(frozen=True, eq=False)
class MinMaxStats:
    mins: np.ndarray
    maxs: np.ndarray
    feature_names: tuple = ()


def fit_minmax(series) -> MinMaxStats:
    """Per-feature min/max over a list of ``(T, D)`` arrays (training split only)."""
    stacked = np.concatenate([np.asarray(s, dtype=np.float64) for s in series], axis=0)
    return MinMaxStats(np.nanmin(stacked, axis=0), np.nanmax(stacked, axis=0))


def minmax_shift(X, stats: MinMaxStats) -> np.ndarray:
    """Scale to [0, 1] with the given stats, then shift to [1, 2]. Constant features map to 1."""
    X = np.asarray(X, dtype=np.float64)
    span = stats.maxs - stats.mins
    if np.any(span < 0):
        raise InputError("min exceeds max for some feature")
    safe = np.where(span > 0, span, 1.0)
    scaled = np.where(span > 0, (X - stats.mins) / safe, 0.0)
    return scaled + 1.0
