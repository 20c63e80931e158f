"""Containers for labelled multivariate time series."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InputError


@dataclass(frozen=True, eq=False)
class TimeSeriesSample:
    sample_id: str
    times: np.ndarray  # (T,) hours, strictly increasing
    values: np.ndarray  # (T, D)
    label: int = 0
    mask: np.ndarray | None = None  # True where the value was missing

    def __post_init__(self):
        times = np.asarray(self.times, dtype=np.float64)
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2 or values.shape[0] != times.shape[0]:
            raise InputError(f"sample {self.sample_id}: values must be (T, D) with T={times.shape[0]}")
        if np.any(np.diff(times) <= 0):
            raise InputError(f"sample {self.sample_id}: times must be strictly increasing")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)

    @property
    def n_steps(self) -> int:
        return self.values.shape[0]

    @property
    def n_features(self) -> int:
        return self.values.shape[1]


@dataclass
class Dataset:
    samples: list[TimeSeriesSample]
    feature_names: list[str] = field(default_factory=list)

    def __post_init__(self):
        if not self.feature_names and self.samples:
            self.feature_names = [f"f{i}" for i in range(self.samples[0].n_features)]

    def __len__(self):
        return len(self.samples)

    def __getitem__(self, i):
        return self.samples[i]

    @property
    def labels(self) -> np.ndarray:
        return np.array([s.label for s in self.samples], dtype=np.int64)

    @property
    def n_features(self) -> int:
        return len(self.feature_names)

    def by_id(self, sample_id: str) -> TimeSeriesSample:
        for s in self.samples:
            if s.sample_id == sample_id:
                return s
        raise InputError(f"no sample with id {sample_id!r}")

    def subset(self, indices) -> "Dataset":
        return Dataset([self.samples[i] for i in indices], list(self.feature_names))
