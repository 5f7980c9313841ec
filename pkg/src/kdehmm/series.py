"""Scalar time-series container shared by all model modules."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class TimeSeries:
    """An ordered sequence of real scalar observations.

    Parameters
    ----------
    values : array-like, shape (N,)
        The observations, in time order. Stored as a read-only float64 array.
    source : str, optional
        Provenance note (file path, generator description, ...).
    """

    values: np.ndarray
    source: str | None = None

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 1:
            raise ValueError(f"time series must be 1-dimensional, got shape {v.shape}")
        v = np.ascontiguousarray(v)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __len__(self) -> int:
        return self.values.shape[0]

    def with_source(self, source: str) -> "TimeSeries":
        return TimeSeries(self.values, source=source)


def as_series(data) -> TimeSeries:
    """Coerce an array-like or TimeSeries into a TimeSeries."""
    if isinstance(data, TimeSeries):
        return data
    return TimeSeries(np.asarray(data, dtype=np.float64))
