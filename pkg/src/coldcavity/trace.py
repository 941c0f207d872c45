"""Uniformly sampled real time series with a unit tag."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

UNITS = ("intensity", "noise-power-linear", "noise-power-dB", "radians")


@dataclass(frozen=True)
class Trace:
    t0: float
    dt: float
    samples: np.ndarray
    unit: str = "intensity"

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be > 0")
        if self.unit not in UNITS:
            raise ValueError(f"unknown unit tag {self.unit!r}")
        s = np.asarray(self.samples, dtype=float)
        if s.ndim != 1:
            raise ValueError("samples must be one-dimensional")
        if not np.all(np.isfinite(s)):
            raise ValueError("samples must be finite")
        object.__setattr__(self, "samples", s)

    def __len__(self):
        return len(self.samples)

    @property
    def time(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(len(self.samples))

    @property
    def duration(self) -> float:
        return self.dt * len(self.samples)

    def with_samples(self, samples, unit: str | None = None) -> "Trace":
        return Trace(self.t0, self.dt, samples, self.unit if unit is None else unit)

    def window(self, start: float, length: float) -> "Trace":
        """Sub-trace covering ``[start, start + length)`` in absolute time."""
        i0 = int(round((start - self.t0) / self.dt))
        n = int(round(length / self.dt))
        if i0 < 0 or n <= 0 or i0 + n > len(self.samples):
            raise ValueError("window exceeds trace")
        return Trace(self.t0 + i0 * self.dt, self.dt, self.samples[i0:i0 + n], self.unit)
