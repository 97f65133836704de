"""Core 2D seismic section model and elementary grid transforms.

Sections are stored row-major with the sample (time/depth) axis first, so
``data[i, j]`` is sample ``i`` of trace ``j``. All grid math is float64.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .errors import DegenerateAmplitudeError, MaskOverlapError

AXIS_UNITS = {"time": "s", "depth": "m"}


@dataclass(frozen=True)
class SeismicSection:
    """A 2D amplitude grid of ``M`` samples by ``N`` traces.

    ``sample_interval`` is in seconds when ``axis_unit == "time"`` and in
    meters when ``axis_unit == "depth"``.
    """

    data: np.ndarray
    sample_interval: float = 0.002
    axis_unit: str = "time"
    provenance: str = ""

    def __post_init__(self):
        data = np.array(self.data, dtype=np.float64, copy=True)
        if data.ndim != 2 or data.shape[0] < 1 or data.shape[1] < 1:
            raise ValueError(f"section data must be a nonempty 2D grid, got shape {data.shape}")
        if not np.all(np.isfinite(data)):
            raise ValueError("section data contains NaN or Inf")
        if not self.sample_interval > 0:
            raise ValueError(f"sample_interval must be > 0, got {self.sample_interval}")
        if self.axis_unit not in AXIS_UNITS:
            raise ValueError(f"axis_unit must be one of {sorted(AXIS_UNITS)}, got {self.axis_unit!r}")
        data.flags.writeable = False
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "sample_interval", float(self.sample_interval))

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    @property
    def n_samples(self) -> int:
        return self.data.shape[0]

    @property
    def n_traces(self) -> int:
        return self.data.shape[1]

    @property
    def max_abs(self) -> float:
        return float(np.max(np.abs(self.data)))

    def with_data(self, data, stage: str | None = None) -> "SeismicSection":
        """Copy of this section carrying new amplitudes (and one more lineage line)."""
        return replace(self, data=data, provenance=append_provenance(self.provenance, stage))

    def with_stage(self, stage: str) -> "SeismicSection":
        return replace(self, provenance=append_provenance(self.provenance, stage))


def append_provenance(provenance: str, stage: str | None) -> str:
    if not stage:
        return provenance
    return f"{provenance}\n{stage}" if provenance else stage


def as_array(x) -> np.ndarray:
    """Amplitudes of a section, or the argument itself as a float64 array."""
    if isinstance(x, SeismicSection):
        return x.data
    return np.asarray(x, dtype=np.float64)


@dataclass(frozen=True)
class BinaryMask:
    data: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data)
        if data.ndim != 2:
            raise ValueError("mask must be 2D")
        if data.dtype != np.uint8:
            if not np.all((data == 0) | (data == 1)):
                raise ValueError("mask entries must be exactly 0 or 1")
            data = data.astype(np.uint8)
        elif np.any(data > 1):
            raise ValueError("mask entries must be exactly 0 or 1")
        data = data.copy()
        data.flags.writeable = False
        object.__setattr__(self, "data", data)

    @property
    def shape(self):
        return self.data.shape

    @classmethod
    def ones(cls, shape) -> "BinaryMask":
        return cls(np.ones(shape, dtype=np.uint8))

    @classmethod
    def zeros(cls, shape) -> "BinaryMask":
        return cls(np.zeros(shape, dtype=np.uint8))

    def as_bool(self) -> np.ndarray:
        return self.data.astype(bool)


@dataclass(frozen=True)
class SectionStats:
    max_abs: float
    mean: float
    variance: float
    histogram: list[tuple[float, float, int]] = field(default_factory=list)


def normalize(section):
    """Scale a section into [-1, 1] by its max absolute amplitude.

    Returns the scaled section and the scale; multiply by the scale to undo.
    Plain arrays are accepted and returned as arrays.
    """
    x = as_array(section)
    scale = float(np.max(np.abs(x))) if x.size else 0.0
    if scale == 0.0:
        raise DegenerateAmplitudeError("degenerate amplitude range")
    out = x / scale
    if isinstance(section, SeismicSection):
        return section.with_data(out, f"normalize(scale={scale!r})"), scale
    return out, scale


def denormalize(section, scale: float):
    x = as_array(section)
    if isinstance(section, SeismicSection):
        return section.with_data(x * scale, f"denormalize(scale={scale!r})")
    return x * scale


def stats(section, n_bins: int = 64) -> SectionStats:
    """Amplitude statistics: max |x| (A), mean, population variance, histogram.

    The histogram spans the data's own [min, max] with equal-width bins,
    rightmost bin closed.
    """
    if n_bins < 1:
        raise ValueError("n_bins must be >= 1")
    x = as_array(section)
    counts, edges = np.histogram(x, bins=n_bins)
    hist = [(float(lo), float(hi), int(c)) for lo, hi, c in zip(edges[:-1], edges[1:], counts)]
    return SectionStats(
        max_abs=float(np.max(np.abs(x))),
        mean=float(np.mean(x)),
        variance=float(np.var(x)),
        histogram=hist,
    )


def mask_complement(masks: Sequence[BinaryMask], shape=None) -> BinaryMask:
    """All-ones mask minus the sum of pairwise-disjoint masks.

    ``shape`` is only needed when ``masks`` is empty.
    """
    if not masks:
        if shape is None:
            raise ValueError("shape is required for an empty mask list")
        return BinaryMask.ones(shape)
    shape = masks[0].shape
    total = np.zeros(shape, dtype=np.int64)
    for m in masks:
        if m.shape != shape:
            raise ValueError(f"mask shape {m.shape} does not match {shape}")
        total += m.data
    if np.any(total > 1):
        raise MaskOverlapError("masks not disjoint")
    return BinaryMask((1 - total).astype(np.uint8))
