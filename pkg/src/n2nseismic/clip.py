"""Amplitude-band Clip & De-noise: turns an image denoiser into a seismic one.

A section is partitioned into disjoint amplitude bands by the thresholds
``alpha_1 < ... < alpha_t``. Band ``k`` holds the cells with
``alpha_{k-1} < |x| <= alpha_k`` (``alpha_0 = 0``); the top band also takes
every ``|x| > alpha_t``. Each band is denoised from a copy of the section
clipped at its own threshold and rescaled to [-1, 1] by that threshold, so
weak amplitudes are not drowned out by strong ones. The top band is denoised
from the unclipped section.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import DegenerateAmplitudeError
from .grid import BinaryMask, SeismicSection, as_array

log = logging.getLogger(__name__)

# max |x| beyond alpha_t by more than this factor triggers a schedule warning
SCHEDULE_SLACK = 1.01


@dataclass(frozen=True)
class ClipSchedule:
    alphas: tuple[float, ...]

    def __post_init__(self):
        alphas = tuple(float(a) for a in self.alphas)
        if not alphas:
            raise ValueError("a clip schedule needs at least one threshold")
        if any(not np.isfinite(a) or a <= 0 for a in alphas):
            raise ValueError(f"thresholds must be positive and finite: {alphas}")
        if any(b <= a for a, b in zip(alphas, alphas[1:])):
            raise ValueError(f"thresholds must be strictly increasing: {alphas}")
        object.__setattr__(self, "alphas", alphas)

    @property
    def t(self) -> int:
        return len(self.alphas)

    def __str__(self):
        return "[" + ", ".join(f"{a:.6g}" for a in self.alphas) + "]"


@dataclass(frozen=True)
class BandDecomposition:
    band_masks: tuple[BinaryMask, ...]
    schedule: ClipSchedule


def clip(section, alpha: float):
    """Clip amplitudes to [-alpha, alpha]."""
    if not alpha > 0:
        raise ValueError(f"alpha must be > 0, got {alpha}")
    x = as_array(section)
    out = np.clip(x, -alpha, alpha)
    if isinstance(section, SeismicSection):
        return section.with_data(out, f"clip(alpha={alpha!r})")
    return out


def band_index(x, schedule: ClipSchedule) -> np.ndarray:
    """0-based band of every cell; boundary values fall in the lower band."""
    idx = np.searchsorted(np.asarray(schedule.alphas), np.abs(as_array(x)), side="left")
    return np.minimum(idx, schedule.t - 1)


def decompose(section, schedule: ClipSchedule) -> BandDecomposition:
    idx = band_index(section, schedule)
    masks = tuple(BinaryMask((idx == k).astype(np.uint8)) for k in range(schedule.t))
    return BandDecomposition(masks, schedule)


def default_schedule(section, t: int) -> ClipSchedule:
    """Evenly spaced thresholds ``k * A / t`` for k = 1..t, A = max |x|."""
    if t < 1:
        raise ValueError("t must be >= 1")
    peak = float(np.max(np.abs(as_array(section))))
    if peak == 0:
        raise DegenerateAmplitudeError("degenerate amplitude range")
    return ClipSchedule(tuple(k * peak / t for k in range(1, t + 1)))


def clip_denoise(section, schedule: ClipSchedule | Sequence[float],
                 denoiser: Callable[[np.ndarray], np.ndarray]):
    """Denoise band by band and recompose over the disjoint band masks.

    ``denoiser`` maps a 2D array with values in about [-1, 1] to an array of
    the same shape. For band k < t it sees ``clip(x, alpha_k) / alpha_k``; the
    top band uses ``x / alpha_t`` unclipped. Each result is scaled back by
    its threshold before masking.
    """
    if not isinstance(schedule, ClipSchedule):
        schedule = ClipSchedule(tuple(schedule))
    x = as_array(section)
    if not np.all(np.isfinite(x)):
        raise ValueError("section contains non-finite values")
    idx = band_index(x, schedule)
    out = np.zeros_like(x)
    alpha_top = schedule.alphas[-1]
    for k, alpha in enumerate(schedule.alphas):
        band = idx == k
        if not band.any():
            continue
        src = x if k == schedule.t - 1 else np.clip(x, -alpha, alpha)
        den = np.asarray(denoiser(src / alpha))
        if den.shape != x.shape:
            raise ValueError(f"denoiser changed the shape {x.shape} -> {den.shape}")
        out[band] = den[band] * alpha

    if not isinstance(section, SeismicSection):
        return out
    stage = f"clip_denoise(schedule={schedule})"
    peak = float(np.max(np.abs(x)))
    if peak > SCHEDULE_SLACK * alpha_top:
        msg = f"max |x| {peak:.6g} exceeds alpha_t {alpha_top:.6g}; top band absorbs the excess"
        log.warning(msg)
        stage += f" [warning: {msg}]"
    return section.with_data(out, stage)
