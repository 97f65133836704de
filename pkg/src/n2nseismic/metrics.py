"""Evaluation metrics: MSE, SNR, correlation and phase-spectrum fidelity."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InfiniteSNRError
from .grid import SeismicSection, as_array

DEFAULT_BANDS = tuple((lo, lo + 10.0) for lo in range(0, 60, 10))


@dataclass
class EvalReport:
    mse: float
    snr_db: float
    corrcoef: float
    phase_band_corr: list[tuple[float, float, float]] = field(default_factory=list)
    label: str = ""


def _pair(a, b):
    a, b = as_array(a), as_array(b)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    return a, b


def mse(S, S_hat) -> float:
    a, b = _pair(S, S_hat)
    return float(np.mean((a - b) ** 2))


def snr(S, S_hat) -> float:
    """SNR in dB of ``S`` against the clean reference ``S_hat``.

    Ratio of total sums of squares: 10 log10( sum S_hat^2 / sum (S - S_hat)^2 ).
    """
    a, b = _pair(S, S_hat)
    noise = float(np.sum((a - b) ** 2))
    if noise == 0.0:
        raise InfiniteSNRError("infinite SNR: the test section equals the reference")
    return float(10.0 * np.log10(np.sum(b ** 2) / noise))


def corrcoef(S, S_hat) -> float:
    """Pearson correlation of the two flattened grids."""
    a, b = _pair(S, S_hat)
    a = a.ravel() - a.mean()
    b = b.ravel() - b.mean()
    na, nb = np.sqrt(np.dot(a, a)), np.sqrt(np.dot(b, b))
    if na == 0 or nb == 0:
        raise ValueError("correlation undefined for a zero-variance input")
    return float(np.clip(np.dot(a, b) / (na * nb), -1.0, 1.0))


def time_sample_interval(section, dt_s: float | None = None, velocity: float | None = None) -> float:
    """Time step for spectral analysis.

    Depth sections are converted with a constant velocity (two-way time,
    dt = 2 dz / v).
    """
    if dt_s is not None:
        return float(dt_s)
    if not isinstance(section, SeismicSection):
        raise ValueError("dt_s is required for bare arrays")
    if section.axis_unit == "time":
        return section.sample_interval
    if velocity is None or velocity <= 0:
        raise ValueError("depth sections need a positive velocity for depth-to-time conversion")
    return 2.0 * section.sample_interval / velocity


def phase_spectrum(section, dt_s: float | None = None, f_max: float = 60.0,
                   velocity: float | None = None):
    """Trace-averaged phase spectrum over [0, f_max] Hz.

    Each trace is transformed along time; per frequency the phase of the
    circular mean of unit phasors across traces is reported.

    Returns
    -------
    freqs : ndarray
        Frequencies in Hz.
    phase : ndarray
        Phase in radians, in (-pi, pi].
    """
    x = as_array(section)
    dt = time_sample_interval(section, dt_s, velocity)
    if x.shape[0] < 16:
        raise ValueError("phase spectrum needs at least 16 samples per trace")
    if 0.5 / dt < f_max:
        raise ValueError(f"Nyquist frequency {0.5 / dt:g} Hz is below f_max {f_max:g} Hz")
    spec = np.fft.rfft(x, axis=0)
    freqs = np.fft.rfftfreq(x.shape[0], dt)
    keep = freqs <= f_max + 1e-9
    mag = np.abs(spec[keep])
    unit = np.divide(spec[keep], mag, out=np.zeros_like(spec[keep]), where=mag > 0)
    return freqs[keep], np.angle(unit.sum(axis=1))


def _band_bins(freqs, lo, hi, closed):
    return (freqs >= lo) & ((freqs <= hi) if closed else (freqs < hi))


def phase_band_corr(clean, test, dt_s: float | None = None, bands=DEFAULT_BANDS,
                    velocity: float | None = None) -> list[float]:
    """Per-band Pearson correlation of the two phase curves.

    Bands are half-open [lo, hi) except the last, which is closed. Phases are
    unwrapped within each band first.
    """
    c, t = _pair(clean, test)
    dt = time_sample_interval(clean, dt_s, velocity)
    f_max = max(hi for _, hi in bands)
    freqs, pc = phase_spectrum(c, dt, f_max)
    _, pt = phase_spectrum(t, dt, f_max)
    out = []
    for i, (lo, hi) in enumerate(bands):
        sel = _band_bins(freqs, lo, hi, closed=i == len(bands) - 1)
        if sel.sum() < 3:
            raise ValueError(f"band too narrow for correlation: {lo}-{hi} Hz has {sel.sum()} bins")
        a, b = np.unwrap(pc[sel]), np.unwrap(pt[sel])
        if np.array_equal(a, b):
            out.append(1.0)
            continue
        if np.ptp(a) == 0 or np.ptp(b) == 0:
            raise ValueError(f"phase curve is constant in band {lo}-{hi} Hz")
        out.append(float(np.corrcoef(a, b)[0, 1]))
    return out


def extract_trace(section, trace_index: int) -> np.ndarray:
    x = as_array(section)
    if not 0 <= trace_index < x.shape[1]:
        raise IndexError(f"trace index {trace_index} out of range [0, {x.shape[1]})")
    return x[:, trace_index].copy()


def evaluate(clean, test, dt_s: float | None = None, bands=DEFAULT_BANDS, label: str = "",
             velocity: float | None = None) -> EvalReport:
    """All metrics in one report; an exact match reports an SNR of +inf."""
    try:
        snr_db = snr(test, clean)
    except InfiniteSNRError:
        snr_db = float("inf")
    dt = time_sample_interval(clean, dt_s, velocity)
    corr = phase_band_corr(clean, test, dt, bands)
    return EvalReport(
        mse=mse(test, clean),
        snr_db=snr_db,
        corrcoef=corrcoef(test, clean),
        phase_band_corr=[(float(lo), float(hi), r) for (lo, hi), r in zip(bands, corr)],
        label=label,
    )
