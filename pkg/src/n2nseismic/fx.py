"""f-x prediction filtering (FX-Decon) for random noise attenuation.

Coherent events that are linear across traces become, at each temporal
frequency, complex sinusoids along the trace axis and are predictable by a
short linear filter; random noise is not. The section is cut into tapered
time windows, each window is transformed along time, and every frequency
slice is replaced by the average of its forward and backward one-step
predictions. Windows are then overlap-added back.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import SeismicSection, as_array


@dataclass(frozen=True)
class FxConfig:
    window_length_samples: int = 64
    window_overlap: float = 0.5
    filter_length_traces: int = 4
    prewhitening: float = 0.01
    band_hz: tuple[float, float] | None = None

    def __post_init__(self):
        if self.filter_length_traces < 1:
            raise ValueError("filter_length_traces must be >= 1")
        if self.window_length_samples < 2 * self.filter_length_traces:
            raise ValueError("window_length_samples must be >= 2 * filter_length_traces")
        if not 0.0 <= self.window_overlap <= 0.9:
            raise ValueError("window_overlap must be in [0, 0.9]")
        if self.prewhitening < 0:
            raise ValueError("prewhitening must be >= 0")
        if self.band_hz is not None:
            lo, hi = self.band_hz
            if not 0 <= lo < hi:
                raise ValueError(f"invalid band_hz {self.band_hz}")
            object.__setattr__(self, "band_hz", (float(lo), float(hi)))


def taper_window(length: int, overlap: int) -> np.ndarray:
    """Flat-top window with raised-cosine ramps of ``overlap`` samples.

    Neighbouring windows spaced ``length - overlap`` apart sum to exactly one
    over their overlap (sin^2 + cos^2).
    """
    w = np.ones(length)
    if overlap > 0:
        ramp = np.sin(0.5 * np.pi * (np.arange(overlap) + 0.5) / overlap) ** 2
        w[:overlap] = ramp
        w[length - overlap:] = np.minimum(w[length - overlap:], ramp[::-1])
    return w


def _design_system(slices: np.ndarray, p: int, forward: bool):
    """Regressors and targets for p-tap prediction along axis 1.

    slices: (F, N). Returns X (F, N-p, p) and y (F, N-p).
    """
    n = slices.shape[1]
    if forward:
        # y_j = sum_k a_k s_{j-k}, j = p..n-1
        X = np.stack([slices[:, p - k:n - k] for k in range(1, p + 1)], axis=2)
        y = slices[:, p:]
    else:
        # y_j = sum_k b_k s_{j+k}, j = 0..n-p-1
        X = np.stack([slices[:, k:n - p + k] for k in range(1, p + 1)], axis=2)
        y = slices[:, :n - p]
    return X, y


def _solve_filters(X, y, prewhitening):
    """Regularized least squares per frequency; zero filters for dead slices."""
    XH = np.conj(np.swapaxes(X, 1, 2))
    R = XH @ X
    rhs = (XH @ y[..., None])[..., 0]
    p = R.shape[1]
    energy = np.real(np.trace(R, axis1=1, axis2=2))
    live = energy > 0
    filt = np.zeros(rhs.shape, dtype=complex)
    if live.any():
        lam = prewhitening * energy[live] / p
        A = R[live] + lam[:, None, None] * np.eye(p)
        try:
            filt[live] = np.linalg.solve(A, rhs[live][..., None])[..., 0]
        except np.linalg.LinAlgError as exc:
            raise np.linalg.LinAlgError(
                f"singular prediction normal equations (prewhitening={prewhitening}, "
                f"min diagonal energy={energy[live].min():.3g})") from exc
    return filt


def predict_slices(slices: np.ndarray, p: int, prewhitening: float) -> np.ndarray:
    """Average of forward and backward predictions for each slice row (F, N)."""
    n = slices.shape[1]
    Xf, yf = _design_system(slices, p, forward=True)
    Xb, yb = _design_system(slices, p, forward=False)
    af = _solve_filters(Xf, yf, prewhitening)
    ab = _solve_filters(Xb, yb, prewhitening)
    acc = np.zeros_like(slices)
    cnt = np.zeros(n)
    acc[:, p:] += np.einsum("fjk,fk->fj", Xf, af)
    cnt[p:] += 1
    acc[:, :n - p] += np.einsum("fjk,fk->fj", Xb, ab)
    cnt[:n - p] += 1
    return acc / cnt


def fx_decon(section, config: FxConfig | None = None, dt_s: float | None = None):
    """f-x deconvolution of a (samples x traces) section.

    Frequencies outside ``config.band_hz`` pass through unfiltered.
    """
    config = config or FxConfig()
    x = as_array(section)
    m, n = x.shape
    p = config.filter_length_traces
    if n < 2 * p + 1:
        raise ValueError(f"f-x deconvolution needs at least {2 * p + 1} traces, got {n}")
    if dt_s is None:
        dt_s = section.sample_interval if isinstance(section, SeismicSection) else 1.0

    L = config.window_length_samples
    ov = int(round(config.window_overlap * L))
    hop = L - ov
    # pad so every real sample sits where the window weights sum to one
    n_win = int(np.ceil((m + ov) / hop))
    total = (n_win - 1) * hop + L
    front = ov
    padded = np.zeros((total + ov, n))
    padded[front:front + m] = x
    w = taper_window(L, ov)

    freqs = np.fft.rfftfreq(L, dt_s)
    if config.band_hz is None:
        sel = np.ones(freqs.shape, bool)
    else:
        sel = (freqs >= config.band_hz[0]) & (freqs <= config.band_hz[1])

    out = np.zeros_like(padded)
    wsum = np.zeros(padded.shape[0])
    for start in range(0, padded.shape[0] - L + 1, hop):
        seg = padded[start:start + L] * w[:, None]
        spec = np.fft.rfft(seg, axis=0)
        if sel.any():
            spec[sel] = predict_slices(spec[sel], p, config.prewhitening)
        out[start:start + L] += np.fft.irfft(spec, n=L, axis=0)
        wsum[start:start + L] += w
    result = out[front:front + m] / wsum[front:front + m, None]
    if isinstance(section, SeismicSection):
        return section.with_data(result, f"fxdecon(window={L}, overlap={config.window_overlap!r}, "
                                         f"filter={p}, prewhitening={config.prewhitening!r}, "
                                         f"band={config.band_hz})")
    return result
