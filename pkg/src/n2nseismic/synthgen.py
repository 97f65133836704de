"""Synthetic data: wedge model, Gaussian noise injection and noisy training pairs."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import SeismicSection, as_array


@dataclass(frozen=True)
class NoiseSpec:
    """Gaussian noise N(mean, sigma) applied from ``region_start_row`` down."""

    mean: float = 0.0
    sigma: float = 0.0
    seed: int = 0
    region_start_row: int = 0

    def __post_init__(self):
        if not self.sigma >= 0:
            raise ValueError(f"sigma must be >= 0, got {self.sigma}")
        if self.region_start_row < 0:
            raise ValueError("region_start_row must be >= 0")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")

    def describe(self) -> str:
        return (f"corrupt(mean={self.mean!r}, sigma={self.sigma!r}, seed={self.seed}, "
                f"from_row={self.region_start_row})")


@dataclass(frozen=True)
class WedgeConfig:
    """Two-reflector wedge geometry.

    The defaults give a dip of exactly one sample per trace, so the bottom
    reflector is a true linear event.
    """

    n_samples: int = 200
    n_traces: int = 51
    top_reflector_row: int = 70
    wedge_apex_trace: int = 0
    max_thickness_rows: int = 50
    wavelet_peak_frequency: float = 30.0
    sample_interval_s: float = 0.002

    def __post_init__(self):
        if self.n_samples < 1 or self.n_traces < 1:
            raise ValueError("wedge grid must have at least one sample and one trace")
        if not 0 < self.top_reflector_row < self.n_samples:
            raise ValueError("top_reflector_row must lie strictly inside the grid")
        if self.max_thickness_rows < 0:
            raise ValueError("max_thickness_rows must be >= 0")
        if self.top_reflector_row + self.max_thickness_rows >= self.n_samples:
            raise ValueError("bottom reflector falls outside the grid")
        if not 0 <= self.wedge_apex_trace < self.n_traces:
            raise ValueError("wedge_apex_trace out of range")
        if self.wavelet_peak_frequency <= 0 or self.sample_interval_s <= 0:
            raise ValueError("wavelet frequency and sample interval must be positive")


@dataclass
class NoisePairBatch:
    """Noise2Noise training pairs ``(s + n, s + n')`` stacked as (count, p, p).

    ``clean`` keeps the normalized source patches; training never looks at
    them, validation does.
    """

    inputs: np.ndarray
    targets: np.ndarray
    patch_size: int
    clean: np.ndarray | None = None
    sigmas: np.ndarray | None = None

    def __len__(self):
        return len(self.inputs)


def ricker(peak_frequency: float, dt: float, half_width: float | None = None):
    """Zero-phase Ricker wavelet sampled at ``dt``, truncated at |tau| <= 1.5/f.

    Returns ``(tau, amplitude)`` with the peak at the centre sample.
    """
    if half_width is None:
        half_width = 1.5 / peak_frequency
    n_half = int(np.floor(half_width / dt + 1e-9))
    tau = np.arange(-n_half, n_half + 1) * dt
    arg = (np.pi * peak_frequency * tau) ** 2
    return tau, (1.0 - 2.0 * arg) * np.exp(-arg)


def wedge_reflectivity(config: WedgeConfig) -> np.ndarray:
    """Two-spike reflectivity grid: +1 flat top, -1 dipping base."""
    m, n = config.n_samples, config.n_traces
    refl = np.zeros((m, n))
    apex = config.wedge_apex_trace
    span = max(n - 1 - apex, 1)
    top = config.top_reflector_row
    for j in range(n):
        frac = max(j - apex, 0) / span
        offset = int(np.rint(config.max_thickness_rows * frac))
        refl[top, j] += 1.0
        refl[top + offset, j] -= 1.0
    return refl


def make_wedge(config: WedgeConfig | None = None) -> SeismicSection:
    """Clean wedge seismogram normalized to [-1, 1].

    Every trace is its reflectivity convolved with a Ricker wavelet. A
    zero-thickness wedge cancels to all zeros and is returned unscaled.
    """
    config = config or WedgeConfig()
    _, wavelet = ricker(config.wavelet_peak_frequency, config.sample_interval_s)
    if len(wavelet) > config.n_samples:
        raise ValueError(
            f"wavelet ({len(wavelet)} samples) is longer than the trace ({config.n_samples} samples)")
    refl = wedge_reflectivity(config)
    data = np.stack([np.convolve(refl[:, j], wavelet, mode="same") for j in range(config.n_traces)],
                    axis=1)
    peak = np.max(np.abs(data))
    if peak > 0:
        data = data / peak
    stage = ("wedge-gen(" + ", ".join(f"{k}={v!r}" for k, v in vars(config).items()) + ")")
    return SeismicSection(data, sample_interval=config.sample_interval_s, axis_unit="time",
                          provenance=stage)


def add_noise(section, spec: NoiseSpec):
    """Add seeded i.i.d. Gaussian noise to rows ``>= spec.region_start_row``.

    Rows above the region are returned bit-identical. Accepts a section (and
    returns one with the noise spec appended to its provenance) or a bare array.
    """
    x = as_array(section)
    if spec.region_start_row >= x.shape[0]:
        raise ValueError("region_start_row must be smaller than the number of samples")
    out = x.copy()
    if spec.sigma > 0 or spec.mean != 0:
        rng = np.random.default_rng(spec.seed)
        region = out[spec.region_start_row:]
        region += rng.normal(spec.mean, spec.sigma, size=region.shape)
    if isinstance(section, SeismicSection):
        return section.with_data(out, spec.describe())
    return out


def _normalize_patch(patch: np.ndarray) -> np.ndarray:
    peak = np.max(np.abs(patch))
    return patch / peak if peak > 0 else patch.copy()


def sample_noise_pairs(corpus, patch_size: int, count: int,
                       sigma_range=(0.0, 0.1), seed: int = 0) -> NoisePairBatch:
    """Draw ``count`` random patches and corrupt each twice independently.

    Items are chosen uniformly, then a uniform position inside the item. Each
    patch is normalized to [-1, 1] before noise with a per-patch sigma drawn
    uniformly from ``sigma_range``.
    """
    items = [as_array(c) for c in corpus]
    if not items:
        raise ValueError("empty corpus")
    lo, hi = map(float, sigma_range)
    if lo < 0 or hi < lo:
        raise ValueError(f"invalid sigma_range {sigma_range}")
    p = int(patch_size)
    smallest = min(min(it.shape[:2]) for it in items)
    if p > smallest:
        raise ValueError(f"patch_size {p} larger than smallest corpus item ({smallest})")

    rng = np.random.default_rng(seed)
    clean = np.empty((count, p, p))
    for k in range(count):
        item = items[rng.integers(len(items))]
        r = rng.integers(item.shape[0] - p + 1)
        c = rng.integers(item.shape[1] - p + 1)
        clean[k] = _normalize_patch(item[r:r + p, c:c + p])
    sigmas = rng.uniform(lo, hi, size=count)
    n1 = rng.standard_normal((count, p, p)) * sigmas[:, None, None]
    n2 = rng.standard_normal((count, p, p)) * sigmas[:, None, None]
    return NoisePairBatch(inputs=clean + n1, targets=clean + n2, patch_size=p,
                          clean=clean, sigmas=sigmas)


def procedural_textures(count: int, size: int = 128, seed: int = 0,
                        saturated_fraction: float = 0.0) -> list[np.ndarray]:
    """Band-limited random fields standing in for a natural-image corpus.

    Each image is white noise shaped by a random oriented band-pass filter,
    optionally gated by a smooth envelope so that quiet regions appear next
    to busy ones. A ``saturated_fraction`` of the images is hard-clipped at a
    random level, the way over-exposed photographs are. Values are scaled to
    [-1, 1].
    """
    rng = np.random.default_rng(seed)
    ky = np.fft.fftfreq(size)[:, None]
    kx = np.fft.rfftfreq(size)[None, :]
    images = []
    for _ in range(count):
        theta = rng.uniform(0, np.pi)
        # along-dip and cross-dip spatial frequencies
        u = kx * np.cos(theta) + ky * np.sin(theta)
        v = -kx * np.sin(theta) + ky * np.cos(theta)
        f0 = rng.uniform(0.02, 0.2)
        width = rng.uniform(0.3, 1.0) * f0 + 0.01
        aniso = rng.uniform(0.005, 0.08)
        filt = (np.exp(-((np.abs(u) - f0) / width) ** 2)
                * np.exp(-(v / aniso) ** 2))
        filt = filt + rng.uniform(0.0, 0.3) * np.exp(-(kx ** 2 + ky ** 2) / 0.02 ** 2)
        spec = np.fft.rfft2(rng.standard_normal((size, size))) * filt
        img = np.fft.irfft2(spec, s=(size, size))
        if rng.random() < 0.6:
            env_spec = np.fft.rfft2(rng.standard_normal((size, size)))
            env_spec *= np.exp(-(kx ** 2 + ky ** 2) / 0.015 ** 2)
            env = np.fft.irfft2(env_spec, s=(size, size))
            env /= np.std(env) + 1e-12
            img = img / (1.0 + np.exp(-4.0 * (env - rng.uniform(-0.5, 1.0))))
        img /= np.max(np.abs(img)) + 1e-12
        if rng.random() < saturated_fraction:
            level = rng.uniform(0.3, 0.8)
            img = np.clip(img, -level, level) / level
        images.append(img)
    return images
