"""Self-supervised random-noise attenuation for 2D seismic sections."""

__version__ = "0.1.0"

from .clip import BandDecomposition, ClipSchedule, clip, clip_denoise, decompose, default_schedule
from .errors import (ChecksumError, ConfigError, DegenerateAmplitudeError, DivergenceError,
                     GridFormatError, InfiniteSNRError, MaskOverlapError, N2NSeismicError)
from .fx import FxConfig, fx_decon
from .grid import BinaryMask, SeismicSection, denormalize, normalize, stats
from .metrics import EvalReport, corrcoef, evaluate, mse, phase_band_corr, phase_spectrum, snr
from .synthgen import NoiseSpec, WedgeConfig, add_noise, make_wedge, procedural_textures

__all__ = [
    "SeismicSection", "BinaryMask", "normalize", "denormalize", "stats",
    "NoiseSpec", "WedgeConfig", "make_wedge", "add_noise", "procedural_textures",
    "ClipSchedule", "BandDecomposition", "clip", "decompose", "clip_denoise", "default_schedule",
    "FxConfig", "fx_decon",
    "EvalReport", "mse", "snr", "corrcoef", "phase_spectrum", "phase_band_corr", "evaluate",
    "N2NSeismicError", "DegenerateAmplitudeError", "MaskOverlapError", "InfiniteSNRError",
    "DivergenceError", "GridFormatError", "ChecksumError", "ConfigError",
]
