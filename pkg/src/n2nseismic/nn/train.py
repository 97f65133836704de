"""Noise2Noise training loop and full-section inference."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from ..errors import DivergenceError
from ..grid import SeismicSection, as_array
from ..synthgen import sample_noise_pairs
from .model import DenoiserConfig, DenoiserModel, backward_and_step, forward

log = logging.getLogger(__name__)

ARCH_FIELDS = ("feature_dim", "n_residual_units", "global_skip")
VALIDATION_SEED_OFFSET = 7919


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    val_mse: float
    wall_time_s: float


@dataclass
class TrainingLog:
    records: list[EpochRecord] = field(default_factory=list)
    termination_reason: str = "max_epochs"
    identity_val_mse: float = float("nan")
    best_epoch: int = 0

    @property
    def best_val_mse(self) -> float:
        return min((r.val_mse for r in self.records), default=float("inf"))


def split_corpus(corpus, validation_fraction: float = 50 / 350):
    """Hold out the trailing items for validation (at least one when possible).

    A single-item corpus is shared; its validation pairs still use held-out
    positions and noise draws.
    """
    items = list(corpus)
    if len(items) < 2:
        return items, items
    n_val = max(1, int(round(len(items) * validation_fraction)))
    n_val = min(n_val, len(items) - 1)
    return items[:-n_val], items[-n_val:]


def validation_set(items, config: DenoiserConfig):
    return sample_noise_pairs(items, config.patch_size, config.n_validation_patches,
                              (config.sigma_min, config.sigma_max),
                              seed=[config.seed, VALIDATION_SEED_OFFSET])


def validation_mse(model: DenoiserModel, val) -> float:
    """Per-pixel MSE of infer-mode predictions against the clean patches."""
    pred = forward(model, val.inputs, "infer")
    return float(np.mean((pred - val.clean) ** 2))


def train(model: DenoiserModel, corpus, config: DenoiserConfig | None = None,
          validation=None, progress=None):
    """Train ``model`` on Noise2Noise pairs drawn from ``corpus``.

    Each epoch runs ``steps_per_epoch`` Adam steps on fresh batches seeded by
    ``(seed, epoch, step)``, so a model saved after epoch k resumes into the
    exact epoch k+1 an uninterrupted run would have produced. Training stops
    after ``early_stop_patience_epochs`` epochs without a validation
    improvement, or at ``max_epochs``. The model is mutated in place; the
    best-validation snapshot is returned together with the log.
    """
    if config is not None:
        for name in ARCH_FIELDS:
            if getattr(config, name) != getattr(model.config, name):
                raise ValueError(f"config {name}={getattr(config, name)} does not match the model")
        model.config = config
    config = model.config
    if validation is None:
        train_items, val_items = split_corpus(corpus)
    else:
        train_items, val_items = list(corpus), list(validation)
    if not train_items:
        raise ValueError("empty corpus")

    val = validation_set(val_items, config)
    run_log = TrainingLog(identity_val_mse=float(np.mean((val.inputs - val.clean) ** 2)))
    best = model.copy()
    sigma_range = (config.sigma_min, config.sigma_max)

    while model.epoch < config.max_epochs:
        epoch = model.epoch + 1
        t0 = time.perf_counter()
        total = 0.0
        for step in range(config.steps_per_epoch):
            batch = sample_noise_pairs(train_items, config.patch_size, config.batch_size,
                                       sigma_range, seed=[config.seed, epoch, step])
            try:
                total += backward_and_step(model, batch.inputs, batch.targets)
            except DivergenceError as exc:
                exc.args = (f"{exc.args[0]} (epoch {epoch}); try a smaller learning_rate",)
                raise
        val_mse = validation_mse(model, val)
        model.epoch = epoch
        if val_mse < model.best_val_mse:
            model.best_val_mse = val_mse
            model.epochs_since_best = 0
            best = model.copy()
            run_log.best_epoch = epoch
        else:
            model.epochs_since_best += 1
        record = EpochRecord(epoch, total / config.steps_per_epoch, val_mse, time.perf_counter() - t0)
        run_log.records.append(record)
        log.info("epoch %d: train loss %.6g, val mse %.6g (identity %.6g)",
                 epoch, record.train_loss, val_mse, run_log.identity_val_mse)
        if progress is not None:
            progress(record)
        if model.epochs_since_best > config.early_stop_patience_epochs:
            run_log.termination_reason = "converged"
            break
    else:
        run_log.termination_reason = "max_epochs"
    if not run_log.records:
        run_log.termination_reason = "max_epochs"
    return best, run_log


def _tile_starts(length: int, tile: int, overlap: int) -> list[int]:
    if length <= tile:
        return [0]
    hop = tile - overlap
    starts = list(range(0, length - tile, hop))
    starts.append(length - tile)
    return starts


def denoise_image(model: DenoiserModel, section, tile_size: int | None = None,
                  tile_overlap: int | None = None):
    """Infer-mode denoising of a whole section (values expected in [-1, 1]).

    Sections larger than ``tile_size`` are processed in overlapping tiles and
    the overlaps averaged. The average is accumulated incrementally, so tiles
    that agree on a cell reproduce that value exactly.
    """
    tile = tile_size or model.config.tile_size
    overlap = model.config.tile_overlap if tile_overlap is None else tile_overlap
    x = as_array(section)
    m, n = x.shape
    if m <= tile and n <= tile:
        out = forward(model, x, "infer")
    else:
        out = np.zeros_like(x)
        count = np.zeros_like(x)
        for r in _tile_starts(m, tile, overlap):
            for c in _tile_starts(n, tile, overlap):
                win = (slice(r, r + tile), slice(c, c + tile))
                pred = forward(model, x[win], "infer")
                count[win] += 1
                out[win] += (pred - out[win]) / count[win]
    if isinstance(section, SeismicSection):
        return section.with_data(out, "denoise_image")
    return out

