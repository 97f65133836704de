"""Residual convolutional denoiser: parameters, forward pass, gradients and Adam.

Architecture::

    x -> head conv(1->F) -> [residual unit] * R -> tail conv(F->1) -> (+ x)

    residual unit: h -> h + BN(conv(PReLU(BN(conv(h)))))

Weights are float32 by default. The global skip is added in the precision of
the input, so a network whose tail outputs exact zeros reproduces its input
bit-for-bit.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, asdict, fields

import numpy as np

from ..errors import DivergenceError
from . import layers

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8
BN_MOMENTUM = 0.9


@dataclass(frozen=True)
class DenoiserConfig:
    """Network and training hyper-parameters.

    Defaults for learning rate, feature dimension, residual units and steps per
    epoch are the reference settings. A learning rate of 0.01 is aggressive for
    Adam; 1e-3 to 1e-4 are the practical fallbacks if training diverges.
    """

    feature_dim: int = 64
    n_residual_units: int = 16
    learning_rate: float = 0.01
    steps_per_epoch: int = 1000
    batch_size: int = 16
    patch_size: int = 64
    early_stop_patience_epochs: int = 5
    seed: int = 0
    max_epochs: int = 50
    global_skip: bool = True
    sigma_min: float = 0.02
    sigma_max: float = 0.3
    n_validation_patches: int = 64
    tile_size: int = 256
    tile_overlap: int = 16

    def __post_init__(self):
        for name in ("feature_dim", "n_residual_units", "steps_per_epoch", "batch_size",
                     "patch_size", "max_epochs", "n_validation_patches", "tile_size"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be >= 0")
        if self.early_stop_patience_epochs < 0:
            raise ValueError("early_stop_patience_epochs must be >= 0")
        if self.patch_size < 8:
            raise ValueError("patch_size must be >= 8")
        if not 0 <= self.sigma_min <= self.sigma_max:
            raise ValueError("need 0 <= sigma_min <= sigma_max")
        if not 0 <= self.tile_overlap < self.tile_size // 2:
            raise ValueError("tile_overlap must be in [0, tile_size/2)")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "DenoiserConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown model config keys: {sorted(unknown)}")
        return cls(**d)


def parameter_shapes(config: DenoiserConfig) -> dict[str, tuple[int, ...]]:
    """Trainable tensor shapes, fully determined by the config."""
    f = config.feature_dim
    shapes = {"head.w": (3, 3, 1, f), "head.b": (f,)}
    for i in range(config.n_residual_units):
        u = f"units.{i}."
        shapes[u + "conv1.w"] = (3, 3, f, f)
        shapes[u + "bn1.gamma"] = (f,)
        shapes[u + "bn1.beta"] = (f,)
        shapes[u + "prelu.a"] = (1,)
        shapes[u + "conv2.w"] = (3, 3, f, f)
        shapes[u + "bn2.gamma"] = (f,)
        shapes[u + "bn2.beta"] = (f,)
    shapes["tail.w"] = (3, 3, f, 1)
    shapes["tail.b"] = (1,)
    return shapes


def buffer_shapes(config: DenoiserConfig) -> dict[str, tuple[int, ...]]:
    f = config.feature_dim
    shapes = {}
    for i in range(config.n_residual_units):
        for bn in ("bn1", "bn2"):
            shapes[f"units.{i}.{bn}.running_mean"] = (f,)
            shapes[f"units.{i}.{bn}.running_var"] = (f,)
    return shapes


class DenoiserModel:
    """Parameters, batch-norm buffers and optimizer state of one denoiser.

    ``epoch``, ``best_val_mse`` and ``epochs_since_best`` carry the early
    stopping state so that a saved model can resume training exactly.
    """

    def __init__(self, config: DenoiserConfig, params, buffers, adam_m=None, adam_v=None,
                 step: int = 0, epoch: int = 0, best_val_mse: float = float("inf"),
                 epochs_since_best: int = 0):
        self.config = config
        self.params = dict(params)
        self.buffers = dict(buffers)
        self.adam_m = dict(adam_m) if adam_m is not None else {k: np.zeros_like(v) for k, v in self.params.items()}
        self.adam_v = dict(adam_v) if adam_v is not None else {k: np.zeros_like(v) for k, v in self.params.items()}
        self.step = int(step)
        self.epoch = int(epoch)
        self.best_val_mse = float(best_val_mse)
        self.epochs_since_best = int(epochs_since_best)
        self.validate()

    @classmethod
    def create(cls, config: DenoiserConfig, dtype=np.float32) -> "DenoiserModel":
        """He-initialized model; the tail starts small so F(x) begins near x."""
        rng = np.random.default_rng(config.seed)
        params = {}
        for name, shape in parameter_shapes(config).items():
            if name.endswith(".w"):
                fan_in = shape[0] * shape[1] * shape[2]
                std = np.sqrt(2.0 / fan_in)
                if name.startswith("tail"):
                    std *= 0.1
                params[name] = (rng.standard_normal(shape) * std).astype(dtype)
            elif name.endswith(".gamma"):
                params[name] = np.ones(shape, dtype)
            elif name.endswith(".a"):
                params[name] = np.full(shape, 0.25, dtype)
            else:
                params[name] = np.zeros(shape, dtype)
        return cls(config, params, _initial_buffers(config, dtype))

    @classmethod
    def zero_residual(cls, config: DenoiserConfig, dtype=np.float32) -> "DenoiserModel":
        """Model whose residual branch and tail are all zero, so forward(x) == x."""
        model = cls.create(config, dtype)
        for name, p in model.params.items():
            if name.endswith(".gamma") or name.endswith(".a"):
                continue
            p[...] = 0
        return model

    def validate(self):
        expected = parameter_shapes(self.config)
        if set(expected) != set(self.params):
            missing = sorted(set(expected) - set(self.params))
            extra = sorted(set(self.params) - set(expected))
            raise ValueError(f"parameter set mismatch (missing={missing}, extra={extra})")
        for name, shape in expected.items():
            if self.params[name].shape != shape:
                raise ValueError(f"{name}: shape {self.params[name].shape} != expected {shape}")
        for name, shape in buffer_shapes(self.config).items():
            if name not in self.buffers or self.buffers[name].shape != shape:
                raise ValueError(f"buffer {name} missing or misshapen")
        for name, arr in {**self.params, **self.buffers}.items():
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} contains non-finite values")
        for name, arr in self.buffers.items():
            if name.endswith("running_var") and np.any(arr <= 0):
                raise ValueError(f"{name} must be strictly positive")

    @property
    def dtype(self):
        return self.params["head.w"].dtype

    def copy(self) -> "DenoiserModel":
        return copy.deepcopy(self)

    def astype(self, dtype) -> "DenoiserModel":
        def conv(d):
            return {k: v.astype(dtype) for k, v in d.items()}
        return DenoiserModel(self.config, conv(self.params), conv(self.buffers),
                             conv(self.adam_m), conv(self.adam_v), self.step, self.epoch,
                             self.best_val_mse, self.epochs_since_best)

    def n_parameters(self) -> int:
        return sum(p.size for p in self.params.values())


def _initial_buffers(config, dtype):
    return {name: (np.zeros(shape, dtype) if name.endswith("running_mean") else np.ones(shape, dtype))
            for name, shape in buffer_shapes(config).items()}


def _as_batch(batch) -> np.ndarray:
    x = np.asarray(batch)
    if x.ndim == 2:
        x = x[None]
    if x.ndim != 3:
        raise ValueError(f"expected patches of shape (B, H, W) or (H, W), got {x.shape}")
    if x.shape[1] < 1 or x.shape[2] < 1:
        raise ValueError("empty patch")
    if not np.all(np.isfinite(x)):
        raise ValueError("non-finite input to the denoiser")
    return x


def _run(model: DenoiserModel, x: np.ndarray, train: bool, keep_cache: bool):
    """Residual branch on (B, H, W) input; returns (branch, caches)."""
    p, buf = model.params, model.buffers
    h = x.astype(model.dtype)[..., None]
    caches = {}

    h, c = layers.conv3x3_forward(h, p["head.w"], p["head.b"], keep_cache)
    caches["head"] = c
    for i in range(model.config.n_residual_units):
        u = f"units.{i}."
        z, c1 = layers.conv3x3_forward(h, p[u + "conv1.w"], keep_cache=keep_cache)
        z, b1 = layers.batchnorm_forward(z, p[u + "bn1.gamma"], p[u + "bn1.beta"],
                                         buf[u + "bn1.running_mean"], buf[u + "bn1.running_var"], train)
        z, a1 = layers.prelu_forward(z, p[u + "prelu.a"])
        z, c2 = layers.conv3x3_forward(z, p[u + "conv2.w"], keep_cache=keep_cache)
        z, b2 = layers.batchnorm_forward(z, p[u + "bn2.gamma"], p[u + "bn2.beta"],
                                         buf[u + "bn2.running_mean"], buf[u + "bn2.running_var"], train)
        h = h + z
        if keep_cache:
            caches[u] = (c1, b1, a1, c2, b2)
    out, c = layers.conv3x3_forward(h, p["tail.w"], p["tail.b"], keep_cache)
    caches["tail"] = c
    return out[..., 0], caches


def forward(model: DenoiserModel, batch, mode: str = "infer") -> np.ndarray:
    """Denoise a batch of patches (B, H, W); a single (H, W) patch also works.

    ``mode="train"`` normalizes with batch statistics, ``"infer"`` with the
    running statistics. Output shape equals input shape.
    """
    if mode not in ("train", "infer"):
        raise ValueError(f"mode must be 'train' or 'infer', got {mode!r}")
    single = np.ndim(batch) == 2
    x = _as_batch(batch)
    branch, _ = _run(model, x, mode == "train", keep_cache=False)
    out = x + branch if model.config.global_skip else branch
    return out[0] if single else out


def loss(pred, target) -> float:
    """Sum of squared differences per patch, averaged over the batch."""
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ValueError(f"shape mismatch: {pred.shape} vs {target.shape}")
    if pred.ndim == 2:
        pred, target = pred[None], target[None]
    return float(np.sum((pred - target) ** 2) / pred.shape[0])


def gradients(model: DenoiserModel, batch_in, batch_target):
    """Train-mode loss and reverse-mode gradients for every trainable tensor.

    Returns ``(loss, grads, batch_stats)`` where ``batch_stats`` maps each
    batch-norm prefix to its (mean, var) for the running-stat update.
    """
    x = _as_batch(batch_in)
    t = _as_batch(batch_target)
    if x.shape != t.shape:
        raise ValueError(f"shape mismatch: {x.shape} vs {t.shape}")
    p = model.params
    branch, caches = _run(model, x, train=True, keep_cache=True)
    pred = x + branch if model.config.global_skip else branch
    value = loss(pred, t)

    dt = model.dtype
    dpred = (2.0 / x.shape[0]) * (pred - t)
    dh = dpred.astype(dt)[..., None]
    grads, stats = {}, {}
    dh, grads["tail.w"], grads["tail.b"] = layers.conv3x3_backward(dh, caches["tail"])
    for i in reversed(range(model.config.n_residual_units)):
        u = f"units.{i}."
        c1, b1, a1, c2, b2 = caches[u]
        stats[u + "bn1"] = b1[3:5]
        stats[u + "bn2"] = b2[3:5]
        dz, grads[u + "bn2.gamma"], grads[u + "bn2.beta"] = layers.batchnorm_backward(dh, b2)
        dz, grads[u + "conv2.w"], _ = layers.conv3x3_backward(dz, c2)
        dz, grads[u + "prelu.a"] = layers.prelu_backward(dz, a1)
        dz, grads[u + "bn1.gamma"], grads[u + "bn1.beta"] = layers.batchnorm_backward(dz, b1)
        dz, grads[u + "conv1.w"], _ = layers.conv3x3_backward(dz, c1)
        dh = dh + dz
    _, grads["head.w"], grads["head.b"] = layers.conv3x3_backward(dh, caches["head"])
    grads = {k: g.astype(p[k].dtype, copy=False) for k, g in grads.items()}
    return value, grads, stats


def adam_update(model: DenoiserModel, grads: dict, learning_rate: float | None = None):
    """One Adam step (beta1=0.9, beta2=0.999, eps=1e-8) applied in place."""
    lr = model.config.learning_rate if learning_rate is None else learning_rate
    model.step += 1
    t = model.step
    bc1 = 1.0 - ADAM_BETA1 ** t
    bc2 = 1.0 - ADAM_BETA2 ** t
    for name, g in grads.items():
        m = model.adam_m[name]
        v = model.adam_v[name]
        m *= ADAM_BETA1
        m += (1.0 - ADAM_BETA1) * g
        v *= ADAM_BETA2
        v += (1.0 - ADAM_BETA2) * g * g
        update = (m / bc1) / (np.sqrt(v / bc2) + ADAM_EPS)
        model.params[name] -= (lr * update).astype(model.params[name].dtype)


def backward_and_step(model: DenoiserModel, batch_in, batch_target) -> float:
    """Compute gradients, fold batch statistics into the running estimates and
    take one Adam step. Mutates ``model``; returns the pre-update loss.

    Raises DivergenceError (leaving the model untouched) if the loss or any
    gradient is non-finite.
    """
    value, grads, stats = gradients(model, batch_in, batch_target)
    if not np.isfinite(value) or not all(np.all(np.isfinite(g)) for g in grads.values()):
        raise DivergenceError(f"divergence at step {model.step + 1}: non-finite loss or gradient",
                              model=model, step=model.step + 1)
    n = np.prod(_as_batch(batch_in).shape)
    for prefix, (mean, var) in stats.items():
        rm = model.buffers[prefix + ".running_mean"]
        rv = model.buffers[prefix + ".running_var"]
        unbiased = var * (n / max(n - 1, 1))
        rm *= BN_MOMENTUM
        rm += (1.0 - BN_MOMENTUM) * mean
        rv *= BN_MOMENTUM
        rv += (1.0 - BN_MOMENTUM) * unbiased
    adam_update(model, grads)
    return value
