"""Central finite-difference gradient check for the denoiser.

The oracle uses loss evaluations only. PReLU is not differentiable at zero,
so a stencil that moves any pre-activation across zero measures a secant of
a kinked function rather than the derivative. For those elements the step is
shrunk (by 10x, down to ``min_step``) until the stencil no longer crosses a
kink. ``GradCheckResult.n_shrunk`` reports how often that happened.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import DenoiserModel, _as_batch, _run, forward, gradients, loss


@dataclass
class GradCheckResult:
    max_rel_error: float
    per_tensor: dict[str, float]
    n_checked: int
    n_shrunk: int

    def passed(self, tol: float = 1e-3) -> bool:
        return self.max_rel_error < tol


def _prelu_signs(model, x):
    _, caches = _run(model, x, train=True, keep_cache=True)
    return [caches[f"units.{i}."][2][1] for i in range(model.config.n_residual_units)]


def _same_signs(a, b):
    return all(np.array_equal(p, q) for p, q in zip(a, b))


def check_gradients(model: DenoiserModel, batch_in, batch_target, step: float = 1e-3,
                    min_step: float = 1e-7, floor: float = 1e-6) -> GradCheckResult:
    """Compare analytic gradients with central differences on a float64 copy.

    Relative error per element is ``|a - n| / max(|a|, |n|, floor)``.
    """
    m = model.astype(np.float64)
    x = _as_batch(batch_in).astype(np.float64)
    t = _as_batch(batch_target).astype(np.float64)
    _, grads, _ = gradients(m, x, t)
    base = _prelu_signs(m, x)

    def f(p, idx, value):
        p[idx] = value
        out = loss(forward(m, x, "train"), t)
        return out, _prelu_signs(m, x)

    per_tensor, n_checked, n_shrunk = {}, 0, 0
    for name, p in m.params.items():
        worst = 0.0
        for idx in np.ndindex(p.shape):
            old = p[idx]
            h = step
            while True:
                lp, sp = f(p, idx, old + h)
                lm, sm = f(p, idx, old - h)
                if (_same_signs(sp, base) and _same_signs(sm, base)) or h <= min_step:
                    break
                h /= 10.0
            p[idx] = old
            if h < step:
                n_shrunk += 1
            num = (lp - lm) / (2.0 * h)
            ana = grads[name][idx]
            worst = max(worst, abs(ana - num) / max(abs(ana), abs(num), floor))
            n_checked += 1
        per_tensor[name] = worst
    return GradCheckResult(max(per_tensor.values()), per_tensor, n_checked, n_shrunk)
