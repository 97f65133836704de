import numpy as np
import pytest

from n2nseismic.errors import DivergenceError
from n2nseismic.nn import layers
from n2nseismic.nn.model import (DenoiserConfig, DenoiserModel, backward_and_step, forward,
                                 gradients, loss, parameter_shapes)
from n2nseismic.nn.train import _tile_starts, denoise_image, split_corpus, train
from n2nseismic.synthgen import procedural_textures, sample_noise_pairs

TINY = DenoiserConfig(feature_dim=8, n_residual_units=2, learning_rate=1e-3, steps_per_epoch=3,
                      batch_size=4, patch_size=8, max_epochs=2, n_validation_patches=8, seed=3)


def tiny_batch(seed=0, size=8, count=4):
    corpus = procedural_textures(2, 32, seed=seed)
    b = sample_noise_pairs(corpus, size, count, (0.05, 0.1), seed=seed)
    return b.inputs, b.targets


def direct_conv(x, w, b):
    """Zero-padded 3x3 cross-correlation by explicit loops, (H, W, Cin) input."""
    H, W, _ = x.shape
    out = np.zeros((H, W, w.shape[3]))
    for i in range(H):
        for j in range(W):
            for dy in range(3):
                for dx in range(3):
                    r, c = i + dy - 1, j + dx - 1
                    if 0 <= r < H and 0 <= c < W:
                        out[i, j] += x[r, c] @ w[dy, dx]
    return out + b


def numeric_grad(f, arr, h=1e-6):
    g = np.zeros_like(arr)
    it = np.nditer(arr, flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        old = arr[idx]
        arr[idx] = old + h
        fp = f()
        arr[idx] = old - h
        fm = f()
        arr[idx] = old
        g[idx] = (fp - fm) / (2 * h)
    return g


class TestLayers:
    def test_conv_matches_direct_oracle(self, rng):
        x = rng.normal(size=(1, 5, 5, 3))
        w = rng.normal(size=(3, 3, 3, 2))
        b = rng.normal(size=2)
        for keep in (True, False):
            out, _ = layers.conv3x3_forward(x, w, b, keep_cache=keep)
            np.testing.assert_allclose(out[0], direct_conv(x[0], w, b), atol=1e-6)

    def test_conv_backward(self, rng):
        x = rng.normal(size=(2, 4, 5, 2))
        w = rng.normal(size=(3, 3, 2, 3))
        b = rng.normal(size=3)
        g = rng.normal(size=(2, 4, 5, 3))

        def f():
            return float(np.sum(layers.conv3x3_forward(x, w, b)[0] * g))

        _, cache = layers.conv3x3_forward(x, w, b)
        dx, dw, db = layers.conv3x3_backward(g, cache)
        np.testing.assert_allclose(dx, numeric_grad(f, x), rtol=1e-6, atol=1e-8)
        np.testing.assert_allclose(dw, numeric_grad(f, w), rtol=1e-6, atol=1e-8)
        np.testing.assert_allclose(db, numeric_grad(f, b), rtol=1e-6, atol=1e-8)

    def test_batchnorm_backward(self, rng):
        x = rng.normal(size=(3, 3, 2, 4))
        gamma, beta = rng.normal(size=4), rng.normal(size=4)
        g = rng.normal(size=x.shape)
        rm, rv = np.zeros(4), np.ones(4)

        def f():
            return float(np.sum(layers.batchnorm_forward(x, gamma, beta, rm, rv, True)[0] * g))

        _, cache = layers.batchnorm_forward(x, gamma, beta, rm, rv, True)
        dx, dg, dbeta = layers.batchnorm_backward(g, cache)
        np.testing.assert_allclose(dx, numeric_grad(f, x), rtol=1e-5, atol=1e-7)
        np.testing.assert_allclose(dg, numeric_grad(f, gamma), rtol=1e-6, atol=1e-8)
        np.testing.assert_allclose(dbeta, numeric_grad(f, beta), rtol=1e-6, atol=1e-8)

    def test_batchnorm_infer_uses_running_stats(self, rng):
        x = rng.normal(size=(2, 3, 3, 2))
        out, _ = layers.batchnorm_forward(x, np.ones(2), np.zeros(2), np.array([1.0, -1.0]),
                                          np.array([4.0, 1.0]), False)
        expected = (x - [1.0, -1.0]) / np.sqrt(np.array([4.0, 1.0]) + layers.BN_EPS)
        np.testing.assert_allclose(out, expected, rtol=1e-12)

    def test_prelu(self, rng):
        x = rng.normal(size=(2, 3, 3, 2))
        a = np.array([0.25])
        out, cache = layers.prelu_forward(x, a)
        np.testing.assert_array_equal(out, np.where(x > 0, x, 0.25 * x))
        g = rng.normal(size=x.shape)
        dx, da = layers.prelu_backward(g, cache)
        np.testing.assert_allclose(dx, np.where(x > 0, g, 0.25 * g))
        np.testing.assert_allclose(da, [np.sum(np.where(x > 0, 0, x) * g)])


class TestForward:
    def test_zero_residual_is_identity(self, rng):
        model = DenoiserModel.zero_residual(TINY)
        x = rng.uniform(-1, 1, size=(3, 12, 9))
        np.testing.assert_array_equal(forward(model, x), x)
        np.testing.assert_array_equal(forward(model, x, "train"), x)

    def test_shape_preserved(self, rng):
        model = DenoiserModel.create(TINY)
        for shape in [(1, 8, 8), (2, 13, 9), (10, 21)]:
            assert forward(model, rng.normal(size=shape)).shape == shape

    def test_input_validation(self):
        model = DenoiserModel.create(TINY)
        with pytest.raises(ValueError):
            forward(model, np.full((8, 8), np.nan))
        with pytest.raises(ValueError):
            forward(model, np.zeros((2, 2, 8, 8)))
        with pytest.raises(ValueError):
            forward(model, np.zeros((8, 8)), mode="eval")

    def test_interior_translation_consistency(self, rng):
        model = DenoiserModel.create(TINY)
        x = rng.uniform(-1, 1, size=(30, 30))
        n_conv = 2 + 2 * TINY.n_residual_units
        full = forward(model, x)
        r0, c0 = 7, 5
        crop = forward(model, x[r0:r0 + 16, c0:c0 + 18])
        b = n_conv
        np.testing.assert_allclose(crop[b:-b, b:-b], full[r0 + b:r0 + 16 - b, c0 + b:c0 + 18 - b],
                                   rtol=1e-5, atol=1e-6)

    def test_infer_bit_identical(self, rng):
        model = DenoiserModel.create(TINY)
        x = rng.normal(size=(2, 10, 10))
        assert forward(model, x).tobytes() == forward(model, x).tobytes()

    def test_no_global_skip(self, rng):
        cfg = DenoiserConfig(**{**TINY.to_dict(), "global_skip": False})
        model = DenoiserModel.zero_residual(cfg)
        np.testing.assert_array_equal(forward(model, rng.normal(size=(8, 8))), 0.0)


class TestLoss:
    def test_equal_is_zero(self, rng):
        x = rng.normal(size=(2, 8, 8))
        assert loss(x, x) == 0.0

    def test_constant_difference(self):
        assert loss(np.full((6, 5), 0.1), np.zeros((6, 5))) == pytest.approx(0.01 * 30, rel=1e-12)

    def test_loop_oracle(self, rng):
        p, t = rng.normal(size=(2, 3, 7, 6))
        total = 0.0
        for b in range(3):
            for i in range(7):
                for j in range(6):
                    total += (p[b, i, j] - t[b, i, j]) ** 2
        assert loss(p, t) == pytest.approx(total / 3, rel=1e-10)

    def test_mismatch(self):
        with pytest.raises(ValueError):
            loss(np.zeros((2, 4, 4)), np.zeros((2, 4, 5)))


class TestModel:
    def test_shapes_from_config(self):
        model = DenoiserModel.create(TINY)
        for name, shape in parameter_shapes(TINY).items():
            assert model.params[name].shape == shape
            assert model.params[name].dtype == np.float32
        assert model.n_parameters() == 8 * 9 + 8 + 2 * (2 * 8 * 8 * 9 + 4 * 8 + 1) + 8 * 9 + 1

    def test_validate_catches_bad_tensors(self):
        model = DenoiserModel.create(TINY)
        model.params["head.w"] = np.zeros((3, 3, 1, 4), np.float32)
        with pytest.raises(ValueError):
            model.validate()
        model = DenoiserModel.create(TINY)
        model.buffers["units.0.bn1.running_var"][0] = 0.0
        with pytest.raises(ValueError):
            model.validate()

    def test_config_validation(self):
        with pytest.raises(ValueError):
            DenoiserConfig(patch_size=4)
        with pytest.raises(ValueError):
            DenoiserConfig(feature_dim=0)
        with pytest.raises(ValueError):
            DenoiserConfig.from_dict({"features": 3})


class TestStep:
    def test_zero_learning_rate_leaves_params(self):
        cfg = DenoiserConfig(**{**TINY.to_dict(), "learning_rate": 0.0})
        model = DenoiserModel.create(cfg)
        before = {k: v.copy() for k, v in model.params.items()}
        x, t = tiny_batch()
        backward_and_step(model, x, t)
        for k, v in model.params.items():
            assert v.tobytes() == before[k].tobytes(), k
        assert model.step == 1

    def test_deterministic_updates(self):
        a, b = DenoiserModel.create(TINY), DenoiserModel.create(TINY)
        x, t = tiny_batch()
        la, lb = backward_and_step(a, x, t), backward_and_step(b, x, t)
        assert la == lb
        for k in a.params:
            assert a.params[k].tobytes() == b.params[k].tobytes()

    def test_returns_pre_update_loss(self):
        model = DenoiserModel.create(TINY)
        x, t = tiny_batch()
        expected = loss(forward(model, x, "train"), t)
        assert backward_and_step(model, x, t) == pytest.approx(expected, rel=1e-6)

    def test_running_stats_move(self):
        model = DenoiserModel.create(TINY)
        x, t = tiny_batch()
        backward_and_step(model, x, t)
        assert not np.allclose(model.buffers["units.0.bn1.running_var"], 1.0)

    def test_loss_mostly_decreasing_on_fixed_batch(self):
        model = DenoiserModel.create(TINY)
        x, t = tiny_batch(size=16, count=8)
        losses = [backward_and_step(model, x, t) for _ in range(50)]
        ups = sum(b > a for a, b in zip(losses, losses[1:]))
        assert ups <= 5
        assert losses[-1] < losses[0]

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_divergence_raises(self):
        cfg = DenoiserConfig(**{**TINY.to_dict(), "learning_rate": 1e38})
        model = DenoiserModel.create(cfg)
        x, t = tiny_batch()
        with pytest.raises(DivergenceError) as info:
            for _ in range(10):
                backward_and_step(model, x, t)
        assert info.value.step >= 1 and info.value.model is model

    def test_gradient_dtype(self):
        model = DenoiserModel.create(TINY)
        _, grads, _ = gradients(model, *tiny_batch())
        assert all(g.dtype == np.float32 for g in grads.values())
        assert set(grads) == set(model.params)


class TestTrain:
    def corpus(self):
        return procedural_textures(6, 32, seed=1)

    def test_single_epoch(self):
        cfg = DenoiserConfig(**{**TINY.to_dict(), "max_epochs": 1, "early_stop_patience_epochs": 0})
        best, log = train(DenoiserModel.create(cfg), self.corpus(), cfg)
        assert len(log.records) == 1 and log.records[0].epoch == 1
        assert log.termination_reason == "max_epochs" and best.epoch == 1

    def test_early_stop(self):
        cfg = DenoiserConfig(**{**TINY.to_dict(), "learning_rate": 0.0, "max_epochs": 10,
                                "early_stop_patience_epochs": 1})
        _, log = train(DenoiserModel.create(cfg), self.corpus(), cfg)
        # the run ends patience + 1 epochs after the last improvement
        assert log.termination_reason == "converged"
        assert len(log.records) == log.best_epoch + 2
        best = min(r.val_mse for r in log.records)
        assert all(r.val_mse >= best for r in log.records[log.best_epoch:])

    def test_resume_matches_uninterrupted(self):
        cfg = TINY
        full = DenoiserModel.create(cfg)
        _, log_full = train(full, self.corpus(), cfg)

        part = DenoiserModel.create(cfg)
        one = DenoiserConfig(**{**cfg.to_dict(), "max_epochs": 1})
        train(part, self.corpus(), one)
        resumed = part.copy()
        _, log_rest = train(resumed, self.corpus(), cfg)
        assert [r.epoch for r in log_rest.records] == [2]
        assert log_rest.records[0].train_loss == log_full.records[1].train_loss
        for k in full.params:
            np.testing.assert_array_equal(resumed.params[k], full.params[k])

    def test_architecture_mismatch(self):
        other = DenoiserConfig(**{**TINY.to_dict(), "feature_dim": 4})
        with pytest.raises(ValueError):
            train(DenoiserModel.create(TINY), self.corpus(), other)

    def test_split(self):
        items = list(range(350))
        tr, va = split_corpus(items)
        assert len(tr) == 300 and len(va) == 50
        assert split_corpus([1]) == ([1], [1])


class TestDenoiseImage:
    def test_zero_residual(self, rng):
        model = DenoiserModel.zero_residual(TINY)
        x = rng.uniform(-1, 1, size=(40, 30))
        np.testing.assert_array_equal(denoise_image(model, x, tile_size=16, tile_overlap=4), x)

    def test_small_section_tiling_irrelevant(self, rng):
        model = DenoiserModel.create(TINY)
        x = rng.uniform(-1, 1, size=(20, 15))
        a = denoise_image(model, x, tile_size=64)
        b = forward(model, x)
        np.testing.assert_array_equal(a, b)

    def test_tiled_shape_and_interior(self, rng):
        model = DenoiserModel.create(TINY)
        x = rng.uniform(-1, 1, size=(70, 45))
        tiled = denoise_image(model, x, tile_size=32, tile_overlap=12)
        assert tiled.shape == x.shape
        assert np.all(np.isfinite(tiled))
        # a cell matches the full pass when every tile covering it keeps it
        # clear of that tile's artificial (non-section) edges by the receptive radius
        radius = 2 + 2 * TINY.n_residual_units
        safe = np.ones(x.shape, bool)
        for axis, length in enumerate(x.shape):
            ok = np.ones(length, bool)
            for s in _tile_starts(length, 32, 12):
                idx = np.arange(s, min(s + 32, length))
                lo = idx - s < radius if s > 0 else np.zeros(idx.size, bool)
                hi = s + 32 - 1 - idx < radius if s + 32 < length else np.zeros(idx.size, bool)
                ok[idx[lo | hi]] = False
            safe &= ok[:, None] if axis == 0 else ok[None, :]
        assert safe.sum() > 0
        np.testing.assert_allclose(tiled[safe], forward(model, x)[safe], rtol=1e-5, atol=1e-6)

    def test_section_provenance(self, wedge):
        out = denoise_image(DenoiserModel.zero_residual(TINY), wedge)
        assert out.provenance.endswith("denoise_image")
