import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from n2nseismic.clip import ClipSchedule, band_index, clip, clip_denoise, decompose, default_schedule
from n2nseismic.errors import DegenerateAmplitudeError
from n2nseismic.grid import SeismicSection


def brute_band(v, alphas):
    """Band of one cell by walking the thresholds (boundary goes low)."""
    a = abs(v)
    for k, alpha in enumerate(alphas):
        if a <= alpha:
            return k
    return len(alphas) - 1


def random_schedule(rng, peak):
    t = int(rng.integers(1, 7))
    alphas = np.sort(rng.uniform(0.05, 1.2, size=t) * peak)
    alphas = np.unique(alphas)
    return ClipSchedule(tuple(alphas))


class TestSchedule:
    def test_validation(self):
        for bad in [(), (0.5, 0.5), (1.0, 0.5), (-0.1, 1.0), (np.inf,)]:
            with pytest.raises(ValueError):
                ClipSchedule(bad)
        assert ClipSchedule([0.5, 1]).t == 2

    def test_default_five(self):
        np.testing.assert_allclose(default_schedule(np.array([[1.0, -0.3]]), 5).alphas,
                                   [0.2, 0.4, 0.6, 0.8, 1.0], rtol=1e-15)

    def test_default_two(self):
        assert default_schedule(np.array([[-1.0]]), 2).alphas == (0.5, 1.0)

    def test_default_one_and_scale(self):
        assert default_schedule(np.array([[3.0, -7.0]]), 1).alphas == (7.0,)
        assert default_schedule(np.array([[3.0, -7.0]]), 2).alphas == (3.5, 7.0)

    def test_default_errors(self):
        with pytest.raises(DegenerateAmplitudeError):
            default_schedule(np.zeros((3, 3)), 2)
        with pytest.raises(ValueError):
            default_schedule(np.ones((3, 3)), 0)


class TestClip:
    def test_piecewise_values(self):
        assert clip(np.array([1.5]), 1.0)[0] == 1.0
        assert clip(np.array([-0.7]), 0.5)[0] == -0.5
        assert clip(np.array([0.3]), 0.5)[0] == 0.3

    def test_large_alpha_is_identity(self, rng):
        x = rng.normal(size=(10, 4))
        np.testing.assert_array_equal(clip(x, np.max(np.abs(x))), x)

    def test_idempotent(self, rng):
        x = rng.normal(size=(10, 4))
        once = clip(x, 0.4)
        np.testing.assert_array_equal(clip(once, 0.4), once)

    def test_bad_alpha(self):
        with pytest.raises(ValueError):
            clip(np.ones((2, 2)), 0.0)

    def test_section_provenance(self, wedge):
        assert clip(wedge, 0.5).provenance.endswith("clip(alpha=0.5)")


class TestDecompose:
    def test_three_values(self):
        bands = decompose(np.array([[0.3, 0.7, 1.2]]), ClipSchedule((0.5, 1.0)))
        np.testing.assert_array_equal(bands.band_masks[0].data, [[1, 0, 0]])
        np.testing.assert_array_equal(bands.band_masks[1].data, [[0, 1, 1]])

    def test_boundary_goes_low(self):
        idx = band_index(np.array([[0.5, -0.5, 1.0, 0.0]]), ClipSchedule((0.5, 1.0)))
        np.testing.assert_array_equal(idx, [[0, 0, 1, 0]])

    def test_single_band(self, rng):
        bands = decompose(rng.normal(size=(6, 6)), ClipSchedule((0.1,)))
        np.testing.assert_array_equal(bands.band_masks[0].data, 1)

    def test_partition_against_oracle(self, rng):
        x = rng.uniform(-1, 1, size=(200, 51))
        sched = default_schedule(x, 5)
        bands = decompose(x, sched)
        np.testing.assert_array_equal(sum(b.data.astype(int) for b in bands.band_masks), 1)
        oracle = np.array([[brute_band(v, sched.alphas) for v in row] for row in x])
        np.testing.assert_array_equal(band_index(x, sched), oracle)

    @settings(max_examples=60, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_partition_property(self, seed):
        rng = np.random.default_rng(seed)
        x = rng.normal(size=(int(rng.integers(1, 20)), int(rng.integers(1, 20))))
        sched = random_schedule(rng, max(np.max(np.abs(x)), 1e-3))
        total = sum(b.data.astype(np.int64) for b in decompose(x, sched).band_masks)
        np.testing.assert_array_equal(total, 1)


class TestClipDenoise:
    @pytest.mark.parametrize("t", [1, 2, 5])
    def test_identity_round_trip(self, wedge, t):
        out = clip_denoise(wedge, default_schedule(wedge, t), lambda z: z)
        np.testing.assert_allclose(out.data, wedge.data, rtol=0, atol=1e-12)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_identity_any_schedule(self, seed):
        rng = np.random.default_rng(seed)
        x = rng.normal(scale=rng.uniform(0.01, 100), size=(12, 9))
        sched = random_schedule(rng, np.max(np.abs(x)))
        np.testing.assert_allclose(clip_denoise(x, sched, lambda z: z), x, rtol=1e-12, atol=0)

    def test_single_pass_reduction(self, rng):
        x = rng.normal(size=(16, 8))
        a = float(np.max(np.abs(x)))

        def f(z):
            return np.tanh(z) * 0.9 + 0.01

        np.testing.assert_array_equal(clip_denoise(x, [a], f), a * f(x / a))

    def test_zero_denoiser(self, rng):
        x = rng.normal(size=(16, 8))
        out = clip_denoise(x, default_schedule(x, 3), np.zeros_like)
        np.testing.assert_array_equal(out, 0.0)

    def test_denoiser_sees_clipped_scaled_input(self):
        x = np.array([[0.2, -0.9, 0.6]])
        seen = []

        def record(z):
            seen.append(z.copy())
            return z

        clip_denoise(x, (0.5, 1.0), record)
        np.testing.assert_allclose(seen[0], [[0.4, -1.0, 1.0]])
        np.testing.assert_allclose(seen[1], [[0.2, -0.9, 0.6]])

    def test_band_depends_only_on_clipped_values(self, rng):
        x = rng.uniform(-1, 1, size=(20, 20))
        sched = ClipSchedule((0.3, 0.6, 1.0))

        def smooth(z):
            # a nonlocal denoiser: every output cell mixes its neighbours
            p = np.pad(z, 1, mode="edge")
            return (p[:-2, 1:-1] + p[2:, 1:-1] + p[1:-1, :-2] + p[1:-1, 2:] + z) / 5

        base = clip_denoise(x, sched, smooth)
        idx = band_index(x, sched)
        y = x.copy()
        grow = (idx >= 1) & (np.abs(x) > 0.3)
        # push above-threshold cells further out without leaving their band
        y[grow] = np.sign(x[grow]) * np.minimum(np.abs(x[grow]) * 1.05, np.array(sched.alphas)[idx[grow]])
        np.testing.assert_array_equal(band_index(y, sched), idx)
        out = clip_denoise(y, sched, smooth)
        b0 = idx == 0
        np.testing.assert_array_equal(out[b0], base[b0])
        assert not np.array_equal(out[idx == 2], base[idx == 2])

    def test_shape_change_rejected(self):
        with pytest.raises(ValueError):
            clip_denoise(np.ones((4, 4)), [1.0], lambda z: z[:2])

    def test_warning_when_schedule_too_low(self, wedge):
        out = clip_denoise(wedge, (0.1, 0.5), lambda z: z)
        assert "warning: max |x|" in out.provenance
        np.testing.assert_allclose(out.data, wedge.data, atol=1e-12)
        clean = clip_denoise(wedge, (0.5, 1.0), lambda z: z)
        assert "warning" not in clean.provenance
        assert clean.provenance.endswith("clip_denoise(schedule=[0.5, 1])")
