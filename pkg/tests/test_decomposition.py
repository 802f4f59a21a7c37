"""Tests for the entropy decomposition core, checked against a scalar oracle."""

import math

import numpy as np
import pytest

from uqtangle import SampleGrid, bma, decompose, decompose_no_eu, shannon_entropy
from uqtangle.errors import (
    NegativeProbabilityError,
    NonFiniteDataError,
    NonNormalizedError,
    ShapeError,
)

LN2 = math.log(2.0)


def scalar_decompose(probs):
    """Independent naive reimplementation: pure-Python loops, exact summation."""
    m_count, n_count, c_count, height, width = probs.shape
    au = np.zeros((height, width))
    tu = np.zeros((height, width))
    for h in range(height):
        for w in range(width):
            instance_means = [
                [math.fsum(probs[m][n][c][h][w] for n in range(n_count)) / n_count
                 for c in range(c_count)]
                for m in range(m_count)
            ]
            entropies = [
                -math.fsum(p * math.log(p) for p in vec if p > 0.0)
                for vec in instance_means
            ]
            au[h, w] = math.fsum(entropies) / m_count
            overall = [
                math.fsum(instance_means[m][c] for m in range(m_count)) / m_count
                for c in range(c_count)
            ]
            tu[h, w] = -math.fsum(p * math.log(p) for p in overall if p > 0.0)
    eu = np.maximum(tu - au, 0.0)
    return au, eu, tu


def random_grid(rng, m=None, n=None, c=None, h=None, w=None):
    m = int(m if m is not None else rng.integers(1, 7))
    n = int(n if n is not None else rng.integers(1, 7))
    c = int(c if c is not None else rng.integers(2, 5))
    h = int(h if h is not None else rng.integers(1, 9))
    w = int(w if w is not None else rng.integers(1, 9))
    raw = rng.random((m, n, c, h, w)) + 1e-3
    return SampleGrid(raw / raw.sum(axis=2, keepdims=True))


def pixel_grid(*vectors):
    """Single-pixel grid with one instance per class vector (N=1)."""
    arr = np.array(vectors, dtype=np.float64)
    return SampleGrid(arr.reshape(arr.shape[0], 1, arr.shape[1], 1, 1))


class TestShannonEntropy:
    def test_one_hot_is_exactly_zero(self):
        assert shannon_entropy([1.0, 0.0]) == 0.0
        assert shannon_entropy([0.0, 0.0, 1.0, 0.0]) == 0.0

    def test_uniform_maximizes(self):
        assert shannon_entropy([0.5, 0.5]) == pytest.approx(LN2, abs=1e-12)
        assert shannon_entropy([0.25] * 4) == pytest.approx(math.log(4), abs=1e-12)

    def test_worked_value(self):
        # -0.7 ln 0.7 - 0.3 ln 0.3
        expected = -(0.7 * math.log(0.7) + 0.3 * math.log(0.3))
        assert shannon_entropy([0.7, 0.3]) == pytest.approx(expected, abs=1e-15)
        assert shannon_entropy([0.7, 0.3]) == pytest.approx(0.6108643, abs=1e-6)

    def test_bounds(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            c = int(rng.integers(2, 6))
            p = rng.random(c) + 1e-6
            p /= p.sum()
            h = shannon_entropy(p)
            assert -1e-12 <= h <= math.log(c) + 1e-9

    def test_array_input_with_axis(self):
        maps = np.stack([np.full((2, 2), 0.7), np.full((2, 2), 0.3)])
        out = shannon_entropy(maps, axis=0)
        np.testing.assert_allclose(out, shannon_entropy([0.7, 0.3]), rtol=1e-15)

    def test_rejects_non_normalized(self):
        with pytest.raises(NonNormalizedError):
            shannon_entropy([0.6, 0.3])

    def test_rejects_negative(self):
        with pytest.raises(NegativeProbabilityError):
            shannon_entropy([1.1, -0.1])

    def test_renormalizes_small_drift(self):
        # float32-style round-off within 1e-5 is renormalized, not rejected
        drifted = np.array([0.7, 0.3]) * (1.0 + 5e-6)
        assert shannon_entropy(drifted) == pytest.approx(shannon_entropy([0.7, 0.3]), abs=1e-9)


class TestSampleGrid:
    def test_shape_properties(self):
        g = random_grid(np.random.default_rng(1), m=3, n=2, c=4, h=5, w=6)
        assert (g.instances, g.samples, g.classes, g.height, g.width) == (3, 2, 4, 5, 6)

    def test_rejects_wrong_rank(self):
        with pytest.raises(ShapeError):
            SampleGrid(np.ones((2, 2, 2, 2)))

    def test_rejects_single_class(self):
        with pytest.raises(ShapeError):
            SampleGrid(np.ones((1, 1, 1, 2, 2)))

    def test_rejects_nan(self):
        arr = np.full((1, 1, 2, 1, 1), 0.5)
        arr[0, 0, 0, 0, 0] = np.nan
        with pytest.raises(NonFiniteDataError):
            SampleGrid(arr)

    def test_rejects_far_off_simplex(self):
        with pytest.raises(NonNormalizedError):
            SampleGrid(np.full((1, 1, 2, 1, 1), 0.6))

    def test_float32_upcast(self):
        arr = (np.random.default_rng(2).random((2, 2, 2, 3, 3)) + 0.1).astype(np.float32)
        arr /= arr.sum(axis=2, keepdims=True)
        g = SampleGrid(arr)
        assert g.probs.dtype == np.float64
        np.testing.assert_allclose(g.probs.sum(axis=2), 1.0, atol=1e-12)


class TestBma:
    def test_single_sample_identity(self):
        g = random_grid(np.random.default_rng(3), m=1, n=1)
        np.testing.assert_array_equal(bma(g), g.probs[0, 0])

    def test_two_instance_mean(self):
        g = pixel_grid([0.9, 0.1], [0.5, 0.5])
        np.testing.assert_allclose(bma(g).ravel(), [0.7, 0.3], atol=1e-15)

    def test_constant_grid(self):
        arr = np.tile(np.array([0.25, 0.75]).reshape(1, 1, 2, 1, 1), (2, 2, 1, 1, 1))
        np.testing.assert_allclose(bma(SampleGrid(arr)).ravel(), [0.25, 0.75], atol=1e-15)

    def test_stays_on_simplex(self):
        g = random_grid(np.random.default_rng(4))
        np.testing.assert_allclose(bma(g).sum(axis=0), 1.0, atol=1e-12)


class TestDecompose:
    def test_single_instance_has_zero_eu(self):
        g = random_grid(np.random.default_rng(5), m=1, n=4)
        maps = decompose(g)
        np.testing.assert_array_equal(maps.eu, 0.0)
        np.testing.assert_allclose(maps.au, maps.tu, atol=1e-12)

    def test_worked_two_instance_pixel(self):
        maps = decompose(pixel_grid([0.9, 0.1], [0.5, 0.5]))
        assert maps.au.ravel()[0] == pytest.approx(0.5091, abs=1e-4)
        assert maps.tu.ravel()[0] == pytest.approx(0.6109, abs=1e-4)
        assert maps.eu.ravel()[0] == pytest.approx(0.1018, abs=1e-4)

    def test_degenerate_ensemble(self):
        arr = np.tile(np.array([0.6, 0.4]).reshape(1, 1, 2, 1, 1), (3, 2, 1, 1, 1))
        maps = decompose(SampleGrid(arr))
        np.testing.assert_array_equal(maps.eu, 0.0)
        np.testing.assert_allclose(maps.au, shannon_entropy([0.6, 0.4]), atol=1e-12)

    def test_additivity(self):
        rng = np.random.default_rng(6)
        for _ in range(50):
            maps = decompose(random_grid(rng))
            np.testing.assert_allclose(maps.au + maps.eu, maps.tu, atol=1e-6)

    def test_bounds_and_jensen(self):
        rng = np.random.default_rng(7)
        for _ in range(50):
            g = random_grid(rng)
            maps = decompose(g)
            top = math.log(g.classes) + 1e-9
            assert maps.au.min() >= 0.0 and maps.au.max() <= top
            assert maps.tu.min() >= 0.0 and maps.tu.max() <= top
            assert maps.eu.min() >= 0.0
            assert np.all(maps.tu - maps.au >= -1e-9)

    def test_permutation_invariance(self):
        rng = np.random.default_rng(8)
        for _ in range(20):
            g = random_grid(rng, m=5, n=4)
            base = decompose(g)
            pm = decompose(SampleGrid(g.probs[rng.permutation(5)]))
            pn = decompose(SampleGrid(g.probs[:, rng.permutation(4)]))
            for other in (pm, pn):
                np.testing.assert_allclose(other.au, base.au, atol=1e-9)
                np.testing.assert_allclose(other.eu, base.eu, atol=1e-9)
                np.testing.assert_allclose(other.tu, base.tu, atol=1e-9)

    def test_matches_scalar_oracle(self):
        rng = np.random.default_rng(9)
        for _ in range(25):
            g = random_grid(rng)
            maps = decompose(g)
            au, eu, tu = scalar_decompose(g.probs)
            np.testing.assert_allclose(maps.au, au, atol=1e-9)
            np.testing.assert_allclose(maps.eu, eu, atol=1e-9)
            np.testing.assert_allclose(maps.tu, tu, atol=1e-9)


class TestDecomposeNoEu:
    def test_rejects_multi_instance(self):
        g = random_grid(np.random.default_rng(10), m=2, n=3)
        with pytest.raises(ShapeError):
            decompose_no_eu(g)

    def test_rejects_deterministic_grid(self):
        g = random_grid(np.random.default_rng(11), m=1, n=1)
        with pytest.raises(ShapeError):
            decompose_no_eu(g)

    def test_matches_reshaped_decompose(self):
        # N=2 samples (0.9,0.1) and (0.5,0.5) must equal the M=2 worked example
        arr = np.array([0.9, 0.1, 0.5, 0.5]).reshape(1, 2, 2, 1, 1)
        maps = decompose_no_eu(SampleGrid(arr))
        assert maps.au.ravel()[0] == pytest.approx(0.5091, abs=1e-4)
        assert maps.tu.ravel()[0] == pytest.approx(0.6109, abs=1e-4)
        assert maps.eu.ravel()[0] == pytest.approx(0.1018, abs=1e-4)

    def test_identical_samples_zero_eu(self):
        arr = np.tile(np.array([0.3, 0.7]).reshape(1, 1, 2, 1, 1), (1, 5, 1, 1, 1))
        maps = decompose_no_eu(SampleGrid(arr))
        np.testing.assert_array_equal(maps.eu, 0.0)
