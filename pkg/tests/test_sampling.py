"""Monte-Carlo sampler: determinism, distributional checks, persistence."""

import math

import numpy as np
import pytest

import opemeso as om
from opemeso.errors import InvalidParams, Unsupported
from opemeso.sampling import SampleBatch, standardized_skewness

IM_G = om.parse_test_function("im:1/(x-i)")


def semicircle_cdf(x):
    x = np.clip(x, -2, 2)
    return 0.5 + x * np.sqrt(4 - x ** 2) / (4 * np.pi) + np.arcsin(x / 2) / np.pi


class TestDeterminism:
    def test_same_seed_same_batch(self):
        b1 = om.sample_spectra(om.hermite(), 50, 20, seed=123)
        b2 = om.sample_spectra(om.hermite(), 50, 20, seed=123)
        assert np.array_equal(b1.spectra, b2.spectra)

    def test_different_seeds_differ(self):
        b1 = om.sample_spectra(om.hermite(), 50, 5, seed=1)
        b2 = om.sample_spectra(om.hermite(), 50, 5, seed=2)
        assert not np.array_equal(b1.spectra, b2.spectra)

    def test_thread_count_irrelevant(self):
        b1 = om.sample_spectra(om.laguerre(1.0), 60, 40, seed=5, threads=1)
        b2 = om.sample_spectra(om.laguerre(1.0), 60, 40, seed=5, threads=3)
        assert np.array_equal(b1.spectra, b2.spectra)

    def test_resume_matches_fresh(self):
        full = om.sample_spectra(om.hermite(), 40, 30, seed=9)
        tail = om.sample_spectra(om.hermite(), 40, 10, seed=9, start_index=20)
        assert np.array_equal(full.spectra[20:], tail.spectra)

    def test_sorted_ascending(self):
        b = om.sample_spectra(om.hermite(), 80, 10, seed=3)
        assert np.all(np.diff(b.spectra, axis=1) >= 0)


class TestDistribution:
    def test_semicircle_bulk_fraction(self):
        batch = om.sample_spectra(om.hermite(), 200, 1000, seed=77)
        frac = float(np.mean((batch.spectra >= -1) & (batch.spectra <= 1)))
        target = semicircle_cdf(1) - semicircle_cdf(-1)  # 1/3 + sqrt(3)/(2 pi)
        assert target == pytest.approx(1 / 3 + math.sqrt(3) / (2 * math.pi))
        assert abs(frac - target) < 0.02

    def test_largest_eigenvalue_near_soft_edge(self):
        batch = om.sample_spectra(om.hermite(), 200, 500, seed=21)
        mean_max = float(batch.spectra[:, -1].mean())
        assert 1.9 <= mean_max <= 2.05

    def test_laguerre_support(self):
        batch = om.sample_spectra(om.laguerre(0.0), 150, 300, seed=4)
        assert batch.spectra.min() > -0.05
        assert 3.7 < batch.spectra.max() < 4.4

    def test_skewness_small_at_soft_edge(self):
        edge = om.EdgeSpec(side=om.Side.RIGHT, alpha=0.4, epsilon=0.1)
        batch = om.sample_spectra(om.hermite(), 400, 10000, seed=314, threads=2)
        assert abs(standardized_skewness(batch, IM_G, edge)) <= 0.15


class TestEmpiricalStatistic:
    def test_constant_function(self):
        batch = om.sample_spectra(om.hermite(), 30, 50, seed=6)
        edge = om.EdgeSpec(side=om.Side.RIGHT, alpha=0.5, epsilon=0.1)
        c = 0.7
        mean, var, se = om.empirical_statistic(
            batch, lambda x: np.full_like(np.asarray(x, float), c), edge
        )
        assert mean == pytest.approx(c * 30, rel=1e-12)
        assert var == pytest.approx(0.0, abs=1e-20)

    def test_matches_exact_variance(self):
        n, count = 200, 4000
        edge = om.EdgeSpec(side=om.Side.RIGHT, alpha=0.4, epsilon=0.1)
        batch = om.sample_spectra(om.hermite(), n, count, seed=2718, threads=2)
        _, var, se = om.empirical_statistic(batch, IM_G, edge)
        F = om.build_F(om.hermite(), n, edge, IM_G)
        exact = om.cumulant(F, n, 2) / n ** 0.8
        assert abs(var - exact) <= 3 * se

    def test_x0_shift_within_noise(self):
        # the deterministic n^(-alpha-1/2) shift of the variance is at the
        # n^(-1/2) scale, below one standard error at this sample count
        n, count = 200, 400
        batch = om.sample_spectra(om.hermite(), n, count, seed=55)
        base = om.EdgeSpec(side=om.Side.RIGHT, alpha=0.4, epsilon=0.1)
        x0 = om.edge_location(om.hermite(), n, om.Side.RIGHT)
        moved = om.EdgeSpec(
            side=om.Side.RIGHT, alpha=0.4, x0=x0 + n ** (-0.4 - 0.5), epsilon=0.1
        )
        _, v1, se1 = om.empirical_statistic(batch, IM_G, base)
        _, v2, _ = om.empirical_statistic(batch, IM_G, moved)
        assert abs(v1 - v2) < se1


class TestValidation:
    def test_unsupported_family(self):
        with pytest.raises(Unsupported):
            om.sample_spectra(om.chebyshev2(), 50, 10, seed=0)

    def test_size_limits(self):
        with pytest.raises(InvalidParams):
            om.sample_spectra(om.hermite(), 2001, 1, seed=0)
        with pytest.raises(InvalidParams):
            om.sample_spectra(om.hermite(), 10, 0, seed=0)

    def test_empty_batch_rejected(self):
        batch = om.sample_spectra(om.hermite(), 10, 1, seed=0)
        empty = SampleBatch(om.hermite(), 10, 0, batch.spectra[:0])
        edge = om.EdgeSpec(side=om.Side.RIGHT, alpha=0.5, epsilon=0.1)
        with pytest.raises(InvalidParams):
            om.empirical_statistic(empty, IM_G, edge)


class TestPersistence:
    def test_round_trip_bit_exact(self, tmp_path):
        batch = om.sample_spectra(om.laguerre(0.0), 40, 25, seed=909)
        path = tmp_path / "batch.bin"
        om.save_batch(batch, path)
        loaded = om.load_batch(path, om.laguerre(0.0))
        assert loaded.n == batch.n
        assert loaded.seed == batch.seed
        assert np.array_equal(loaded.spectra, batch.spectra)

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "junk.bin"
        path.write_bytes(b"NOTABATCH" + b"\x00" * 64)
        with pytest.raises(InvalidParams):
            om.load_batch(path, om.hermite())

    def test_truncated_file(self, tmp_path):
        batch = om.sample_spectra(om.hermite(), 20, 4, seed=1)
        path = tmp_path / "batch.bin"
        om.save_batch(batch, path)
        data = path.read_bytes()
        path.write_bytes(data[:-16])
        with pytest.raises(InvalidParams):
            om.load_batch(path, om.hermite())
