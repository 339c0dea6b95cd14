import numpy as np
import pytest

from derivbench.core import make_uniform_grid, sample_function
from derivbench.diffapi import DiffRequest
from derivbench.spectral import (
    SpectralConfig,
    butterworth_gain,
    dft,
    idft,
    spectral_differentiate,
)


def dft_direct(values: np.ndarray) -> np.ndarray:
    """Literal transform sum, the oracle for the fast path."""
    n = len(values)
    k = np.arange(n)
    return (values[None, :] * np.exp(-2j * np.pi * np.outer(k, k % n) / n)).sum(axis=1) / n


def periodic_grid(n: int, period: float):
    """Grid sampling t_j = j * period / n (implied FFT period == period)."""
    return make_uniform_grid([(0.0, period * (n - 1) / n, n)])


class TestDft:
    def test_constant_is_dc_only(self):
        coeffs = dft(np.full(32, 2.5))
        assert coeffs[0] == pytest.approx(2.5)
        assert np.abs(coeffs[1:]).max() <= 1e-12

    def test_cosine_splits_into_two_bins(self):
        n = 64
        u = np.cos(2 * np.pi * np.arange(n) / n)
        coeffs = dft(u)
        assert coeffs[1] == pytest.approx(0.5, abs=1e-12)
        assert coeffs[n - 1] == pytest.approx(0.5, abs=1e-12)
        drop = np.delete(np.abs(coeffs), [1, n - 1])
        assert drop.max() <= 1e-12

    @pytest.mark.parametrize("n", [16, 100, 101])
    def test_matches_direct_sum(self, n):
        rng = np.random.default_rng(n)
        u = rng.normal(size=n)
        np.testing.assert_allclose(dft(u), dft_direct(u), atol=1e-12)

    @pytest.mark.parametrize("n", [16, 100, 101])
    def test_roundtrip(self, n):
        rng = np.random.default_rng(n + 7)
        u = rng.normal(size=n)
        np.testing.assert_allclose(idft(dft(u)), u, atol=1e-10)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            dft(np.array([]))


class TestIdft:
    def test_zero_spectrum(self):
        assert np.abs(idft(np.zeros(16, dtype=complex))).max() == 0.0

    def test_dc_only(self):
        coeffs = np.zeros(10, dtype=complex)
        coeffs[0] = 5.0
        np.testing.assert_allclose(idft(coeffs), np.full(10, 5.0), atol=1e-12)

    def test_asymmetric_spectrum_rejected(self):
        coeffs = np.zeros(8, dtype=complex)
        coeffs[1] = 1.0 + 0.5j  # missing the conjugate partner at bin 7
        with pytest.raises(ValueError):
            idft(coeffs)


class TestButterworthGain:
    def test_half_at_cutoff(self):
        cfg = SpectralConfig(retained=12, steepness=3)
        assert butterworth_gain(12, 128, cfg) == 0.5

    def test_unity_at_dc(self):
        cfg = SpectralConfig(retained=5, steepness=2)
        assert butterworth_gain(0, 64, cfg) == 1.0

    def test_double_cutoff_s4(self):
        # (2)^(2*4) = 256 -> gain 1/257
        cfg = SpectralConfig(retained=10, steepness=4)
        assert butterworth_gain(20, 128, cfg) == pytest.approx(1.0 / 257.0, rel=1e-12)

    def test_monotone_nonincreasing(self):
        cfg = SpectralConfig(retained=7, steepness=5)
        gains = butterworth_gain(np.arange(0, 65), 128, cfg)
        assert (np.diff(gains) <= 0).all()
        assert ((gains > 0) & (gains <= 1)).all()


class TestSpectralDifferentiate:
    def test_single_mode_derivative(self):
        n, period = 128, 4.0
        grid = periodic_grid(n, period)
        f = sample_function(grid, lambda t: np.sin(2 * np.pi * t / period))
        cfg = SpectralConfig(retained=63, steepness=4)
        result = spectral_differentiate(f, DiffRequest(0, 1), cfg)
        truth = (2 * np.pi / period) * np.cos(2 * np.pi * grid.axes[0].nodes() / period)
        assert np.abs(result.derivative.values - truth).max() <= 1e-8
        assert result.valid_mask.all()

    def test_constant_derivative_zero(self):
        grid = periodic_grid(64, 1.0)
        const = sample_function(grid, lambda t: 0 * t + 7.0)
        result = spectral_differentiate(const, DiffRequest(0, 1), SpectralConfig(retained=10))
        assert np.abs(result.derivative.values).max() <= 1e-10

    def test_highfreq_component_suppressed(self):
        n, period = 256, 1.0
        grid = periodic_grid(n, period)
        f = sample_function(
            grid,
            lambda t: np.sin(2 * np.pi * t / period) + 0.01 * np.sin(40 * np.pi * t / period),
        )
        cfg = SpectralConfig(retained=3, steepness=4)
        result = spectral_differentiate(f, DiffRequest(0, 1), cfg)
        low_truth = (2 * np.pi / period) * np.cos(2 * np.pi * grid.axes[0].nodes() / period)
        rel = np.abs(result.derivative.values - low_truth).max() / np.abs(low_truth).max()
        assert rel <= 0.02

    def test_second_order_native(self):
        n, period = 128, 2.0
        grid = periodic_grid(n, period)
        f = sample_function(grid, lambda t: np.cos(2 * np.pi * t / period))
        cfg = SpectralConfig(retained=40, steepness=8)
        result = spectral_differentiate(f, DiffRequest(0, 2), cfg)
        truth = -((2 * np.pi / period) ** 2) * np.cos(
            2 * np.pi * grid.axes[0].nodes() / period
        )
        assert np.abs(result.derivative.values - truth).max() <= 1e-8 * np.abs(truth).max()

    def test_trig_polynomial_exactness_in_band(self):
        # frequencies well inside the retained band, steep filter
        n, period = 128, 1.0
        grid = periodic_grid(n, period)
        nodes = grid.axes[0].nodes()

        def f(t):
            w = 2 * np.pi / period
            return 1.5 + np.sin(w * t) - 0.7 * np.cos(3 * w * t) + 0.2 * np.sin(5 * w * t)

        def df(t):
            w = 2 * np.pi / period
            return w * np.cos(w * t) + 2.1 * w * np.sin(3 * w * t) + w * np.cos(5 * w * t)

        field = sample_function(grid, f)
        cfg = SpectralConfig(retained=63, steepness=8)
        result = spectral_differentiate(field, DiffRequest(0, 1), cfg)
        assert np.abs(result.derivative.values - df(nodes)).max() <= 1e-8

    def test_parseval_energy_bound(self):
        # filter gains <= 1: output energy below unfiltered derivative energy
        n, period = 200, 2.0
        grid = periodic_grid(n, period)
        rng = np.random.default_rng(3)
        from derivbench.core import Field

        field = Field(grid, rng.normal(size=n))
        filtered = spectral_differentiate(
            field, DiffRequest(0, 1), SpectralConfig(retained=10, steepness=3)
        )
        unfiltered = spectral_differentiate(
            field, DiffRequest(0, 1), SpectralConfig(retained=99, steepness=12)
        )
        assert np.sum(filtered.derivative.values**2) <= np.sum(
            unfiltered.derivative.values**2
        ) * (1 + 1e-12)

    def test_deterministic(self):
        grid = periodic_grid(64, 1.0)
        f = sample_function(grid, lambda t: np.sin(2 * np.pi * t))
        cfg = SpectralConfig(retained=20)
        a = spectral_differentiate(f, DiffRequest(0, 1), cfg)
        b = spectral_differentiate(f, DiffRequest(0, 1), cfg)
        np.testing.assert_array_equal(a.derivative.values, b.derivative.values)

    def test_retained_out_of_range(self):
        grid = periodic_grid(64, 1.0)
        f = sample_function(grid, lambda t: t)
        with pytest.raises(ValueError):
            spectral_differentiate(f, DiffRequest(0, 1), SpectralConfig(retained=32))

    def test_detrend_recovers_slope(self):
        # non-periodic affine data: detrended derivative recovers the slope
        grid = make_uniform_grid([(0, 1, 64)])
        f = sample_function(grid, lambda t: 3.0 * t + 1.0)
        cfg = SpectralConfig(retained=10, steepness=4, detrend=True)
        result = spectral_differentiate(f, DiffRequest(0, 1), cfg)
        assert np.abs(result.derivative.values - 3.0).max() <= 1e-9

    def test_2d_derivative_along_space(self):
        n = 64
        grid = make_uniform_grid([(0, 1, 5), (0.0, 1.0 * (n - 1) / n, n)])
        f = sample_function(
            grid, lambda t, x: (1 + t) * np.sin(2 * np.pi * x)
        )
        cfg = SpectralConfig(retained=20, steepness=6)
        result = spectral_differentiate(f, DiffRequest(1, 1), cfg)
        tt, xx = grid.coords()
        truth = (1 + tt) * 2 * np.pi * np.cos(2 * np.pi * xx)
        assert np.abs(result.derivative.values - truth).max() <= 1e-7
