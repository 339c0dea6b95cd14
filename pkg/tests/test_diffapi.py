import numpy as np
import pytest

from derivbench.core import make_uniform_grid, masked_mse, sample_function
from derivbench.diffapi import DiffRequest, FiniteDiffConfig, differentiate, fd_differentiate
from derivbench.noise import NoiseSpec, contaminate
from derivbench.savgol import SavGolConfig
from derivbench.spectral import SpectralConfig


@pytest.fixture
def quadratic_field():
    grid = make_uniform_grid([(0, 1, 11)])
    return sample_function(grid, lambda t: t * t)


class TestFdFirstOrder:
    def test_central_exact_on_quadratic(self, quadratic_field):
        result = fd_differentiate(quadratic_field, DiffRequest(0, 1), "central")
        nodes = quadratic_field.grid.axes[0].nodes()
        err = np.abs(result.derivative.values - 2 * nodes)
        assert err[result.valid_mask].max() <= 1e-12

    def test_forward_hand_value(self, quadratic_field):
        # f(x)=x^2 at x=0.5, step 0.1: (0.36 - 0.25)/0.1 = 1.1
        result = fd_differentiate(quadratic_field, DiffRequest(0, 1), "forward")
        assert result.derivative.values[5] == pytest.approx(1.1, abs=1e-12)

    def test_central_exact_on_linear(self):
        grid = make_uniform_grid([(0, 1, 21)])
        field = sample_function(grid, lambda t: t)
        result = differentiate(field, DiffRequest(0, 1), FiniteDiffConfig("central"))
        assert np.abs(result.derivative.values[result.valid_mask] - 1.0).max() <= 1e-12

    def test_mask_shapes(self, quadratic_field):
        central = fd_differentiate(quadratic_field, DiffRequest(0, 1), "central")
        assert not central.valid_mask[0] and not central.valid_mask[-1]
        assert central.valid_mask[1:-1].all()
        forward = fd_differentiate(quadratic_field, DiffRequest(0, 1), "forward")
        assert forward.valid_mask[:-1].all() and not forward.valid_mask[-1]


class TestFdSecondOrder:
    def test_exact_on_quadratic(self, quadratic_field):
        result = fd_differentiate(quadratic_field, DiffRequest(0, 2))
        assert np.abs(result.derivative.values[result.valid_mask] - 2.0).max() <= 1e-10

    def test_boundary_fallback_finite_but_masked(self, quadratic_field):
        result = fd_differentiate(quadratic_field, DiffRequest(0, 2))
        assert np.isfinite(result.derivative.values).all()
        assert not result.valid_mask[0] and not result.valid_mask[-1]


class TestContracts:
    def test_order_three_rejected(self, quadratic_field):
        with pytest.raises(ValueError):
            differentiate(quadratic_field, DiffRequest(0, 3), FiniteDiffConfig())

    def test_axis_out_of_range(self, quadratic_field):
        with pytest.raises(ValueError):
            fd_differentiate(quadratic_field, DiffRequest(1, 1))

    def test_unknown_scheme(self, quadratic_field):
        with pytest.raises(ValueError):
            fd_differentiate(quadratic_field, DiffRequest(0, 1), "upwind")

    def test_unknown_config_type(self, quadratic_field):
        with pytest.raises(TypeError):
            differentiate(quadratic_field, DiffRequest(0, 1), object())

    def test_spectral_constant_is_zero(self):
        grid = make_uniform_grid([(0, 1, 64)])
        const = sample_function(grid, lambda t: 0 * t + 3.5)
        result = differentiate(const, DiffRequest(0, 1), SpectralConfig(retained=10))
        assert np.abs(result.derivative.values).max() <= 1e-10


class TestLinearity:
    def test_fd_savgol_spectral_linear(self):
        n = 128
        grid = make_uniform_grid([(0.0, 4.0 * (n - 1) / n, n)])
        f = sample_function(grid, lambda t: np.sin(2 * np.pi * t / 4.0))
        g = sample_function(grid, lambda t: np.cos(4 * np.pi * t / 4.0) + 0.3 * t)
        alpha, beta = 1.7, -0.4
        combo = sample_function(
            grid,
            lambda t: alpha * np.sin(2 * np.pi * t / 4.0)
            + beta * (np.cos(4 * np.pi * t / 4.0) + 0.3 * t),
        )
        configs = [
            FiniteDiffConfig("central"),
            SavGolConfig(window_half=8, poly_order=4),
            SpectralConfig(retained=20, steepness=4),
        ]
        for cfg in configs:
            rf = differentiate(f, DiffRequest(0, 1), cfg)
            rg = differentiate(g, DiffRequest(0, 1), cfg)
            rc = differentiate(combo, DiffRequest(0, 1), cfg)
            mask = rc.valid_mask
            expected = alpha * rf.derivative.values + beta * rg.derivative.values
            scale = np.abs(expected[mask]).max()
            err = np.abs(rc.derivative.values - expected)[mask].max()
            assert err <= 1e-9 * max(scale, 1.0), type(cfg).__name__


class TestConvergence:
    def test_central_fd_second_order(self):
        # halving the step divides the max interior error by ~4
        errors = {}
        for n in (101, 201):
            grid = make_uniform_grid([(0.0, 2.0 * np.pi, n)])
            f = sample_function(grid, np.sin)
            result = fd_differentiate(f, DiffRequest(0, 1), "central")
            truth = np.cos(grid.axes[0].nodes())
            errors[n] = np.abs(result.derivative.values - truth)[result.valid_mask].max()
        ratio = errors[201] / errors[101]
        assert 0.2 <= ratio <= 0.3


class TestNoiseMagnification:
    def test_finer_grid_amplifies_noise(self):
        # kappa=0.05 on sin over [0, 2pi]: MSE at n=2001 exceeds n=201 per seed
        wins = 0
        for seed in range(10):
            mses = {}
            for n in (201, 2001):
                grid = make_uniform_grid([(0.0, 2.0 * np.pi, n)])
                clean = sample_function(grid, np.sin)
                noisy = contaminate(clean, NoiseSpec(0.05, seed))
                result = fd_differentiate(noisy, DiffRequest(0, 1), "central")
                truth = np.cos(grid.axes[0].nodes())
                mses[n] = masked_mse(result.derivative.values, truth, result.valid_mask)
            wins += mses[2001] > mses[201]
        assert wins >= 8


class Test2d:
    def test_each_axis_independent(self):
        grid = make_uniform_grid([(0, 1, 21), (0, 2, 31)])
        field = sample_function(grid, lambda t, x: t * t + 3 * x)
        dt = fd_differentiate(field, DiffRequest(0, 1), "central")
        dx = fd_differentiate(field, DiffRequest(1, 1), "central")
        tt = grid.coords()[0]
        assert np.abs(dt.derivative.values - 2 * tt)[dt.valid_mask].max() <= 1e-12
        assert np.abs(dx.derivative.values - 3.0)[dx.valid_mask].max() <= 1e-12
        assert dt.valid_mask[0, :].sum() == 0 and dt.valid_mask[:, 0].sum() == 19
