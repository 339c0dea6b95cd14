import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from derivbench.core import (
    Field,
    make_uniform_grid,
    mse,
    read_field_csv,
    sample_function,
    write_field_csv,
)


class TestMakeUniformGrid:
    def test_eleven_nodes_unit_interval(self):
        grid = make_uniform_grid([(0, 1, 11)])
        assert grid.axes[0].step == pytest.approx(0.1)
        np.testing.assert_allclose(grid.axes[0].nodes(), np.arange(11) * 0.1, atol=1e-15)

    def test_linear_system_time_grid(self):
        # T=25 with 2501 nodes gives step 0.01 by (stop-start)/(n-1)
        grid = make_uniform_grid([(0, 25, 2501)])
        assert grid.axes[0].step == pytest.approx(0.01)

    def test_degenerate_axis_rejected(self):
        with pytest.raises(ValueError):
            make_uniform_grid([(0, 0, 3)])

    def test_too_few_nodes_rejected(self):
        with pytest.raises(ValueError):
            make_uniform_grid([(0, 1, 2)])

    def test_nonfinite_bounds_rejected(self):
        with pytest.raises(ValueError):
            make_uniform_grid([(0, math.inf, 5)])

    def test_three_dimensions_rejected(self):
        with pytest.raises(ValueError):
            make_uniform_grid([(0, 1, 3)] * 3)


class TestSampleFunction:
    def test_zero_function(self):
        grid = make_uniform_grid([(0, 1, 11)])
        field = sample_function(grid, lambda t: 0.0 * t)
        assert (field.values == 0.0).all()

    def test_identity_sampling(self):
        grid = make_uniform_grid([(0, 1, 11)])
        field = sample_function(grid, lambda t: t)
        np.testing.assert_allclose(field.values, np.arange(11) * 0.1, atol=1e-15)

    def test_2d_spot_value(self):
        grid = make_uniform_grid([(0, 1, 101), (0, 1, 101)])
        field = sample_function(
            grid, lambda t, x: np.sin(np.pi * x) * np.cos(0.5 * np.pi * t)
        )
        # (t=0, x=0.5): sin(pi/2) * cos(0) = 1
        assert field.values[0, 50] == pytest.approx(1.0, abs=1e-12)

    def test_scalar_callable_supported(self):
        grid = make_uniform_grid([(0, 1, 5)])
        field = sample_function(grid, lambda t: math.sin(t))
        np.testing.assert_allclose(field.values, np.sin(grid.axes[0].nodes()))

    def test_nonfinite_output_names_node(self):
        grid = make_uniform_grid([(0, 1, 5)])
        with pytest.raises(ValueError, match="t="):
            sample_function(grid, lambda t: np.where(t > 0.6, np.nan, t))

    @given(
        st.integers(min_value=3, max_value=40),
        st.floats(min_value=-5, max_value=5),
        st.floats(min_value=0.1, max_value=10),
    )
    @settings(max_examples=30, deadline=None)
    def test_polynomial_roundtrip_at_nodes(self, n, start, width):
        grid = make_uniform_grid([(start, start + width, n)])
        field = sample_function(grid, lambda t: 3.0 * t * t - 2.0 * t + 1.0)
        nodes = grid.axes[0].nodes()
        expected = 3.0 * nodes * nodes - 2.0 * nodes + 1.0
        np.testing.assert_allclose(field.values, expected, rtol=1e-12)


class TestField:
    def test_value_count_checked(self):
        grid = make_uniform_grid([(0, 1, 5)])
        with pytest.raises(ValueError):
            Field(grid, np.zeros(4))

    def test_nan_rejected(self):
        grid = make_uniform_grid([(0, 1, 5)])
        with pytest.raises(ValueError):
            Field(grid, np.array([0, 1, np.nan, 3, 4.0]))

    def test_values_immutable(self):
        grid = make_uniform_grid([(0, 1, 5)])
        field = Field(grid, np.zeros(5))
        with pytest.raises(ValueError):
            field.values[0] = 1.0


class TestMse:
    def test_identity_is_zero(self):
        grid = make_uniform_grid([(0, 1, 7)])
        f = sample_function(grid, lambda t: np.sin(t))
        assert mse(f, f) == 0.0

    def test_constant_offset(self):
        grid = make_uniform_grid([(0, 1, 9)])
        ones = Field(grid, np.ones(9))
        zeros = Field(grid, np.zeros(9))
        assert mse(ones, zeros) == 1.0

    def test_hand_value(self):
        # a=(0,2,...), b=(1,1,...): ((1)^2 + (1)^2 + 0)/3 on a 3-node grid
        grid = make_uniform_grid([(0, 1, 3)])
        a = Field(grid, np.array([0.0, 2.0, 5.0]))
        b = Field(grid, np.array([1.0, 1.0, 5.0]))
        assert mse(a, b) == pytest.approx(2.0 / 3.0)

    def test_grid_mismatch_rejected(self):
        a = Field(make_uniform_grid([(0, 1, 5)]), np.zeros(5))
        b = Field(make_uniform_grid([(0, 2, 5)]), np.zeros(5))
        with pytest.raises(ValueError):
            mse(a, b)

    @given(st.lists(st.floats(-1e6, 1e6), min_size=5, max_size=5))
    @settings(max_examples=50, deadline=None)
    def test_pseudometric(self, vals):
        grid = make_uniform_grid([(0, 1, 5)])
        a = Field(grid, np.array(vals))
        b = Field(grid, np.arange(5.0))
        assert mse(a, b) == mse(b, a)
        assert mse(a, a) == 0.0
        if mse(a, b) == 0.0:
            assert (a.values == b.values).all()


class TestFieldCsv:
    def test_roundtrip_1d(self, tmp_path):
        grid = make_uniform_grid([(0, 2, 17)])
        field = sample_function(grid, lambda t: np.exp(t) * np.sin(3 * t))
        path = tmp_path / "f.csv"
        write_field_csv(field, path)
        back = read_field_csv(path)
        assert back.grid == field.grid
        np.testing.assert_array_equal(back.values, field.values)

    def test_roundtrip_2d(self, tmp_path):
        grid = make_uniform_grid([(0, 1, 5), (0, 2, 7)])
        field = sample_function(grid, lambda t, x: t * x + 0.25 * x * x)
        path = tmp_path / "f.csv"
        write_field_csv(field, path)
        back = read_field_csv(path)
        assert back.grid == field.grid
        np.testing.assert_array_equal(back.values, field.values)

    def test_header_names_axes(self, tmp_path):
        grid = make_uniform_grid([(0, 1, 5), (0, 1, 5)])
        field = Field(grid, np.zeros(25))
        path = tmp_path / "f.csv"
        write_field_csv(field, path)
        assert path.read_text().splitlines()[0] == "t,x,value"
