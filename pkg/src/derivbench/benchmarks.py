"""Analytic benchmark problems with exact derivative fields.

All three problems have closed-form solutions, so ground-truth derivatives
carry no integration error: a damped linear spiral (two coupled states), a
damped harmonic oscillator, and a standing wave on the unit square.  Each
benchmark carries the reference equation structures that discovery is
expected to recover.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import Field, Grid, make_uniform_grid, sample_function

# Linear system x' = a x + b y, y' = c x + d y.
LINEAR2D_A = -0.1
LINEAR2D_B = 2.0
LINEAR2D_C = -2.0
LINEAR2D_D = -0.1

# Oscillator u'' + damping u' + stiffness u = 0 (unit mass).
OSC_DAMPING = 0.25
OSC_STIFFNESS = 3.0

WAVE_SPEED = 0.5

DEFAULT_GRIDS = {
    "linear2d": ((0.0, 25.0, 1000),),
    "oscillator": ((0.0, 10.0, 1000),),
    "wave": ((0.0, 1.0, 101), (0.0, 1.0, 101)),
}


@dataclass(frozen=True)
class ReferenceEquation:
    """lhs term id plus the exact (term id, coefficient) right-hand side."""

    lhs_term: str
    rhs_terms: tuple[tuple[str, float], ...]

    def term_ids(self) -> frozenset[str]:
        return frozenset(term for term, _ in self.rhs_terms)


@dataclass(frozen=True)
class Benchmark:
    name: str
    grid: Grid
    fields: dict[str, Field]  # state variables
    truth_derivs: dict[str, Field]  # analytic derivatives, keyed like "u_tt"
    references: tuple[ReferenceEquation, ...]


def default_grid(name: str) -> Grid:
    return make_uniform_grid(DEFAULT_GRIDS[name])


def make_linear2d(grid: Grid, x0: float = 2.0, y0: float = 0.0) -> Benchmark:
    """Damped spiral solution of the 2x2 linear system."""
    if grid.ndim != 1:
        raise ValueError("linear2d needs a 1-D time grid")
    decay = LINEAR2D_A  # equals the real part of the eigenvalues
    omega = LINEAR2D_B

    def x_sol(t):
        return np.exp(decay * t) * (x0 * np.cos(omega * t) + y0 * np.sin(omega * t))

    def y_sol(t):
        return np.exp(decay * t) * (y0 * np.cos(omega * t) - x0 * np.sin(omega * t))

    x = sample_function(grid, x_sol)
    y = sample_function(grid, y_sol)
    x_t = Field(grid, LINEAR2D_A * x.values + LINEAR2D_B * y.values)
    y_t = Field(grid, LINEAR2D_C * x.values + LINEAR2D_D * y.values)
    return Benchmark(
        name="linear2d",
        grid=grid,
        fields={"x": x, "y": y},
        truth_derivs={"x_t": x_t, "y_t": y_t},
        references=(
            ReferenceEquation("x_t", (("x", LINEAR2D_A), ("y", LINEAR2D_B))),
            ReferenceEquation("y_t", (("x", LINEAR2D_C), ("y", LINEAR2D_D))),
        ),
    )


def make_oscillator(grid: Grid, u0: float = 1.0, v0: float = 0.0) -> Benchmark:
    """Underdamped oscillator u'' = -damping u' - stiffness u."""
    if grid.ndim != 1:
        raise ValueError("oscillator needs a 1-D time grid")
    decay = OSC_DAMPING / 2.0
    omega = math.sqrt(OSC_STIFFNESS - decay * decay)
    a = u0
    b = (v0 + decay * u0) / omega

    def u_sol(t):
        return np.exp(-decay * t) * (a * np.cos(omega * t) + b * np.sin(omega * t))

    def v_sol(t):
        cos, sin = np.cos(omega * t), np.sin(omega * t)
        return np.exp(-decay * t) * (
            (-decay * a + b * omega) * cos + (-decay * b - a * omega) * sin
        )

    u = sample_function(grid, u_sol)
    u_t = sample_function(grid, v_sol)
    # Exact by construction: the second derivative straight from the ODE.
    u_tt = Field(grid, -OSC_DAMPING * u_t.values - OSC_STIFFNESS * u.values)
    return Benchmark(
        name="oscillator",
        grid=grid,
        fields={"u": u},
        truth_derivs={"u_t": u_t, "u_tt": u_tt},
        references=(
            ReferenceEquation("u_tt", (("u_t", -OSC_DAMPING), ("u", -OSC_STIFFNESS))),
        ),
    )


def make_wave(grid: Grid) -> Benchmark:
    """Standing wave u = sin(pi x) cos(c pi t) solving u_tt = c^2 u_xx."""
    if grid.ndim != 2:
        raise ValueError("wave needs a 2-D (t, x) grid")
    c = WAVE_SPEED

    u = sample_function(grid, lambda t, x: np.sin(np.pi * x) * np.cos(c * np.pi * t))
    u_t = sample_function(
        grid, lambda t, x: -c * np.pi * np.sin(np.pi * x) * np.sin(c * np.pi * t)
    )
    u_x = sample_function(
        grid, lambda t, x: np.pi * np.cos(np.pi * x) * np.cos(c * np.pi * t)
    )
    # Scaled copies of u keep the PDE residual exactly zero in floats.
    u_xx = Field(grid, -(np.pi**2) * u.values)
    u_tt = Field(grid, (c * c) * u_xx.values)
    return Benchmark(
        name="wave",
        grid=grid,
        fields={"u": u},
        truth_derivs={"u_t": u_t, "u_tt": u_tt, "u_x": u_x, "u_xx": u_xx},
        references=(ReferenceEquation("u_tt", (("u_xx", c * c),)),),
    )


_BUILDERS = {
    "linear2d": make_linear2d,
    "oscillator": make_oscillator,
    "wave": make_wave,
}

BENCHMARK_NAMES = tuple(_BUILDERS)


def make_benchmark(name: str, grid: Grid | None = None, **params) -> Benchmark:
    if name not in _BUILDERS:
        raise ValueError(f"unknown benchmark {name!r}; choose from {BENCHMARK_NAMES}")
    return _BUILDERS[name](grid if grid is not None else default_grid(name), **params)
