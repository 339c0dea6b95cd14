"""derivbench: noise-robust differentiation and equation-discovery benchmarks."""

from .annsmooth import AnnConfig, Mlp, TrainingDivergedError, ann_differentiate, ann_smooth, mlp_forward, mlp_init, mlp_train
from .benchmarks import Benchmark, ReferenceEquation, default_grid, make_benchmark, make_linear2d, make_oscillator, make_wave
from .core import Axis, Field, Grid, make_uniform_grid, mse, read_field_csv, sample_function, write_field_csv
from .diffapi import DiffRequest, DiffResult, FiniteDiffConfig, differentiate, fd_differentiate
from .noise import NoiseSpec, contaminate
from .savgol import SavGolConfig, chebyshev_eval, fit_window, savgol_differentiate
from .spectral import SpectralConfig, butterworth_gain, dft, idft, spectral_differentiate
from .totalvar import TvConfig, TvSolverError, cumulative_integral, tv_differentiate, tv_objective

__all__ = [
    "AnnConfig",
    "Axis",
    "Benchmark",
    "DiffRequest",
    "DiffResult",
    "Field",
    "FiniteDiffConfig",
    "Grid",
    "Mlp",
    "NoiseSpec",
    "ReferenceEquation",
    "SavGolConfig",
    "SpectralConfig",
    "TrainingDivergedError",
    "TvConfig",
    "TvSolverError",
    "ann_differentiate",
    "ann_smooth",
    "butterworth_gain",
    "chebyshev_eval",
    "contaminate",
    "cumulative_integral",
    "default_grid",
    "dft",
    "differentiate",
    "fd_differentiate",
    "fit_window",
    "idft",
    "make_benchmark",
    "make_linear2d",
    "make_oscillator",
    "make_uniform_grid",
    "make_wave",
    "mlp_forward",
    "mlp_init",
    "mlp_train",
    "mse",
    "read_field_csv",
    "sample_function",
    "savgol_differentiate",
    "spectral_differentiate",
    "tv_differentiate",
    "tv_objective",
    "write_field_csv",
]

__version__ = "0.1.0"
