"""Spectral differentiation with Butterworth low-pass filtering.

The signal is transformed along one axis, every component is multiplied by
its Butterworth gain and by (2 pi i k / T)^order, and the result is
transformed back.  T is the implied period N*step of the uniform sampling,
so signals sampled as u_j = u(j T / N) differentiate exactly within the
retained band.  The Nyquist bin of even-length axes is zeroed: its
derivative factor has no well-defined sign for a real signal.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Field
from .diffapi import DiffRequest, DiffResult


@dataclass(frozen=True)
class SpectralConfig:
    retained: int = 10  # lowest nonzero frequencies kept at gain ~ 1
    steepness: int = 4
    detrend: bool = False  # subtract the endpoint line before transforming

    def __post_init__(self) -> None:
        if self.retained < 1:
            raise ValueError("retained must be a positive frequency count")
        if self.steepness < 1:
            raise ValueError("steepness must be >= 1")


def dft(values: np.ndarray) -> np.ndarray:
    """Forward transform with the 1/N factor: u_hat_k = (1/N) sum u_n e^{-2pi i nk/N}."""
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 1 or values.size == 0:
        raise ValueError("dft expects a nonempty 1-D array")
    return np.fft.fft(values) / values.size


def idft(coeffs: np.ndarray) -> np.ndarray:
    """Inverse transform u_n = sum u_hat_k e^{2pi i nk/N}; real output only.

    The spectrum must carry the conjugate symmetry of a real signal; an
    asymmetric spectrum signals an upstream bug and is rejected.
    """
    coeffs = np.asarray(coeffs, dtype=np.complex128)
    if coeffs.ndim != 1 or coeffs.size == 0:
        raise ValueError("idft expects a nonempty 1-D array")
    n = coeffs.size
    mirrored = np.conj(coeffs[(-np.arange(n)) % n])
    tol = 1e-9 * max(1.0, float(np.abs(coeffs).max()))
    if np.abs(coeffs - mirrored).max() > tol:
        raise ValueError("spectrum lacks the conjugate symmetry of a real signal")
    out = np.fft.ifft(coeffs) * n
    return out.real


def butterworth_gain(k, n: int, cfg: SpectralConfig):
    """Low-pass gain G(k/N) = 1 / (1 + (k/retained)^(2s)), in (0, 1]."""
    k = np.asarray(k, dtype=np.float64)
    ratio = k / float(cfg.retained)
    out = 1.0 / (1.0 + ratio ** (2 * cfg.steepness))
    return out if out.ndim else float(out)


def _derivative_factor(n: int, period: float, order: int, cfg: SpectralConfig) -> np.ndarray:
    """Per-bin multiplier: Butterworth gain times (2 pi i k / T)^order."""
    k_signed = np.fft.fftfreq(n, d=1.0 / n)  # 0, 1, ..., -1 in bin units
    gain = butterworth_gain(np.abs(k_signed), n, cfg)
    factor = gain * (2j * np.pi * k_signed / period) ** order
    if n % 2 == 0:
        factor[n // 2] = 0.0  # ambiguous-sign Nyquist bin
    return factor


def spectral_differentiate(data: Field, req: DiffRequest, cfg: SpectralConfig) -> DiffResult:
    """Filtered spectral derivative along one axis; mask is all-true."""
    req.validate(data.grid)
    axis = req.axis
    n = data.grid.shape[axis]
    if n < 8:
        raise ValueError("spectral differentiation needs at least 8 nodes")
    if cfg.retained > (n - 1) // 2:
        raise ValueError(
            f"retained={cfg.retained} exceeds the {(n - 1) // 2} resolvable frequencies"
        )
    step = data.grid.axes[axis].step
    period = n * step

    u = np.moveaxis(data.values, axis, -1)
    slope = None
    if cfg.detrend:
        nodes = np.arange(n)
        slope = (u[..., -1:] - u[..., :1]) / (n - 1)
        u = u - u[..., :1] - slope * nodes

    factor = _derivative_factor(n, period, req.order, cfg)
    deriv = np.fft.ifft(np.fft.fft(u, axis=-1) * factor, axis=-1).real

    if cfg.detrend and req.order == 1:
        deriv = deriv + slope / step

    out = Field(data.grid, np.moveaxis(np.ascontiguousarray(deriv), -1, axis))
    return DiffResult(out, np.ones(data.grid.shape, dtype=bool))
