"""Savitzky-Golay differentiation via windowed Chebyshev least squares.

Each node's window of 2M+1 samples is mapped affinely onto [-1, 1] and fit
with Chebyshev polynomials of the first kind; the fitted series is
differentiated analytically (T_m' = m U_{m-1}, with the coefficient
recurrence applied again for second derivatives) and evaluated at the
window center.  Boundary bands of width M have no centered window and are
masked out.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .core import Field
from .diffapi import DiffRequest, DiffResult


@dataclass(frozen=True)
class SavGolConfig:
    window_half: int = 15  # M; window length is 2M+1
    poly_order: int = 4

    def __post_init__(self) -> None:
        if self.window_half < 1:
            raise ValueError("window_half must be >= 1")
        if not 0 < self.poly_order < 2 * self.window_half + 1:
            raise ValueError(
                f"poly_order must satisfy 0 < n < {2 * self.window_half + 1}"
            )


def chebyshev_eval(kind: str, degree: int, x):
    """T_degree(x) or U_degree(x) by the three-term recurrence."""
    if degree < 0:
        raise ValueError("degree must be >= 0")
    if kind not in ("first", "second"):
        raise ValueError(f"kind must be 'first' or 'second', got {kind!r}")
    x = np.asarray(x, dtype=np.float64)
    prev = np.ones_like(x)
    if degree == 0:
        return prev if prev.ndim else float(prev)
    cur = x if kind == "first" else 2.0 * x
    for _ in range(degree - 1):
        prev, cur = cur, 2.0 * x * cur - prev
    return cur if cur.ndim else float(cur)


def chebyshev_design(y: np.ndarray, poly_order: int) -> np.ndarray:
    """Design matrix P[j, k] = T_k(y_j) for k = 0..poly_order."""
    return np.stack(
        [chebyshev_eval("first", k, y) for k in range(poly_order + 1)], axis=-1
    )


def cheb_derivative_coeffs(c: np.ndarray) -> np.ndarray:
    """Chebyshev-basis coefficients of the derivative of series `c`.

    Standard backward recurrence: d[k] = d[k+2] + 2(k+1) c[k+1], d[0] halved.
    """
    c = np.asarray(c, dtype=np.float64)
    n = len(c) - 1
    if n <= 0:
        return np.zeros(1)
    d = np.zeros(n)
    for k in range(n - 1, -1, -1):
        d[k] = (d[k + 2] if k + 2 < n else 0.0) + 2.0 * (k + 1) * c[k + 1]
    d[0] *= 0.5
    return d


def fit_window(samples: np.ndarray, coords: np.ndarray, poly_order: int) -> np.ndarray:
    """Least-squares Chebyshev coefficients for one window of samples."""
    samples = np.asarray(samples, dtype=np.float64)
    coords = np.asarray(coords, dtype=np.float64)
    if samples.shape != coords.shape or samples.ndim != 1:
        raise ValueError("samples and coords must be 1-D and equally long")
    if len(samples) <= poly_order:
        raise ValueError("window must contain more samples than poly_order")
    steps = np.diff(coords)
    if not (steps > 0).all():
        raise ValueError("coords must be strictly increasing")
    y = 2.0 * (coords - coords[0]) / (coords[-1] - coords[0]) - 1.0
    design = chebyshev_design(y, poly_order)
    alpha, _, rank, _ = np.linalg.lstsq(design, samples, rcond=None)
    assert rank == poly_order + 1, "window design matrix lost rank"
    return alpha


def _center_weights(window_half: int, poly_order: int, order: int, step: float) -> np.ndarray:
    """Sample weights giving the fitted derivative at the window center.

    The derivative at the center is linear in the window samples:
    d = row @ alpha = row @ pinv(P) @ u, so the whole window reduces to one
    dot product.  `row` holds the basis derivatives at y = 0 times the
    chain-rule factor of the affine map onto [-1, 1].
    """
    m = window_half
    y = (np.arange(2 * m + 1) - m) / m
    design = chebyshev_design(y, poly_order)
    pinv = np.linalg.pinv(design)

    row = np.zeros(poly_order + 1)
    if order == 1:
        # T_k'(0) = k * U_{k-1}(0)
        for k in range(1, poly_order + 1):
            row[k] = k * chebyshev_eval("second", k - 1, 0.0)
    else:
        for k in range(poly_order + 1):
            unit = np.zeros(poly_order + 1)
            unit[k] = 1.0
            d2 = cheb_derivative_coeffs(cheb_derivative_coeffs(unit))
            row[k] = sum(
                d2[j] * chebyshev_eval("first", j, 0.0) for j in range(len(d2))
            )
    half_width = m * step
    return (row @ pinv) / half_width**order


def savgol_differentiate(data: Field, req: DiffRequest, cfg: SavGolConfig) -> DiffResult:
    """Sliding-window Chebyshev fit differentiated at each interior node."""
    req.validate(data.grid)
    m = cfg.window_half
    axis = req.axis
    n = data.grid.shape[axis]
    if n < 2 * m + 1:
        raise ValueError(f"axis has {n} nodes but the window needs {2 * m + 1}")
    step = data.grid.axes[axis].step

    weights = _center_weights(m, cfg.poly_order, req.order, step)
    u = np.moveaxis(data.values, axis, -1)
    interior = sliding_window_view(u, 2 * m + 1, axis=-1) @ weights

    out = np.empty_like(u)
    out[..., m : n - m] = interior
    # Boundary bands replicate the nearest interior estimate; masked False.
    out[..., :m] = interior[..., :1]
    out[..., n - m :] = interior[..., -1:]
    mask = np.zeros(u.shape, dtype=bool)
    mask[..., m : n - m] = True

    deriv = Field(data.grid, np.moveaxis(out, -1, axis))
    return DiffResult(deriv, np.moveaxis(mask, -1, axis))
