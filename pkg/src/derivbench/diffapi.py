"""Common differentiation contract plus the finite-difference baseline.

Every method consumes a ``Field`` and a ``DiffRequest`` (axis + order) and
returns a ``DiffResult``: a derivative ``Field`` together with a validity
mask that is False wherever the method cannot produce interior-quality
values.  Downstream consumers only read mask-true nodes; masked nodes still
carry finite fallback values so the Field invariant holds.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np

from .core import Field

ORDERS = (1, 2)
FD_SCHEMES = ("central", "forward")


@dataclass(frozen=True)
class DiffRequest:
    axis: int = 0
    order: int = 1

    def validate(self, grid) -> None:
        if self.order not in ORDERS:
            raise ValueError(f"derivative order must be 1 or 2, got {self.order}")
        if not 0 <= self.axis < grid.ndim:
            raise ValueError(f"axis {self.axis} out of range for {grid.ndim}-D grid")


@dataclass(frozen=True)
class DiffResult:
    derivative: Field
    valid_mask: np.ndarray
    notes: tuple[str, ...] = dc_field(default=())

    def __post_init__(self) -> None:
        mask = np.asarray(self.valid_mask, dtype=bool).reshape(self.derivative.grid.shape)
        mask = mask.copy()
        mask.flags.writeable = False
        object.__setattr__(self, "valid_mask", mask)


@dataclass(frozen=True)
class FiniteDiffConfig:
    scheme: str = "central"

    def __post_init__(self) -> None:
        if self.scheme not in FD_SCHEMES:
            raise ValueError(f"unknown finite-difference scheme {self.scheme!r}")


def _moved(values: np.ndarray, axis: int) -> np.ndarray:
    return np.moveaxis(values, axis, -1)


def fd_differentiate(data: Field, req: DiffRequest, scheme: str = "central") -> DiffResult:
    """Finite-difference derivative along one axis.

    Order 1 supports the forward scheme (u[i+1]-u[i])/step and the central
    scheme (u[i+1]-u[i-1])/(2 step); order 2 always uses the central
    three-point stencil.  Nodes lacking the full stencil get a one-sided
    first-order fallback value and are masked False.
    """
    req.validate(data.grid)
    if scheme not in FD_SCHEMES:
        raise ValueError(f"unknown finite-difference scheme {scheme!r}")
    axis = req.axis
    n = data.grid.shape[axis]
    if n < 3:
        raise ValueError("finite differences need at least 3 nodes along the axis")
    step = data.grid.axes[axis].step

    u = _moved(data.values, axis)
    out = np.empty_like(u)
    mask = np.zeros(u.shape, dtype=bool)

    if req.order == 1 and scheme == "forward":
        out[..., :-1] = (u[..., 1:] - u[..., :-1]) / step
        out[..., -1] = (u[..., -1] - u[..., -2]) / step  # backward fallback
        mask[..., :-1] = True
    elif req.order == 1:
        out[..., 1:-1] = (u[..., 2:] - u[..., :-2]) / (2.0 * step)
        out[..., 0] = (u[..., 1] - u[..., 0]) / step
        out[..., -1] = (u[..., -1] - u[..., -2]) / step
        mask[..., 1:-1] = True
    else:
        out[..., 1:-1] = (u[..., 2:] - 2.0 * u[..., 1:-1] + u[..., :-2]) / step**2
        out[..., 0] = (u[..., 2] - 2.0 * u[..., 1] + u[..., 0]) / step**2
        out[..., -1] = (u[..., -1] - 2.0 * u[..., -2] + u[..., -3]) / step**2
        mask[..., 1:-1] = True

    deriv = Field(data.grid, np.moveaxis(out, -1, axis))
    return DiffResult(deriv, np.moveaxis(mask, -1, axis))


def differentiate(data: Field, req: DiffRequest, cfg) -> DiffResult:
    """Dispatch to the method selected by the config object's type."""
    req.validate(data.grid)
    if isinstance(cfg, FiniteDiffConfig):
        return fd_differentiate(data, req, cfg.scheme)

    # Method modules import DiffRequest/DiffResult from here, so resolve
    # their configs lazily to keep imports acyclic.
    from . import annsmooth, savgol, spectral, totalvar

    if isinstance(cfg, savgol.SavGolConfig):
        return savgol.savgol_differentiate(data, req, cfg)
    if isinstance(cfg, spectral.SpectralConfig):
        return spectral.spectral_differentiate(data, req, cfg)
    if isinstance(cfg, annsmooth.AnnConfig):
        return annsmooth.ann_differentiate(data, req, cfg)
    if isinstance(cfg, totalvar.TvConfig):
        return totalvar.tv_differentiate(data, req, cfg)
    raise TypeError(f"unknown differentiation config {type(cfg).__name__}")
