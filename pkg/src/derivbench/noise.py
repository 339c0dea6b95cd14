"""State-scaled Gaussian measurement noise.

Each node receives an independent perturbation with standard deviation
``kappa * |clean value|``, so the noise floor tracks the signal magnitude
and vanishes where the signal does.  Realizations are produced by a
counter-based Philox generator keyed by the seed and converted to normals
through the inverse CDF, so node ``i`` always receives the ``i``-th variate
regardless of iteration order or thread count.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

from .core import Field


@dataclass(frozen=True)
class NoiseSpec:
    """Relative noise scale and RNG seed; kappa = 0 is the identity."""

    kappa: float
    seed: int = 0

    def __post_init__(self) -> None:
        if not self.kappa >= 0:
            raise ValueError(f"kappa must be >= 0, got {self.kappa}")


def standard_normals(count: int, seed: int) -> np.ndarray:
    """`count` standard normal variates, bit-reproducible for a seed.

    Uniforms are drawn as (k + 0.5) / 2^53 with k a 53-bit Philox integer,
    keeping them strictly inside (0, 1) before the inverse-CDF transform.
    """
    gen = np.random.Generator(np.random.Philox(key=seed))
    u = (gen.integers(0, 1 << 53, size=count).astype(np.float64) + 0.5) / float(1 << 53)
    return ndtri(u)


def contaminate(clean: Field, spec: NoiseSpec) -> Field:
    """Add Normal(0, (kappa*|value|)^2) noise to every node of `clean`."""
    if spec.kappa == 0.0:
        return clean
    z = standard_normals(clean.grid.size, spec.seed).reshape(clean.grid.shape)
    sigma = spec.kappa * np.abs(clean.values)
    return Field(clean.grid, clean.values + sigma * z)
