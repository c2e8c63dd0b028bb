"""State spaces: a reflecting box in R^n and the boundaryless unit sphere.

The box's reflection map is the discrete-time surrogate for the boundary
local-time term of a reflected diffusion: a point that left the box is folded
back by specular (mirror) reflection, applied per axis and repeated until the
point is inside.  The sphere has no boundary; a retraction to unit norm is
applied after every step purely to cancel floating-point drift.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

Array = np.ndarray

#: membership tolerance for the unit sphere
SPHERE_NORM_TOL = 1e-9


@dataclass(frozen=True)
class BoxDomain:
    """Axis-aligned box ``[lo_1, hi_1] x ... x [lo_d, hi_d]``."""

    lo: Array
    hi: Array

    def __post_init__(self) -> None:
        lo = np.atleast_1d(np.asarray(self.lo, dtype=float))
        hi = np.atleast_1d(np.asarray(self.hi, dtype=float))
        if lo.shape != hi.shape or lo.ndim != 1:
            raise ValueError("box bounds must be 1-D arrays of equal length")
        if not np.all(lo < hi):
            raise ValueError(f"box bounds must satisfy lo < hi per axis, got lo={lo}, hi={hi}")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def dim(self) -> int:
        return self.lo.size

    @property
    def widths(self) -> Array:
        return self.hi - self.lo

    @property
    def volume(self) -> float:
        return float(np.prod(self.widths))

    def contains(self, x: Array, atol: float = 0.0) -> Array:
        x = np.asarray(x, dtype=float)
        return np.all((x >= self.lo - atol) & (x <= self.hi + atol), axis=-1)

    def reflect(self, x: Array) -> Array:
        """Fold ``x`` back into the box by repeated mirror reflection.

        Uses the sawtooth identity: reflecting across both faces of an axis
        is periodic with period ``2 * width``, and within one period the
        first half maps identically while the second half mirrors.  This is
        exact for any excursion depth and idempotent on interior points.
        """
        x = np.asarray(x, dtype=float)
        if not np.all(np.isfinite(x)):
            raise ValueError("reflect: position contains non-finite values")
        width = self.widths
        z = np.mod(x - self.lo, 2.0 * width)
        return self.lo + np.where(z > width, 2.0 * width - z, z)

    def uniform_sample(self, rng: np.random.Generator, n: int) -> Array:
        return self.lo + rng.random((n, self.dim)) * self.widths


@dataclass(frozen=True)
class SphereDomain:
    """The unit sphere S^2 embedded in R^3 (no parameters, no boundary)."""

    dim: int = field(default=3, init=False)

    def contains(self, x: Array, atol: float = SPHERE_NORM_TOL) -> Array:
        x = np.asarray(x, dtype=float)
        return np.abs(np.linalg.norm(x, axis=-1) - 1.0) <= atol

    def retract(self, x: Array) -> Array:
        """Normalize back onto the sphere; rejects (near-)zero vectors."""
        x = np.asarray(x, dtype=float)
        norms = np.linalg.norm(x, axis=-1, keepdims=True)
        if np.any(norms == 0.0):
            raise FloatingPointError("retract: zero vector has no direction")
        return x / norms

    def geodesic_distance(self, x: Array, y: Array) -> Array:
        """Great-circle distance in radians; clamping guards roundoff."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        dots = np.clip(np.sum(x * y, axis=-1), -1.0, 1.0)
        return np.arccos(dots)

    def tangent_projector(self, x: Array):
        """Projector onto the tangent plane at unit vector ``x``."""
        x = np.asarray(x, dtype=float)

        def project(v: Array) -> Array:
            return v - np.sum(v * x, axis=-1, keepdims=True) * x

        return project

    def uniform_sample(self, rng: np.random.Generator, n: int) -> Array:
        g = rng.standard_normal((n, 3))
        return g / np.linalg.norm(g, axis=-1, keepdims=True)
