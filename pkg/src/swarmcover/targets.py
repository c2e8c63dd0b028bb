"""Target probability densities and the named builders the scenarios use.

Every target is normalized to unit mass over its domain.  The normalization
constant is computed in closed form from the geometry (ball volumes, cap
areas), then cross-checked at construction by an independent quadrature
reduced to one dimension (radial for balls, polar for caps), which converges
properly even though the densities themselves are indicators.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.integrate import quad

from .domains import BoxDomain, SphereDomain

Array = np.ndarray

#: relative tolerance on the construction-time mass check
MASS_RTOL = 1e-3


@dataclass(frozen=True)
class TargetDensity:
    """A normalized density with pointwise evaluation.

    Parameters
    ----------
    name : str
        Builder name, echoed into run metadata.
    dim : int
        Ambient dimension of evaluation points.
    eval : callable
        Vectorized map from points ``(..., dim)`` to density values ``(...)``.
    mass_quadrature : float
        Independently computed integral of ``eval`` over the domain; must be
        within ``MASS_RTOL`` of one, which is checked at construction.
    min_value : float
        Infimum of the density over the domain (0 where the support does not
        cover the domain); used to validate control laws that need a positive
        floor.
    """

    name: str
    dim: int
    eval: Callable[[Array], Array]
    mass_quadrature: float
    min_value: float

    def __post_init__(self) -> None:
        if not np.isfinite(self.mass_quadrature):
            raise ValueError(f"target '{self.name}': mass quadrature is not finite")
        if abs(self.mass_quadrature - 1.0) > MASS_RTOL:
            raise ValueError(
                f"target '{self.name}': quadrature mass {self.mass_quadrature:.6f} "
                f"deviates from 1 by more than {MASS_RTOL:g}"
            )

    def __call__(self, x: Array) -> Array:
        return self.eval(np.asarray(x, dtype=float))


# ---------------------------------------------------------------------------
# Box targets
# ---------------------------------------------------------------------------

BALL_RADIUS = 12.5
BALL_CENTERS = np.array(
    [[a, b, c] for a in (25.0, 75.0) for b in (25.0, 75.0) for c in (25.0, 75.0)]
)
FLOOR_LEVEL = 0.001


def uniform_box(domain: BoxDomain) -> TargetDensity:
    level = 1.0 / domain.volume

    def f(x: Array) -> Array:
        return np.full(x.shape[:-1], level)

    return TargetDensity("uniform", domain.dim, f, 1.0, level)


def eight_balls(
    domain: BoxDomain,
    floor: float = 0.0,
    radius: float = BALL_RADIUS,
    centers: Optional[Array] = None,
) -> TargetDensity:
    """Eight disjoint balls, optionally on a small uniform floor.

    With ``floor > 0`` the density is positive everywhere (as the
    non-interacting control law requires); with ``floor = 0`` it vanishes
    outside the balls, which only the switching law tolerates.
    """
    if domain.dim != 3:
        raise ValueError("ball targets are defined on a 3-D box")
    centers = BALL_CENTERS if centers is None else np.asarray(centers, dtype=float)
    if np.any(centers - radius < domain.lo) or np.any(centers + radius > domain.hi):
        raise ValueError("ball target: a ball pokes out of the domain")
    dists = np.linalg.norm(centers[:, None, :] - centers[None, :, :], axis=-1)
    np.fill_diagonal(dists, np.inf)
    if dists.min() < 2 * radius:
        raise ValueError("ball target: balls overlap, normalization would be wrong")

    ball_volume = 4.0 / 3.0 * np.pi * radius**3
    mass_unnormalized = len(centers) * ball_volume + floor * domain.volume
    c = 1.0 / mass_unnormalized

    def f(x: Array) -> Array:
        # disjointness lets the indicator sum be computed ball by ball
        d = np.linalg.norm(x[..., None, :] - centers, axis=-1)
        return c * (np.sum(d < radius, axis=-1) + floor)

    # independent mass check: radial quadrature per ball + exact floor term
    radial, _ = quad(lambda r: 4.0 * np.pi * r * r, 0.0, radius)
    mass = c * (len(centers) * radial + floor * domain.volume)
    name = "balls8+floor" if floor > 0 else "balls8"
    return TargetDensity(name, 3, f, mass, c * floor)


# ---------------------------------------------------------------------------
# Sphere targets
# ---------------------------------------------------------------------------

CAP_THRESHOLD = 0.75


def uniform_sphere() -> TargetDensity:
    level = 1.0 / (4.0 * np.pi)

    def f(x: Array) -> Array:
        return np.full(x.shape[:-1], level)

    return TargetDensity("uniform-sphere", 3, f, 1.0, level)


def sphere_caps(threshold: float = CAP_THRESHOLD) -> TargetDensity:
    """Uniform density on the six polar caps ``max_i x_i^2 >= threshold``.

    Each cap has angular radius ``arccos(sqrt(threshold))`` about one of the
    coordinate axes' poles; with the default threshold the caps are disjoint.
    """
    if not 0.5 < threshold < 1.0:
        raise ValueError("cap threshold must lie in (0.5, 1) so the caps stay disjoint")
    cos_alpha = np.sqrt(threshold)
    cap_area = 2.0 * np.pi * (1.0 - cos_alpha)
    c = 1.0 / (6.0 * cap_area)

    def f(x: Array) -> Array:
        return np.where(np.max(x * x, axis=-1) >= threshold, c, 0.0)

    # polar quadrature of one cap, exact for the indicator in this coordinate
    alpha = np.arccos(cos_alpha)
    area, _ = quad(lambda th: 2.0 * np.pi * np.sin(th), 0.0, alpha)
    return TargetDensity("sphere-caps", 3, f, c * 6.0 * area, 0.0)


# ---------------------------------------------------------------------------
# 1-D targets (used by the grid solvers and the cross-validation runs)
# ---------------------------------------------------------------------------


def sine_profile_1d(domain: BoxDomain, amplitude: float = 0.5) -> TargetDensity:
    """f proportional to 1 + amplitude * sin(2 pi x / L) on a 1-D box."""
    if domain.dim != 1:
        raise ValueError("sine profile is one-dimensional")
    if not 0 < amplitude < 1:
        raise ValueError("amplitude must lie in (0, 1) so the density stays positive")
    lo, width = float(domain.lo[0]), float(domain.widths[0])
    # the sine integrates to zero over a full period, so the constant term
    # alone fixes the normalization
    c = 1.0 / width

    def f(x: Array) -> Array:
        x = np.asarray(x, dtype=float)
        coord = x[..., 0] if x.ndim and x.shape[-1] == 1 else x
        return c * (1.0 + amplitude * np.sin(2.0 * np.pi * (coord - lo) / width))

    mass, _ = quad(
        lambda t: c * (1.0 + amplitude * np.sin(2.0 * np.pi * (t - lo) / width)),
        lo, lo + width,
    )
    return TargetDensity("sine1d", 1, f, mass, c * (1.0 - amplitude))


def two_bumps_1d(
    domain: BoxDomain,
    intervals: Sequence[tuple[float, float]] = ((1.0, 1.5), (3.5, 4.0)),
) -> TargetDensity:
    """Uniform density on two disjoint intervals of a 1-D box."""
    if domain.dim != 1:
        raise ValueError("bump profile is one-dimensional")
    iv = sorted((float(a), float(b)) for a, b in intervals)
    lo, hi = float(domain.lo[0]), float(domain.hi[0])
    for (a, b) in iv:
        if not (lo <= a < b <= hi):
            raise ValueError(f"bump interval [{a}, {b}] not inside the domain [{lo}, {hi}]")
    for (_, b0), (a1, _) in zip(iv, iv[1:]):
        if b0 > a1:
            raise ValueError("bump intervals overlap")
    total = sum(b - a for a, b in iv)
    c = 1.0 / total

    def f(x: Array) -> Array:
        x = np.asarray(x, dtype=float)
        coord = x[..., 0] if x.ndim and x.shape[-1] == 1 else x
        out = np.zeros_like(coord, dtype=float)
        for a, b in iv:
            out += ((coord >= a) & (coord < b)) * c
        return out

    mass = sum(quad(lambda t: c, a, b)[0] for a, b in iv)
    return TargetDensity("two-bumps", 1, f, mass, 0.0)


# ---------------------------------------------------------------------------
# Grid-file targets and the builder registry
# ---------------------------------------------------------------------------


def grid_file_target(path: str) -> TargetDensity:
    """Piecewise-constant density loaded from an ``.npz`` file.

    The file must contain ``lo``, ``hi`` (per-axis bounds) and ``values``
    (cell averages on a uniform grid); the density is normalized by its own
    Riemann sum, which is exact for piecewise-constant data.
    """
    with np.load(path) as data:
        try:
            lo = np.atleast_1d(data["lo"]).astype(float)
            hi = np.atleast_1d(data["hi"]).astype(float)
            values = np.asarray(data["values"], dtype=float)
        except KeyError as exc:
            raise ValueError(f"grid target file {path}: missing array {exc}") from None
    if values.ndim != lo.size:
        raise ValueError(
            f"grid target file {path}: values have {values.ndim} axes "
            f"but bounds describe {lo.size}"
        )
    if np.any(values < 0):
        raise ValueError(f"grid target file {path}: negative density values")
    shape = np.array(values.shape)
    h = (hi - lo) / shape
    cellvol = float(np.prod(h))
    mass = float(values.sum() * cellvol)
    if mass <= 0:
        raise ValueError(f"grid target file {path}: zero total mass")
    values = values / mass

    def f(x: Array) -> Array:
        x = np.asarray(x, dtype=float)
        idx = np.floor((x - lo) / h).astype(int)
        idx = np.clip(idx, 0, shape - 1)
        return values[tuple(idx[..., k] for k in range(lo.size))]

    return TargetDensity(
        "grid-file", int(lo.size), f, float(values.sum() * cellvol), float(values.min())
    )


def build_target(kind: str, domain, **kwargs) -> TargetDensity:
    """Construct a named target on the given domain.

    Known kinds: ``balls8+floor``, ``balls8``, ``sphere-caps``, ``uniform``,
    ``sine1d``, ``two-bumps``, ``grid-file`` (requires ``path=...``).
    """
    if kind == "balls8+floor":
        return eight_balls(domain, floor=kwargs.get("floor", FLOOR_LEVEL))
    if kind == "balls8":
        return eight_balls(domain, floor=0.0)
    if kind == "sphere-caps":
        return sphere_caps(threshold=kwargs.get("threshold", CAP_THRESHOLD))
    if kind == "uniform":
        if isinstance(domain, SphereDomain):
            return uniform_sphere()
        return uniform_box(domain)
    if kind == "sine1d":
        return sine_profile_1d(domain, amplitude=kwargs.get("amplitude", 0.5))
    if kind == "two-bumps":
        if "intervals" in kwargs:
            return two_bumps_1d(domain, intervals=kwargs["intervals"])
        return two_bumps_1d(domain)
    if kind == "grid-file":
        if "path" not in kwargs:
            raise ValueError("grid-file target requires a 'path'")
        return grid_file_target(kwargs["path"])
    raise ValueError(
        f"unknown target kind '{kind}' (known: balls8+floor, balls8, sphere-caps, "
        "uniform, sine1d, two-bumps, grid-file)"
    )
