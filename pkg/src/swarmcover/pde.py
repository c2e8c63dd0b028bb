"""Grid-based reference solvers for the density evolution equations.

Two models are discretized on uniform 1-D/2-D grids with zero-flux walls:

* the linear model ``y_t = div(b grad(a y))``, whose equilibrium is the
  density ``f = 1/a`` (up to normalization), solved in conservative
  finite-volume form so total mass is conserved structurally; and
* the semilinear two-state system in which only the "moving" density ``y1``
  diffuses while mass exchanges with the "motionless" density ``y2`` at
  density-dependent rates.

The semilinear stepper is a Strang split: half reaction, full diffusion,
half reaction.  Each reaction substep applies the exact exponential of the
per-cell 2x2 rate matrix with rates frozen at the substep start, which keeps
both densities nonnegative unconditionally and conserves mass to roundoff.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .meanfield import ReactionFunctions

Array = np.ndarray


@dataclass(frozen=True)
class Grid:
    """Uniform cell-centered grid on a box, 1-D or 2-D."""

    lo: Array
    hi: Array
    shape: tuple[int, ...]

    def __post_init__(self) -> None:
        lo = np.atleast_1d(np.asarray(self.lo, dtype=float))
        hi = np.atleast_1d(np.asarray(self.hi, dtype=float))
        shape = tuple(int(n) for n in np.atleast_1d(self.shape))
        if len(shape) not in (1, 2):
            raise ValueError(f"grids are 1-D or 2-D, got shape {shape}")
        if lo.size != len(shape) or hi.size != len(shape):
            raise ValueError("grid bounds and shape disagree on dimension")
        if any(n < 1 for n in shape):
            raise ValueError(f"grid needs at least one cell per axis, got {shape}")
        if not np.all(lo < hi):
            raise ValueError("grid bounds must satisfy lo < hi")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        object.__setattr__(self, "shape", shape)

    @property
    def dim(self) -> int:
        return len(self.shape)

    @property
    def h(self) -> Array:
        return (self.hi - self.lo) / np.array(self.shape, dtype=float)

    @property
    def cellvol(self) -> float:
        return float(np.prod(self.h))

    def centers(self, axis: int = 0) -> Array:
        n = self.shape[axis]
        h = self.h[axis]
        return self.lo[axis] + h * (np.arange(n) + 0.5)

    def points(self) -> Array:
        """All cell centers as an array of shape ``shape + (dim,)``."""
        axes = [self.centers(k) for k in range(self.dim)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack(mesh, axis=-1)


@dataclass
class GridField:
    """Cell-averaged values on a grid."""

    grid: Grid
    values: Array

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=float)
        if values.shape != self.grid.shape:
            raise ValueError(
                f"field shape {values.shape} does not match grid shape {self.grid.shape}"
            )
        if not np.all(np.isfinite(values)):
            raise ValueError("grid field contains non-finite values")
        self.values = values

    @property
    def mass(self) -> float:
        return float(self.values.sum() * self.grid.cellvol)

    def copy(self) -> "GridField":
        return GridField(self.grid, self.values.copy())


def field_from_function(grid: Grid, fn: Callable[[Array], Array]) -> GridField:
    """Sample a pointwise function at cell centers."""
    return GridField(grid, np.asarray(fn(grid.points()), dtype=float))


@dataclass(frozen=True)
class CoefficientPair:
    """Strictly positive coefficient fields (a, b) of the linear operator."""

    a: GridField
    b: GridField

    def __post_init__(self) -> None:
        ga, gb = self.a.grid, self.b.grid
        same = ga is gb or (
            ga.shape == gb.shape
            and np.array_equal(ga.lo, gb.lo)
            and np.array_equal(ga.hi, gb.hi)
        )
        if not same:
            raise ValueError("coefficients must live on the same grid")
        if self.a.values.min() <= 0 or self.b.values.min() <= 0:
            raise ValueError("coefficients must be strictly positive")
        # face weights 0.5 (b_left + b_right) / h^2, one array per axis;
        # precomputed here because b never changes between steps
        faces = []
        b = self.b.values
        for axis in range(self.grid.dim):
            lead = tuple(slice(None) for _ in range(axis))
            left, right = b[lead + (slice(None, -1),)], b[lead + (slice(1, None),)]
            faces.append(0.5 * (left + right) / self.grid.h[axis] ** 2)
        object.__setattr__(self, "_faces", tuple(faces))

    @property
    def grid(self) -> Grid:
        return self.a.grid


def stability_bound(coef: CoefficientPair) -> float:
    """Largest explicit-Euler step: ``h^2 / (2 dim max(a b))``."""
    grid = coef.grid
    hmin = float(grid.h.min())
    return hmin * hmin / (2.0 * grid.dim * float((coef.a.values * coef.b.values).max()))


def _check_dt(dt: float, coef: CoefficientPair) -> None:
    bound = stability_bound(coef)
    if dt > bound:
        raise ValueError(
            f"time step {dt:g} exceeds the explicit stability bound "
            f"h^2/(2 dim max(ab)) = {bound:g}"
        )


def _diffusion_increment(
    y: Array,
    coef: CoefficientPair,
    out: Optional[Array] = None,
    work: Optional[tuple] = None,
) -> Array:
    """Flux-form increment of ``div(b grad(a y))`` with zero-flux walls.

    The face flux is ``b_face * (p_right - p_left) / h`` with ``p = a y`` and
    ``b_face`` the arithmetic mean of the neighbor cells; boundary faces
    carry no flux, so summing the increment telescopes to zero and the total
    mass is conserved to roundoff.  ``work`` (from :func:`_work_buffers`)
    lets a caller in a tight loop avoid per-step allocations.
    """
    grid = coef.grid
    if out is None:
        out = np.zeros_like(y)
    else:
        out[...] = 0.0
    p_buf, flux_bufs = work if work is not None else _work_buffers(grid)
    p = np.multiply(coef.a.values, y, out=p_buf)
    for axis in range(grid.dim):
        lead = tuple(slice(None) for _ in range(axis))
        lo_sl, hi_sl = lead + (slice(None, -1),), lead + (slice(1, None),)
        flux = np.subtract(p[hi_sl], p[lo_sl], out=flux_bufs[axis])
        flux *= coef._faces[axis]
        out[lo_sl] += flux
        out[hi_sl] -= flux
    return out


def _work_buffers(grid: Grid) -> tuple:
    """Scratch arrays (p, per-axis face fluxes) for the diffusion kernel."""
    flux_bufs = []
    for axis in range(grid.dim):
        shape = list(grid.shape)
        shape[axis] -= 1
        flux_bufs.append(np.empty(shape))
    return np.empty(grid.shape), tuple(flux_bufs)


def step_linear(y: GridField, coef: CoefficientPair, dt: float) -> GridField:
    """One explicit conservative step of the linear model."""
    _check_dt(dt, coef)
    inc = _diffusion_increment(y.values, coef)
    return GridField(y.grid, y.values + dt * inc)


def run_linear(
    y0: GridField,
    coef: CoefficientPair,
    t_final: float,
    dt: float,
    observer: Optional[Callable[[float, Array], None]] = None,
    observe_every: int = 1,
) -> GridField:
    """Advance the linear model to ``t_final``, reporting snapshots.

    The number of steps is ``round(t_final / dt)``; the observer receives
    ``(t, values)`` with a read-only view of the current state.
    """
    _check_dt(dt, coef)
    y = y0.values.copy()
    inc = np.zeros_like(y)
    work = _work_buffers(coef.grid)
    n_steps = int(round(t_final / dt))
    if observer is not None:
        observer(0.0, y)
    for step in range(1, n_steps + 1):
        _diffusion_increment(y, coef, out=inc, work=work)
        inc *= dt
        y += inc
        if observer is not None and (step % observe_every == 0 or step == n_steps):
            observer(step * dt, y)
    return GridField(y0.grid, y)


# ---------------------------------------------------------------------------
# Semilinear two-state system
# ---------------------------------------------------------------------------


def _reaction_exchange(
    y1: Array, y2: Array, target: Array, reactions: ReactionFunctions, tau: float
) -> tuple[Array, Array]:
    """Exact exponential of the frozen per-cell exchange over time ``tau``.

    With rates q1 (stop) and q2 (resume) frozen, the pair solves a linear
    2-state system whose propagator is a stochastic matrix; writing the
    update in flux form ``phi(tau) * (q1 y1 - q2 y2)`` conserves y1 + y2
    exactly and cannot produce negative values as long as phi * max(q) <= 1,
    which holds for the exact phi = (1 - exp(-(q1+q2) tau)) / (q1+q2).
    """
    s = y2 - target
    q1 = reactions.r1(s)
    q2 = reactions.r2(s)
    total = q1 + q2
    safe = np.where(total > 0.0, total, 1.0)
    phi = np.where(total > 0.0, -np.expm1(-total * tau) / safe, tau)
    flux = phi * (q1 * y1 - q2 * y2)
    return y1 - flux, y2 + flux


def reaction_dt_bound(
    y1: GridField, y2: GridField, target: GridField, reactions: ReactionFunctions
) -> float:
    """Step bound ``dt max(q) < 1`` evaluated at the current state."""
    s = y2.values - target.values
    qmax = float(np.maximum(reactions.r1(s), reactions.r2(s)).max())
    if qmax == 0.0:
        return np.inf
    return 1.0 / qmax


def step_semilinear(
    y1: GridField,
    y2: GridField,
    target: GridField,
    reactions: ReactionFunctions,
    coef: CoefficientPair,
    dt: float,
) -> tuple[GridField, GridField]:
    """One Strang-split step of the two-state system.

    Half reaction, full diffusion of the moving density, half reaction.
    Inputs must be nonnegative; ``dt`` must respect both the diffusion
    stability bound and the frozen-rate bound ``dt * max(q) < 1``.
    """
    if y1.values.min() < -1e-13 or y2.values.min() < -1e-13:
        raise ValueError("semilinear step requires nonnegative densities")
    _check_dt(dt, coef)
    bound = reaction_dt_bound(y1, y2, target, reactions)
    if dt >= bound:
        raise ValueError(
            f"time step {dt:g} exceeds the reaction bound 1/max(q) = {bound:g}"
        )
    v1, v2 = _reaction_exchange(y1.values, y2.values, target.values, reactions, 0.5 * dt)
    v1 = v1 + dt * _diffusion_increment(v1, coef)
    v1, v2 = _reaction_exchange(v1, v2, target.values, reactions, 0.5 * dt)
    return GridField(y1.grid, v1), GridField(y2.grid, v2)


def run_semilinear(
    y1_0: GridField,
    y2_0: GridField,
    target: GridField,
    reactions: ReactionFunctions,
    coef: CoefficientPair,
    t_final: float,
    dt: float,
    observer: Optional[Callable[[float, Array, Array], None]] = None,
    observe_every: int = 1,
) -> tuple[GridField, GridField]:
    """Advance the two-state system to ``t_final`` (fast in-place loop)."""
    if y1_0.values.min() < -1e-13 or y2_0.values.min() < -1e-13:
        raise ValueError("semilinear run requires nonnegative initial densities")
    _check_dt(dt, coef)
    # The exponential reaction substeps stay nonnegative for any dt; the
    # bound below is an accuracy guard checked against the initial rates.
    bound = reaction_dt_bound(y1_0, y2_0, target, reactions)
    if dt >= bound:
        raise ValueError(
            f"time step {dt:g} exceeds the reaction bound 1/max(q) = {bound:g}"
        )
    y1 = y1_0.values.copy()
    y2 = y2_0.values.copy()
    tgt = target.values
    inc = np.zeros_like(y1)
    work = _work_buffers(coef.grid)
    n_steps = int(round(t_final / dt))
    if observer is not None:
        observer(0.0, y1, y2)
    for step in range(1, n_steps + 1):
        y1, y2 = _reaction_exchange(y1, y2, tgt, reactions, 0.5 * dt)
        _diffusion_increment(y1, coef, out=inc, work=work)
        inc *= dt
        y1 += inc
        y1, y2 = _reaction_exchange(y1, y2, tgt, reactions, 0.5 * dt)
        if observer is not None and (step % observe_every == 0 or step == n_steps):
            observer(step * dt, y1, y2)
    return GridField(y1_0.grid, y1), GridField(y2_0.grid, y2)
