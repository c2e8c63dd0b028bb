"""Kernel density estimation of the swarm and the density-feedback rates.

The estimated density drives two reaction rates: a stopping rate that is
active where the swarm is below its target density, and a resumption rate
that is active where it is above.  Exactly one of the two is nonzero at any
point (their supports are the two half-lines), which the stability argument
for the closed loop relies on.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np
from scipy.integrate import quad

Array = np.ndarray

#: transition rates are clipped here so the (in principle unbounded) linear
#: ramp reactions behave like the bounded rates the analysis assumes
DEFAULT_RATE_CAP = 1e6


class KernelVariant(str, Enum):
    EUCLIDEAN = "euclidean"
    SPHERE = "sphere"


def bump_profile(u: Array) -> Array:
    """The compactly supported mollifier profile exp(-1 / (1 - u^2)) on |u| < 1."""
    u = np.asarray(u, dtype=float)
    # evaluated branch-free: outside the support the exponent is positive or
    # infinite and the result is masked to zero, so the warnings are moot
    with np.errstate(divide="ignore", over="ignore"):
        w = np.exp(-1.0 / (1.0 - u * u))
    return np.where(np.abs(u) < 1.0, w, 0.0)


def _unit_radial_integral(dim: int) -> float:
    """integral of the profile over the unit ball in R^dim, epsilon = 1."""
    surface = {1: 2.0, 2: 2.0 * np.pi, 3: 4.0 * np.pi}[dim]
    val, err = quad(lambda r: np.exp(-1.0 / (1.0 - r * r)) * r ** (dim - 1), 0.0, 1.0,
                    epsabs=1e-13, epsrel=1e-11)
    if err > 1e-8 * max(val, 1e-300):
        raise ArithmeticError(f"kernel normalization quadrature did not converge: err={err}")
    return surface * val


def _sphere_cap_integral(epsilon: float) -> float:
    """integral of the geodesic bump over S^2: 2 pi  int_0^eps g(theta/eps) sin(theta) dtheta."""
    val, err = quad(
        lambda th: np.exp(-1.0 / (1.0 - (th / epsilon) ** 2)) * np.sin(th),
        0.0, epsilon, epsabs=1e-13, epsrel=1e-11,
    )
    if err > 1e-8 * max(val, 1e-300):
        raise ArithmeticError(f"kernel normalization quadrature did not converge: err={err}")
    return 2.0 * np.pi * val


@dataclass(frozen=True)
class Kernel:
    """Compactly supported bump kernel with bandwidth ``epsilon``.

    Parameters
    ----------
    epsilon : float
        Support radius: Euclidean distance for the box variant, geodesic
        angle (radians) for the sphere variant.
    variant : KernelVariant
    dim : int
        Ambient dimension for the Euclidean variant (1, 2 or 3); ignored for
        the sphere variant (always the 2-sphere in R^3).
    """

    epsilon: float
    variant: KernelVariant = KernelVariant.EUCLIDEAN
    dim: int = 3
    c_eps: float = field(init=False, default=0.0)

    def __post_init__(self) -> None:
        if self.epsilon <= 0:
            raise ValueError(f"kernel bandwidth must be positive, got {self.epsilon}")
        if self.variant == KernelVariant.SPHERE:
            if self.epsilon > np.pi:
                raise ValueError("sphere kernel bandwidth cannot exceed pi")
            c = 1.0 / _sphere_cap_integral(self.epsilon)
        else:
            if self.dim not in (1, 2, 3):
                raise ValueError(f"euclidean kernel supports dim 1..3, got {self.dim}")
            # c(eps) = 1 / (eps^d * I_d(1)) by the change of variables r -> eps u
            c = 1.0 / (self.epsilon ** self.dim * _unit_radial_integral(self.dim))
        object.__setattr__(self, "c_eps", c)

    def distance(self, x: Array, y: Array) -> Array:
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if self.variant == KernelVariant.SPHERE:
            dots = np.clip(np.sum(x * y, axis=-1), -1.0, 1.0)
            return np.arccos(dots)
        if x.ndim == 1 and y.ndim == 1 and self.dim == 1:
            return np.abs(x - y)
        return np.linalg.norm(x - y, axis=-1)

    @property
    def support_radius_ambient(self) -> float:
        """Support radius in ambient coordinates (chord length on the sphere)."""
        if self.variant == KernelVariant.SPHERE:
            return 2.0 * np.sin(min(self.epsilon, np.pi) / 2.0)
        return self.epsilon


def kernel_value(kernel: Kernel, x: Array, y: Array) -> Array:
    """Unnormalized kernel weight K_eps(x, y); zero at and beyond the support."""
    return bump_profile(kernel.distance(x, y) / kernel.epsilon)


def normalization_constant(kernel: Kernel) -> float:
    """The constant c(eps) making ``c(eps) * int K_eps(x, y) dx = 1``."""
    return kernel.c_eps


class SpatialHash:
    """Uniform-grid neighbor lookup with cell width equal to the support radius.

    Sources are bucketed once per step by a single writer; queries then read
    the immutable arrays.  Candidate lists are produced in a deterministic
    order (on a line, sorted by coordinate; otherwise cells in lexicographic
    offset order with sources in stable sorted order inside each cell), so
    downstream reductions are reproducible regardless of how queries are
    chunked across threads.
    """

    def __init__(self, points: Array, cell: float, lo: Array, hi: Array) -> None:
        points = np.asarray(points, dtype=float)
        if points.ndim == 1:
            points = points[:, None]
        self.points = points
        self.dim = points.shape[1]
        self.lo = np.broadcast_to(np.asarray(lo, dtype=float), (self.dim,)).copy()
        hi = np.broadcast_to(np.asarray(hi, dtype=float), (self.dim,)).copy()
        if cell <= 0:
            raise ValueError(f"cell width must be positive, got {cell}")
        self.cell = float(cell)

        if self.dim == 1:
            # on a line, plain coordinate order answers range queries exactly
            self.order = np.argsort(points[:, 0], kind="stable")
            self.sorted_points = points[self.order]
            return

        self.shape = np.maximum(((hi - self.lo) / self.cell).astype(int), 1) + 1
        self.strides = np.cumprod(np.concatenate(([1], self.shape[:-1].astype(np.int64))))
        ncells = int(np.prod(self.shape))

        if len(points) == 0:
            self.order = np.empty(0, dtype=np.int64)
            self.sorted_points = points
            self.cell_starts = np.zeros(ncells + 1, dtype=np.int64)
            return

        idx = self._cell_coords(points)
        flat = idx @ self.strides
        self.order = np.argsort(flat, kind="stable")
        self.sorted_points = points[self.order]
        sorted_flat = flat[self.order]
        self.cell_starts = np.searchsorted(sorted_flat, np.arange(ncells + 1))

    def _cell_coords(self, points: Array) -> Array:
        idx = np.floor((points - self.lo) / self.cell).astype(np.int64)
        return np.clip(idx, 0, self.shape - 1)

    def candidate_segments(self, queries: Array) -> tuple[Array, Array]:
        """Candidate source indices (into the sorted order) for each query.

        Returns ``(candidates, counts)`` where ``candidates`` concatenates,
        query by query, the sources from the 3^dim neighboring cells, and
        ``counts[i]`` is the number of candidates of query ``i``.
        """
        queries = np.asarray(queries, dtype=float)
        if queries.ndim == 1:
            queries = queries[:, None]
        nq = len(queries)
        if len(self.sorted_points) == 0 or nq == 0:
            return np.empty(0, dtype=np.int64), np.zeros(nq, dtype=np.int64)

        if self.dim == 1:
            xs = self.sorted_points[:, 0]
            starts_q = np.searchsorted(xs, queries[:, 0] - self.cell, side="left")
            ends_q = np.searchsorted(xs, queries[:, 0] + self.cell, side="right")
            lens = ends_q - starts_q
            return _expand_runs(starts_q, lens), lens

        base = self._cell_coords(queries)
        offsets = np.stack(
            np.meshgrid(*([np.arange(-1, 2)] * self.dim), indexing="ij"), axis=-1
        ).reshape(-1, self.dim)

        starts_per = np.empty((len(offsets), nq), dtype=np.int64)
        ends_per = np.empty_like(starts_per)
        for k, off in enumerate(offsets):
            cells = base + off
            valid = np.all((cells >= 0) & (cells < self.shape), axis=1)
            flat = np.where(valid, np.clip(cells, 0, self.shape - 1) @ self.strides, 0)
            starts = self.cell_starts[flat]
            ends = self.cell_starts[flat + 1]
            starts_per[k] = np.where(valid, starts, 0)
            ends_per[k] = np.where(valid, ends, 0)

        # per query: concatenate the (up to 3^dim) contiguous runs in fixed order
        starts_q = starts_per.T.reshape(-1)  # query-major
        ends_q = ends_per.T.reshape(-1)
        lens = ends_q - starts_q
        counts = lens.reshape(nq, -1).sum(axis=1)
        return _expand_runs(starts_q, lens), counts


def _expand_runs(starts: Array, lens: Array) -> Array:
    """Concatenate the index runs ``[starts[i], starts[i] + lens[i])``."""
    total = int(lens.sum())
    if total == 0:
        return np.empty(0, dtype=np.int64)
    rep_starts = np.repeat(starts, lens)
    within = np.arange(total, dtype=np.int64) - np.repeat(
        np.concatenate(([0], np.cumsum(lens)[:-1])), lens
    )
    return rep_starts + within


def kde(
    kernel: Kernel,
    positions: Array,
    n_total: int,
    x: Array,
    spatial_hash: Optional[SpatialHash] = None,
    lo: Optional[Array] = None,
    hi: Optional[Array] = None,
) -> Array:
    """Regularized empirical density at query point(s) ``x``.

    ``positions`` is the subset of agents contributing mass; ``n_total`` is
    the full swarm size and always serves as the denominator.  Queries are
    answered through a uniform spatial hash whose cell width equals the
    kernel support, so the cost per query is proportional to the number of
    actual neighbors rather than the swarm size.

    Returns ``c(eps) / n_total * sum_j K_eps(x, p_j)``; a single query point
    gives a scalar, a batch gives an array.
    """
    if n_total < 1:
        raise ValueError(f"n_total must be at least 1, got {n_total}")
    positions = np.asarray(positions, dtype=float)
    x = np.asarray(x, dtype=float)
    if kernel.variant == KernelVariant.SPHERE or kernel.dim > 1:
        single = x.ndim == 1
        queries = x[None, :] if single else x
    else:
        single = x.ndim == 0
        queries = np.atleast_1d(x)

    if positions.size == 0:
        out = np.zeros(len(queries))
        return out[0] if single else out

    if spatial_hash is None:
        if lo is None or hi is None:
            pts2 = positions if positions.ndim > 1 else positions[:, None]
            q2 = queries if queries.ndim > 1 else queries[:, None]
            lo = np.minimum(pts2.min(axis=0), q2.min(axis=0))
            hi = np.maximum(pts2.max(axis=0), q2.max(axis=0))
        spatial_hash = SpatialHash(positions, kernel.support_radius_ambient, lo, hi)

    cand, counts = spatial_hash.candidate_segments(queries)
    qid = np.repeat(np.arange(len(queries)), counts)
    src = spatial_hash.sorted_points[cand]
    qpt = (queries if queries.ndim > 1 else queries[:, None])[qid]
    if kernel.variant == KernelVariant.SPHERE:
        d = np.arccos(np.clip(np.sum(qpt * src, axis=-1), -1.0, 1.0))
    elif src.shape[1] == 1:
        d = np.abs(qpt[:, 0] - src[:, 0])
    else:
        d = np.linalg.norm(qpt - src, axis=-1)
    # dropping zero-weight candidates cannot change any partial sum, so the
    # result is bit-identical while the transcendental work shrinks
    inside = d < kernel.epsilon
    if not inside.all():
        d = d[inside]
        qid = qid[inside]
    w = bump_profile(d / kernel.epsilon)
    sums = np.bincount(qid, weights=w, minlength=len(queries))
    out = kernel.c_eps * sums / float(n_total)
    return out[0] if single else out


@dataclass(frozen=True)
class ReactionFunctions:
    """Linear-ramp reaction pair with gain ``k``.

    ``r1`` is supported on the negative half-line (density deficit: stop),
    ``r2`` on the positive half-line (density excess: resume); both are
    nonnegative and globally Lipschitz with constant ``k``.
    """

    k: float

    def __post_init__(self) -> None:
        if self.k <= 0:
            raise ValueError(f"reaction gain must be positive, got {self.k}")

    def r1(self, s: Array) -> Array:
        s = np.asarray(s, dtype=float)
        return np.where(s < 0.0, -self.k * s, 0.0)

    def r2(self, s: Array) -> Array:
        s = np.asarray(s, dtype=float)
        return np.where(s > 0.0, self.k * s, 0.0)


def transition_rates(
    reactions: ReactionFunctions,
    rho: Array,
    target: Array,
    q_max: float = DEFAULT_RATE_CAP,
) -> tuple[Array, Array]:
    """Stopping and resumption rates from the estimated density mismatch.

    ``q1`` fires where the estimate falls short of the target, ``q2`` where
    it exceeds it; at most one of them is nonzero at any point.  Rates are
    clipped at ``q_max`` to retain the boundedness the closed-loop analysis
    assumes of the reaction functions.
    """
    rho = np.asarray(rho, dtype=float)
    target = np.asarray(target, dtype=float)
    if np.any(~np.isfinite(rho)) or np.any(~np.isfinite(target)):
        raise ValueError("transition_rates: inputs must be finite")
    if np.any(rho < 0.0) or np.any(target < 0.0):
        raise ValueError("transition_rates: densities must be nonnegative")
    s = rho - target
    q1 = np.minimum(reactions.r1(s), q_max)
    q2 = np.minimum(reactions.r2(s), q_max)
    return q1, q2
