"""Convergence metrics, histograms, and run serialization.

The export format is a small fixed contract: ``snapshots_particles.csv``
(columns t, particle_id, x1, x2, x3, motion_state), ``metrics.csv``
(columns t, l1_to_target, moving_fraction, total_mass) and ``run.json``
(configuration echo plus seed and code version).  Downstream tooling reads
these files by header name, so the headers are frozen here as constants.
Floats are printed with 17 significant digits, enough for a bit-exact
round trip through text.
"""

from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import dataclass, field
from importlib import metadata
from pathlib import Path
from typing import Callable, Optional, Union

import numpy as np

from .pde import Grid, GridField

Array = np.ndarray

# Motion-state encoding shared with the particle simulator and the CSV files.
MOVING = 0
MOTIONLESS = 1

SNAPSHOT_HEADER = ("t", "particle_id", "x1", "x2", "x3", "motion_state")
METRICS_HEADER = ("t", "l1_to_target", "moving_fraction", "total_mass")
GRID_SNAPSHOT_HEADER = ("t", "cell_id", "x1", "x2", "x3", "y_moving", "y_motionless")

SNAPSHOTS_FILENAME = "snapshots_particles.csv"
GRID_SNAPSHOTS_FILENAME = "snapshots_grid.csv"
METRICS_FILENAME = "metrics.csv"
RUNINFO_FILENAME = "run.json"


def _fmt(x: float) -> str:
    """Format a double with 17 significant digits (lossless round trip)."""
    return format(float(x), ".17g")


def _code_version() -> str:
    try:
        return metadata.version("swarmcover")
    except metadata.PackageNotFoundError:
        return "0+unknown"


def moving_fraction(state) -> float:
    """Fraction of particles in the Moving state.

    Accepts either a swarm state object (anything with a ``motion_states``
    attribute) or a plain array of state codes.
    """
    states = np.asarray(getattr(state, "motion_states", state))
    if states.size == 0:
        raise ValueError("moving_fraction of an empty swarm is undefined")
    return float(np.count_nonzero(states == MOVING) / states.size)


def l1_distance(rho: GridField, target: GridField) -> float:
    """L1 distance between two cell-averaged densities on the same grid."""
    ga, gb = rho.grid, target.grid
    same = ga is gb or (
        ga.shape == gb.shape
        and np.array_equal(ga.lo, gb.lo)
        and np.array_equal(ga.hi, gb.hi)
    )
    if not same:
        raise ValueError("l1_distance requires densities on the same grid")
    return float(np.abs(rho.values - target.values).sum() * ga.cellvol)


def histogram_density(positions: Array, grid: Grid, n_total: int) -> GridField:
    """Bin particle positions into a density on a solver grid.

    Returns counts / (n_total * cellvol), which integrates to
    ``len(positions) / n_total`` exactly.  Positions outside the grid are
    counted in the nearest boundary cell, with a warning.
    """
    if n_total < 1:
        raise ValueError("n_total must be at least 1")
    pos = np.asarray(positions, dtype=float)
    if pos.ndim == 1:
        pos = pos[:, None]
    if pos.size and pos.shape[1] != grid.dim:
        raise ValueError(f"positions are {pos.shape[1]}-D but the grid is {grid.dim}-D")
    ncells = int(np.prod(grid.shape))
    if pos.shape[0] == 0:
        return GridField(grid, np.zeros(grid.shape))
    idx = np.floor((pos - grid.lo) / grid.h).astype(np.int64)
    clipped = np.clip(idx, 0, np.array(grid.shape) - 1)
    n_out = int(np.count_nonzero((idx != clipped).any(axis=1)))
    if n_out:
        warnings.warn(
            f"{n_out} position(s) outside the grid; counted to the nearest boundary cell",
            stacklevel=2,
        )
    flat = np.ravel_multi_index(tuple(clipped.T), grid.shape)
    counts = np.bincount(flat, minlength=ncells).reshape(grid.shape)
    return GridField(grid, counts / (n_total * grid.cellvol))


# ---------------------------------------------------------------------------
# Histogram bins for run metrics (box up to 3-D, sphere)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BoxBins:
    """Uniform histogram cells over a box, for particle-run metrics."""

    lo: Array
    hi: Array
    cells: tuple[int, ...]

    def __post_init__(self) -> None:
        lo = np.atleast_1d(np.asarray(self.lo, dtype=float))
        hi = np.atleast_1d(np.asarray(self.hi, dtype=float))
        cells = tuple(int(n) for n in np.atleast_1d(self.cells))
        if lo.size != len(cells) or hi.size != len(cells):
            raise ValueError("bin bounds and cell counts disagree on dimension")
        if not np.all(lo < hi) or any(n < 1 for n in cells):
            raise ValueError("need lo < hi and at least one cell per axis")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        object.__setattr__(self, "cells", cells)

    @property
    def dim(self) -> int:
        return len(self.cells)

    @property
    def widths(self) -> Array:
        return (self.hi - self.lo) / np.array(self.cells, dtype=float)

    @property
    def cellvol(self) -> float:
        return float(np.prod(self.widths))

    def counts(self, positions: Array) -> Array:
        pos = np.asarray(positions, dtype=float)
        if pos.ndim == 1:
            pos = pos[:, None]
        ncells = int(np.prod(self.cells))
        if pos.shape[0] == 0:
            return np.zeros(self.cells, dtype=np.int64)
        idx = np.floor((pos - self.lo) / self.widths).astype(np.int64)
        idx = np.clip(idx, 0, np.array(self.cells) - 1)
        flat = np.ravel_multi_index(tuple(idx.T), self.cells)
        return np.bincount(flat, minlength=ncells).reshape(self.cells)

    def density(self, positions: Array, n_total: int) -> Array:
        return self.counts(positions) / (n_total * self.cellvol)

    def target_values(self, target_eval: Callable[[Array], Array], subdiv: int = 4) -> Array:
        """Cell averages of a target density via midpoint subsampling.

        Indicator-type targets cut through cells, so a single center sample
        is biased; subdiv^dim midpoints per cell keep the averaging error
        small relative to the statistical noise of the histograms.
        """
        axes = []
        for k in range(self.dim):
            n = self.cells[k] * subdiv
            w = (self.hi[k] - self.lo[k]) / n
            axes.append(self.lo[k] + w * (np.arange(n) + 0.5))
        mesh = np.meshgrid(*axes, indexing="ij")
        points = np.stack(mesh, axis=-1).reshape(-1, self.dim)
        vals = np.asarray(target_eval(points), dtype=float)
        fine = vals.reshape(tuple(n * subdiv for n in self.cells))
        for k in range(self.dim):
            fine = fine.reshape(
                fine.shape[:k] + (self.cells[k], subdiv) + fine.shape[k + 1 :]
            ).mean(axis=k + 1)
        return fine

    def l1(self, density: Array, target: Array) -> float:
        return float(np.abs(np.asarray(density) - np.asarray(target)).sum() * self.cellvol)


@dataclass(frozen=True)
class SphereBins:
    """Equal-area bins on the unit sphere: uniform in (x3, azimuth).

    The area element is dz dphi, so bands uniform in z = x3 crossed with
    uniform azimuth sectors tile the sphere in cells of identical area
    (2/bands) * (2 pi / sectors).
    """

    bands: int = 12
    sectors: int = 24

    def __post_init__(self) -> None:
        if self.bands < 1 or self.sectors < 1:
            raise ValueError("need at least one band and one sector")

    @property
    def n_cells(self) -> int:
        return self.bands * self.sectors

    @property
    def cell_area(self) -> float:
        return (2.0 / self.bands) * (2.0 * math.pi / self.sectors)

    def counts(self, positions: Array) -> Array:
        pos = np.asarray(positions, dtype=float)
        if pos.shape[0] == 0:
            return np.zeros((self.bands, self.sectors), dtype=np.int64)
        iz = np.floor((pos[:, 2] + 1.0) / 2.0 * self.bands).astype(np.int64)
        iz = np.clip(iz, 0, self.bands - 1)
        phi = np.arctan2(pos[:, 1], pos[:, 0])  # [-pi, pi]
        iphi = np.floor((phi + math.pi) / (2.0 * math.pi) * self.sectors).astype(np.int64)
        iphi = np.clip(iphi, 0, self.sectors - 1)
        flat = iz * self.sectors + iphi
        return np.bincount(flat, minlength=self.n_cells).reshape(self.bands, self.sectors)

    def density(self, positions: Array, n_total: int) -> Array:
        return self.counts(positions) / (n_total * self.cell_area)

    def target_values(self, target_eval: Callable[[Array], Array], subdiv: int = 4) -> Array:
        nz = self.bands * subdiv
        nphi = self.sectors * subdiv
        z = -1.0 + (2.0 / nz) * (np.arange(nz) + 0.5)
        phi = -math.pi + (2.0 * math.pi / nphi) * (np.arange(nphi) + 0.5)
        zz, pp = np.meshgrid(z, phi, indexing="ij")
        r = np.sqrt(np.maximum(1.0 - zz**2, 0.0))
        points = np.stack([r * np.cos(pp), r * np.sin(pp), zz], axis=-1).reshape(-1, 3)
        vals = np.asarray(target_eval(points), dtype=float).reshape(nz, nphi)
        return vals.reshape(self.bands, subdiv, self.sectors, subdiv).mean(axis=(1, 3))

    def l1(self, density: Array, target: Array) -> float:
        return float(np.abs(np.asarray(density) - np.asarray(target)).sum() * self.cell_area)


# ---------------------------------------------------------------------------
# Run records and export
# ---------------------------------------------------------------------------


@dataclass
class ParticleSnapshot:
    t: float
    positions: Array
    motion_states: Array


@dataclass
class GridSnapshot:
    t: float
    y_moving: Array
    y_motionless: Array


@dataclass
class MetricsRow:
    t: float
    l1_to_target: float
    moving_fraction: float
    total_mass: float


@dataclass
class RunRecord:
    """Ordered snapshots and per-snapshot metrics of one run."""

    config: dict
    snapshots: list = field(default_factory=list)
    grid_snapshots: list = field(default_factory=list)
    metrics: list = field(default_factory=list)
    grid_centers: Optional[Array] = None

    @staticmethod
    def _check_increasing(seq, t: float, what: str) -> None:
        if seq and t <= seq[-1].t:
            raise ValueError(f"{what} times must be strictly increasing")

    def add_particle_snapshot(self, t: float, positions: Array, motion_states: Array) -> None:
        self._check_increasing(self.snapshots, t, "snapshot")
        self.snapshots.append(
            ParticleSnapshot(
                float(t),
                np.array(positions, dtype=float, copy=True),
                np.array(motion_states, dtype=np.int64, copy=True),
            )
        )

    def add_grid_snapshot(self, t: float, y_moving: Array, y_motionless: Array) -> None:
        self._check_increasing(self.grid_snapshots, t, "snapshot")
        self.grid_snapshots.append(
            GridSnapshot(float(t), np.array(y_moving, copy=True), np.array(y_motionless, copy=True))
        )

    def add_metrics(
        self, t: float, l1_to_target: float, moving_frac: float, total_mass: float
    ) -> None:
        self._check_increasing(self.metrics, t, "metrics")
        row = MetricsRow(float(t), float(l1_to_target), float(moving_frac), float(total_mass))
        if not all(
            math.isfinite(v)
            for v in (row.t, row.l1_to_target, row.moving_fraction, row.total_mass)
        ):
            raise ValueError(f"non-finite metrics at t={t}")
        self.metrics.append(row)


def _pad3(x: Array) -> Array:
    """Pad a point array out to three coordinates with zeros."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if x.shape[1] >= 3:
        return x[:, :3]
    out = np.zeros((x.shape[0], 3))
    out[:, : x.shape[1]] = x
    return out


def export(record: RunRecord, out_dir: Union[str, Path]) -> list[Path]:
    """Write the run record to CSV/JSON files; returns the paths written."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    try:
        if record.snapshots:
            path = out / SNAPSHOTS_FILENAME
            with open(path, "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(SNAPSHOT_HEADER)
                for snap in record.snapshots:
                    pos = _pad3(snap.positions)
                    t_str = _fmt(snap.t)
                    for pid in range(pos.shape[0]):
                        w.writerow(
                            [
                                t_str,
                                pid,
                                _fmt(pos[pid, 0]),
                                _fmt(pos[pid, 1]),
                                _fmt(pos[pid, 2]),
                                int(snap.motion_states[pid]),
                            ]
                        )
            written.append(path)
        if record.grid_snapshots:
            if record.grid_centers is None:
                raise ValueError("grid snapshots present but grid_centers not set")
            centers = _pad3(record.grid_centers)
            path = out / GRID_SNAPSHOTS_FILENAME
            with open(path, "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(GRID_SNAPSHOT_HEADER)
                for snap in record.grid_snapshots:
                    t_str = _fmt(snap.t)
                    y1 = np.ravel(snap.y_moving)
                    y2 = np.ravel(snap.y_motionless)
                    for cid in range(centers.shape[0]):
                        w.writerow(
                            [
                                t_str,
                                cid,
                                _fmt(centers[cid, 0]),
                                _fmt(centers[cid, 1]),
                                _fmt(centers[cid, 2]),
                                _fmt(y1[cid]),
                                _fmt(y2[cid]),
                            ]
                        )
            written.append(path)
        path = out / METRICS_FILENAME
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(METRICS_HEADER)
            for row in record.metrics:
                w.writerow(
                    [
                        _fmt(row.t),
                        _fmt(row.l1_to_target),
                        _fmt(row.moving_fraction),
                        _fmt(row.total_mass),
                    ]
                )
        written.append(path)
        path = out / RUNINFO_FILENAME
        info = {
            "config": record.config,
            "seed": record.config.get("sim", {}).get("seed"),
            "code_version": _code_version(),
        }
        with open(path, "w") as fh:
            json.dump(info, fh, indent=2, sort_keys=True)
            fh.write("\n")
        written.append(path)
    except OSError as exc:
        raise OSError(f"export to {out} failed: {exc}") from exc
    return written


def read_metrics(path: Union[str, Path]) -> dict[str, Array]:
    """Read a metrics.csv back into arrays keyed by column name."""
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != METRICS_HEADER:
            raise ValueError(
                f"{path}: expected metrics header {list(METRICS_HEADER)}, got {header}"
            )
        rows = [[float(v) for v in row] for row in reader]
    data = np.array(rows, dtype=float).reshape(-1, len(METRICS_HEADER))
    return {name: data[:, k] for k, name in enumerate(METRICS_HEADER)}
