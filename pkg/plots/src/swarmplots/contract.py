"""Readers for the CSV/JSON layout of an exported run directory.

A run directory is the only interface between the simulator and this
package.  It contains:

* ``metrics.csv`` -- one row per snapshot time with the scalar summary
  columns ``t, l1_to_target, moving_fraction, total_mass``.
* ``snapshots_particles.csv`` -- one row per particle per snapshot with
  columns ``t, particle_id, x1, x2, x3, motion_state``.  Planar and line
  runs pad the unused coordinates with zeros; ``motion_state`` is ``0``
  for moving particles and ``1`` for motionless ones.
* ``run.json`` -- the scenario the run was produced from, its seed and
  the code version, under the keys ``config``/``seed``/``code_version``.

Every loader validates the header against the expected column list and
raises :class:`ContractError` naming the file and the offending columns,
so that silently renamed or reordered exports fail loudly instead of
producing figures built from the wrong quantities.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Union

import numpy as np
import pandas as pd

METRICS_FILE = "metrics.csv"
SNAPSHOTS_FILE = "snapshots_particles.csv"
INFO_FILE = "run.json"

METRICS_COLUMNS = ("t", "l1_to_target", "moving_fraction", "total_mass")
SNAPSHOT_COLUMNS = ("t", "particle_id", "x1", "x2", "x3", "motion_state")

#: ``motion_state`` codes used in the particle snapshot table.
MOVING = 0
MOTIONLESS = 1


class ContractError(ValueError):
    """An exported run directory does not match the expected layout."""


def _read_csv(path: Path, columns: tuple) -> pd.DataFrame:
    if not path.is_file():
        raise ContractError(f"{path}: file not found in run directory")
    try:
        frame = pd.read_csv(path)
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as exc:
        raise ContractError(f"{path}: not a readable CSV table ({exc})") from exc
    got = tuple(frame.columns)
    if got != columns:
        missing = [name for name in columns if name not in got]
        extra = [name for name in got if name not in columns]
        detail = []
        if missing:
            detail.append("missing " + ", ".join(repr(n) for n in missing))
        if extra:
            detail.append("unexpected " + ", ".join(repr(n) for n in extra))
        if not detail:  # same names, wrong order
            detail.append(f"column order {got!r}")
        raise ContractError(
            f"{path}: header mismatch ({'; '.join(detail)}); "
            f"expected columns {columns!r}"
        )
    if frame.empty:
        raise ContractError(f"{path}: table has a header but no rows")
    numeric = frame.apply(pd.to_numeric, errors="coerce")
    if numeric.isna().any().any():
        bad = [name for name in columns if numeric[name].isna().any()]
        raise ContractError(
            f"{path}: non-numeric values in column(s) " + ", ".join(repr(n) for n in bad)
        )
    return numeric


def load_metrics(run_dir: Union[str, Path]) -> pd.DataFrame:
    """Read and validate ``metrics.csv`` from *run_dir*."""
    return _read_csv(Path(run_dir) / METRICS_FILE, METRICS_COLUMNS)


def load_snapshots(run_dir: Union[str, Path]) -> pd.DataFrame:
    """Read and validate ``snapshots_particles.csv`` from *run_dir*."""
    frame = _read_csv(Path(run_dir) / SNAPSHOTS_FILE, SNAPSHOT_COLUMNS)
    states = frame["motion_state"].to_numpy()
    if not np.isin(states, (MOVING, MOTIONLESS)).all():
        raise ContractError(
            f"{Path(run_dir) / SNAPSHOTS_FILE}: motion_state must be "
            f"{MOVING} (moving) or {MOTIONLESS} (motionless)"
        )
    return frame


def load_info(run_dir: Union[str, Path]) -> dict:
    """Read ``run.json`` from *run_dir*; returns ``{}`` when absent.

    The scenario echo is only used to enrich figures (target shading,
    domain extents), so a missing or unreadable file degrades the figure
    rather than failing the render.
    """
    path = Path(run_dir) / INFO_FILE
    if not path.is_file():
        return {}
    try:
        payload = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError):
        return {}
    return payload if isinstance(payload, dict) else {}


def snapshot_times(frame: pd.DataFrame) -> np.ndarray:
    """Sorted unique snapshot times present in a particle table."""
    return np.unique(frame["t"].to_numpy())


@dataclass(frozen=True)
class Frame:
    """One snapshot of the particle cloud.

    ``positions`` has shape ``(N, 3)`` (padded coordinates included) and
    ``moving`` is a boolean mask selecting the moving particles.
    """

    t: float
    positions: np.ndarray
    moving: np.ndarray


def frame_at(frame: pd.DataFrame, t: float) -> Frame:
    """Extract the snapshot closest in time to *t*."""
    times = snapshot_times(frame)
    nearest = float(times[np.argmin(np.abs(times - t))])
    rows = frame[frame["t"] == nearest]
    positions = rows[["x1", "x2", "x3"]].to_numpy(dtype=float)
    moving = rows["motion_state"].to_numpy() == MOVING
    return Frame(t=nearest, positions=positions, moving=moving)
