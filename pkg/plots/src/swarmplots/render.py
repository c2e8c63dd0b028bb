"""Figure renderers for run directories.

Three figure kinds are supported:

* ``l1curve`` -- time evolution of the distance to the target density
  together with the moving fraction, from ``metrics.csv``.
* ``scatter3d`` -- the raw particle cloud at a snapshot time, moving and
  motionless particles in distinct colors.
* ``sphere`` -- particles drawn on the unit sphere over a surface shaded
  by the target density (polar-caps targets get their plateau shading
  from the scenario echo in ``run.json``; anything else renders flat).
  Positions are projected radially about the domain center before
  drawing, which is the identity for runs that already live on the
  sphere and gives a structural view for box runs.

All figures use a fixed size, DPI and the Agg backend so that rendering
the same run directory twice produces byte-identical images.
"""

from __future__ import annotations

from pathlib import Path
from typing import Optional, Sequence, Union

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402

from .contract import Frame  # noqa: E402

FIGSIZE = (7.0, 5.5)
DPI = 110

#: Colors for the two motion states, shared by all particle figures.
MOVING_COLOR = "#1f77b4"
MOTIONLESS_COLOR = "#d62728"

#: Default squared-coordinate threshold of the polar-caps target.
_CAPS_THRESHOLD = 0.75


def _save(fig, out_path: Union[str, Path]) -> Path:
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out_path, dpi=DPI)
    plt.close(fig)
    return out_path


def render_l1curve(metrics: pd.DataFrame, out_path: Union[str, Path]) -> Path:
    """Plot distance-to-target and moving fraction against time."""
    t = metrics["t"].to_numpy()
    fig, ax = plt.subplots(figsize=FIGSIZE)
    ax.plot(t, metrics["l1_to_target"].to_numpy(), color=MOVING_COLOR, lw=1.8,
            label="distance to target")
    ax.set_xlabel("t")
    ax.set_ylabel("distance to target", color=MOVING_COLOR)
    ax.tick_params(axis="y", labelcolor=MOVING_COLOR)
    ax.set_ylim(bottom=0.0)
    twin = ax.twinx()
    twin.plot(t, metrics["moving_fraction"].to_numpy(), color=MOTIONLESS_COLOR,
              lw=1.4, ls="--", label="moving fraction")
    twin.set_ylabel("moving fraction", color=MOTIONLESS_COLOR)
    twin.tick_params(axis="y", labelcolor=MOTIONLESS_COLOR)
    twin.set_ylim(0.0, 1.05)
    ax.set_title("convergence")
    fig.tight_layout()
    return _save(fig, out_path)


def domain_extents(info: dict) -> Optional[np.ndarray]:
    """Axis limits ``(3, 2)`` from a scenario echo, if it describes a box."""
    domain = info.get("config", {}).get("domain", {})
    lo, hi = domain.get("lo"), domain.get("hi")
    if not isinstance(lo, (list, tuple)) or not isinstance(hi, (list, tuple)):
        return None
    if len(lo) != len(hi) or not 1 <= len(lo) <= 3:
        return None
    extents = np.zeros((3, 2))
    extents[: len(lo), 0] = lo
    extents[: len(hi), 1] = hi
    return extents


def render_scatter3d(frame: Frame, out_path: Union[str, Path],
                     extents: Optional[np.ndarray] = None) -> Path:
    """Draw the particle cloud at one snapshot time."""
    fig = plt.figure(figsize=FIGSIZE)
    ax = fig.add_subplot(projection="3d")
    for mask, color, label in ((frame.moving, MOVING_COLOR, "moving"),
                               (~frame.moving, MOTIONLESS_COLOR, "motionless")):
        pts = frame.positions[mask]
        if len(pts):
            ax.scatter(pts[:, 0], pts[:, 1], pts[:, 2], s=6, color=color,
                       depthshade=False, label=label)
    if extents is not None:
        ax.set_xlim(*extents[0])
        ax.set_ylim(*extents[1])
        ax.set_zlim(*extents[2])
    ax.set_xlabel("x1")
    ax.set_ylabel("x2")
    ax.set_zlabel("x3")
    ax.set_title(f"particles at t = {frame.t:g}")
    ax.legend(loc="upper right")
    fig.tight_layout()
    return _save(fig, out_path)


def project_to_sphere(positions: np.ndarray,
                      center: Sequence[float] = (0.0, 0.0, 0.0)) -> np.ndarray:
    """Radially project points about *center* onto the unit sphere.

    Points that coincide with the center are dropped: they have no
    well-defined direction.
    """
    shifted = np.asarray(positions, dtype=float) - np.asarray(center, dtype=float)
    norms = np.linalg.norm(shifted, axis=1)
    keep = norms > 1e-12
    return shifted[keep] / norms[keep, None]


def _sphere_shading(target: Optional[dict], mesh: np.ndarray) -> np.ndarray:
    """Shading values in ``[0, 1]`` for each mesh vertex.

    Polar-caps targets shade the caps (where some squared coordinate
    exceeds the threshold) darker than the band between them; any other
    target shades the sphere uniformly.
    """
    if isinstance(target, dict) and target.get("kind") == "caps":
        threshold = float(target.get("threshold", _CAPS_THRESHOLD))
        inside = (mesh ** 2).max(axis=-1) >= threshold
        return np.where(inside, 0.85, 0.25)
    return np.full(mesh.shape[:-1], 0.4)


def render_sphere(frame: Frame, out_path: Union[str, Path],
                  target: Optional[dict] = None,
                  center: Sequence[float] = (0.0, 0.0, 0.0)) -> Path:
    """Draw particles on the unit sphere over target shading."""
    u = np.linspace(0.0, 2.0 * np.pi, 120)
    v = np.linspace(0.0, np.pi, 60)
    mesh = np.stack([np.outer(np.cos(u), np.sin(v)),
                     np.outer(np.sin(u), np.sin(v)),
                     np.outer(np.ones_like(u), np.cos(v))], axis=-1)
    shade = _sphere_shading(target, mesh)
    colors = plt.get_cmap("viridis")(shade)
    colors[..., 3] = 0.55  # keep far-side particles faintly visible

    fig = plt.figure(figsize=FIGSIZE)
    ax = fig.add_subplot(projection="3d")
    ax.plot_surface(mesh[..., 0], mesh[..., 1], mesh[..., 2],
                    facecolors=colors, rstride=1, cstride=1,
                    linewidth=0, antialiased=False, shade=False)
    moving = project_to_sphere(frame.positions[frame.moving], center)
    still = project_to_sphere(frame.positions[~frame.moving], center)
    for pts, color, label in ((moving, MOVING_COLOR, "moving"),
                              (still, MOTIONLESS_COLOR, "motionless")):
        if len(pts):
            lifted = 1.02 * pts  # draw just above the surface
            ax.scatter(lifted[:, 0], lifted[:, 1], lifted[:, 2], s=8,
                       color=color, depthshade=False, label=label)
    ax.set_box_aspect((1, 1, 1))
    ax.set_xlim(-1.1, 1.1)
    ax.set_ylim(-1.1, 1.1)
    ax.set_zlim(-1.1, 1.1)
    ax.set_xlabel("x1")
    ax.set_ylabel("x2")
    ax.set_zlabel("x3")
    ax.set_title(f"sphere view at t = {frame.t:g}")
    ax.legend(loc="upper right")
    fig.tight_layout()
    return _save(fig, out_path)
