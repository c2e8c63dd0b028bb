"""Command-line entry point: render figures from an exported run directory.

Usage::

    plots render --run RUNDIR --kind {l1curve,scatter3d,sphere}
                 [--times T1,T2,...] [--out OUTDIR]

``--times`` selects snapshot times for the particle figures (each
requested time is matched to the nearest exported snapshot); it defaults
to the final snapshot and is ignored by ``l1curve``.  Exit status is 0
on success, 1 when the run directory violates the export contract or
cannot be read, and 2 for usage errors.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import List, Optional

import numpy as np

from . import __version__
from .contract import (
    ContractError,
    frame_at,
    load_info,
    load_metrics,
    load_snapshots,
    snapshot_times,
)
from .render import domain_extents, render_l1curve, render_scatter3d, render_sphere

KINDS = ("l1curve", "scatter3d", "sphere")


def _parse_times(text: str) -> List[float]:
    try:
        times = [float(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text!r}")
    if not times:
        raise argparse.ArgumentTypeError("--times is empty")
    return times


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="plots", description="Render figures from an exported run directory."
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    commands = parser.add_subparsers(dest="command", required=True)
    render = commands.add_parser("render", help="render one figure kind")
    render.add_argument("--run", required=True, help="run directory to read")
    render.add_argument("--kind", required=True, choices=KINDS,
                        help="figure kind to render")
    render.add_argument("--times", type=_parse_times, default=None,
                        help="comma-separated snapshot times (particle figures)")
    render.add_argument("--out", default=None,
                        help="output directory (default: <run>/figures)")
    return parser


def _render(args: argparse.Namespace) -> int:
    run_dir = Path(args.run)
    out_dir = Path(args.out) if args.out is not None else run_dir / "figures"
    info = load_info(run_dir)

    written: List[Path] = []
    if args.kind == "l1curve":
        metrics = load_metrics(run_dir)
        written.append(render_l1curve(metrics, out_dir / "l1curve.png"))
    else:
        snapshots = load_snapshots(run_dir)
        times = args.times
        if times is None:
            times = [float(snapshot_times(snapshots)[-1])]
        config = info.get("config", {}) if isinstance(info.get("config"), dict) else {}
        for t in times:
            frame = frame_at(snapshots, t)
            name = f"{args.kind}_t{frame.t:g}.png"
            if args.kind == "scatter3d":
                written.append(render_scatter3d(frame, out_dir / name,
                                                extents=domain_extents(info)))
            else:
                extents = domain_extents(info)
                center = extents.mean(axis=1) if extents is not None else np.zeros(3)
                written.append(render_sphere(frame, out_dir / name,
                                             target=config.get("target"),
                                             center=center))
    for path in written:
        print(path)
    return 0


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return _render(args)
    except ContractError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
