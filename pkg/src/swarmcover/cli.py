"""Command-line interface: scenario-driven runs, grid oracles, self-checks.

Subcommands:

* ``run SCENARIO``     particle simulation, exports CSV/JSON to the run directory
* ``oracle SCENARIO``  grid solver on a 1-D/2-D reduction, same export contract
* ``verify``           built-in invariant suite, pass/fail table

Exit codes: 0 success, 1 domain error (a valid setup that fails at runtime),
2 usage error (bad arguments or scenario schema violations).  The default
output directory is ``$SWARMCOVER_OUT`` (or ``./runs``) plus the scenario
stem; ``--out`` overrides it.
"""

from __future__ import annotations

import argparse
import os
import sys
import time
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from . import vectorfields
from .diagnostics import RunRecord, export
from .domains import BoxDomain, SphereDomain
from .meanfield import Kernel, KernelVariant, ReactionFunctions, bump_profile, kde
from .pde import (
    CoefficientPair,
    Grid,
    GridField,
    field_from_function,
    run_linear,
    run_semilinear,
    step_linear,
    step_semilinear,
)
from .scenarios import (
    OracleScenario,
    ScenarioError,
    build_oracle_scenario,
    build_particle_scenario,
    load_scenario,
)
from .sde import SimulationError, run as run_particles, _switch
from .targets import sine_profile_1d, two_bumps_1d

EXIT_OK = 0
EXIT_DOMAIN = 1
EXIT_USAGE = 2

OUTPUT_ENV = "SWARMCOVER_OUT"


def _default_threads() -> int:
    return os.cpu_count() or 1


def _resolve_out(arg_out: Optional[str], scenario_out: Optional[str], scenario_path: str) -> Path:
    if arg_out:
        return Path(arg_out)
    if scenario_out:
        return Path(scenario_out)
    base = Path(os.environ.get(OUTPUT_ENV, "runs"))
    return base / Path(scenario_path).stem


def _cmd_run(args: argparse.Namespace) -> int:
    raw = load_scenario(args.scenario)
    if args.seed is not None:
        raw.setdefault("sim", {})["seed"] = args.seed
    scn = build_particle_scenario(raw)
    out = _resolve_out(args.out, scn.out_dir, args.scenario)
    started = time.perf_counter()
    record = run_particles(
        scn.config,
        scn.law,
        scn.family,
        scn.domain,
        threads=args.threads,
        bins=scn.bins,
        config_echo=raw,
    )
    wall = time.perf_counter() - started
    export(record, out)
    last = record.metrics[-1]
    print(
        f"done: final l1 {last.l1_to_target:.6g}, "
        f"moving fraction {last.moving_fraction:.6g}, wall time {wall:.1f} s -> {out}"
    )
    return EXIT_OK


def run_oracle(scn: OracleScenario) -> RunRecord:
    """Execute a grid-solver scenario and collect the run record."""
    grid = scn.grid
    target_field = field_from_function(grid, scn.target.eval)
    record = RunRecord(config=scn.raw)
    record.grid_centers = grid.points().reshape(-1, grid.dim)
    b = GridField(grid, np.full(grid.shape, scn.D))

    if scn.kind == "linear":
        # y_t = div(b grad(a y)) with a = 1/f; equilibrium is y = f
        f = target_field.values
        coef = CoefficientPair(GridField(grid, 1.0 / f), b)
        if scn.y0 == "equilibrium":
            y0 = GridField(grid, f.copy())
        else:
            y0 = GridField(grid, np.full(grid.shape, 1.0 / np.prod(grid.hi - grid.lo)))

        def observe(t: float, y: np.ndarray) -> None:
            mass = float(y.sum() * grid.cellvol)
            l1 = float(np.abs(y - f).sum() * grid.cellvol)
            record.add_metrics(t, l1, 1.0, mass)
            record.add_grid_snapshot(t, y, np.zeros_like(y))

        run_linear(y0, coef, scn.t_final, scn.dt, observe, scn.snapshot_every)
        return record

    reactions = ReactionFunctions(scn.k)
    coef = CoefficientPair(GridField(grid, np.ones(grid.shape)), b)
    if scn.y0 == "equilibrium":
        y1 = GridField(grid, np.zeros(grid.shape))
        y2 = GridField(grid, target_field.values.copy())
    else:
        y1 = GridField(grid, np.full(grid.shape, 1.0 / np.prod(grid.hi - grid.lo)))
        y2 = GridField(grid, np.zeros(grid.shape))

    tvals = target_field.values

    def observe(t: float, a: np.ndarray, c: np.ndarray) -> None:
        m1 = float(a.sum() * grid.cellvol)
        m2 = float(c.sum() * grid.cellvol)
        l1 = float(np.abs(c - tvals).sum() * grid.cellvol)
        frac = m1 / (m1 + m2) if m1 + m2 > 0 else 0.0
        record.add_metrics(t, l1, frac, m1 + m2)
        record.add_grid_snapshot(t, a, c)

    run_semilinear(y1, y2, target_field, reactions, coef, scn.t_final, scn.dt, observe, scn.snapshot_every)
    return record


def _cmd_oracle(args: argparse.Namespace) -> int:
    raw = load_scenario(args.scenario)
    scn = build_oracle_scenario(raw)
    out = _resolve_out(args.out, scn.out_dir, args.scenario)
    started = time.perf_counter()
    record = run_oracle(scn)
    wall = time.perf_counter() - started
    export(record, out)
    last = record.metrics[-1]
    print(f"done: final l1 {last.l1_to_target:.6g}, wall time {wall:.1f} s -> {out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# verify: built-in invariant suite
# ---------------------------------------------------------------------------


def _check_brockett_bracket() -> float:
    fam = vectorfields.builtin_brockett()
    rng = np.random.Generator(np.random.Philox(key=2024))
    pts = rng.random((20, 3)) * 100.0
    br = vectorfields.lie_bracket_numeric(fam.fields[0], fam.fields[1], pts)
    return float(np.abs(br - np.array([0.0, 0.0, 2.0])).max())


def _check_sphere_bracket() -> float:
    fam = vectorfields.builtin_sphere()
    rng = np.random.Generator(np.random.Philox(key=2025))
    pts = rng.standard_normal((20, 3))
    pts /= np.linalg.norm(pts, axis=-1, keepdims=True)
    br = vectorfields.lie_bracket_numeric(fam.fields[0], fam.fields[1], pts)
    return float(np.abs(br - fam.fields[2].eval(pts)).max())


def _check_ranks() -> float:
    rng = np.random.Generator(np.random.Philox(key=2026))
    brock = vectorfields.builtin_brockett()
    pts = rng.random((10, 3)) * 100.0
    ranks = [vectorfields.bracket_generating_rank(brock, p, depth=1) for p in pts]
    sphere = vectorfields.builtin_sphere()
    dom = SphereDomain()
    upts = rng.standard_normal((10, 3))
    upts /= np.linalg.norm(upts, axis=-1, keepdims=True)
    sranks = [
        vectorfields.bracket_generating_rank(
            sphere, p, depth=1, tangent_projector=dom.tangent_projector(p)
        )
        for p in upts
    ]
    bad = sum(r != 3 for r in ranks) + sum(r != 2 for r in sranks)
    return float(bad)


def _check_kernel_normalization() -> float:
    kernel = Kernel(1.0, KernelVariant.EUCLIDEAN, dim=1)
    x = np.linspace(-1.0, 1.0, 200001)
    integral = np.trapezoid(bump_profile(np.abs(x)), x)
    return float(abs(kernel.c_eps * integral - 1.0))


def _check_kde_mass() -> float:
    kernel = Kernel(0.05, KernelVariant.EUCLIDEAN, dim=1)
    grid = np.linspace(0.0, 1.0, 100001)
    vals = kde(kernel, np.array([0.5]), 1, grid)
    return float(abs(np.trapezoid(vals, grid) - 1.0))


def _check_linear_equilibrium() -> float:
    box = BoxDomain(np.array([0.0]), np.array([1.0]))
    target = sine_profile_1d(box)
    grid = Grid(box.lo, box.hi, (100,))
    f = field_from_function(grid, target.eval)
    coef = CoefficientPair(GridField(grid, 1.0 / f.values), GridField(grid, np.ones(grid.shape)))
    y = GridField(grid, f.values.copy())
    dt = 0.9 * grid.h[0] ** 2 / (2.0 * float((coef.a.values * coef.b.values).max()))
    m0 = y.mass
    worst = 0.0
    for _ in range(100):
        y = step_linear(y, coef, dt)
        worst = max(worst, float(np.abs(y.values - f.values).sum() * grid.cellvol))
    return max(worst, abs(y.mass - m0))


def _check_semilinear_conservation() -> float:
    box = BoxDomain(np.array([0.0]), np.array([5.0]))
    target = two_bumps_1d(box)
    grid = Grid(box.lo, box.hi, (100,))
    tgt = field_from_function(grid, target.eval)
    coef = CoefficientPair(GridField(grid, np.ones(grid.shape)), GridField(grid, np.ones(grid.shape)))
    reactions = ReactionFunctions(10.0)
    y1 = GridField(grid, np.full(grid.shape, 1.0 / 5.0))
    y2 = GridField(grid, np.zeros(grid.shape))
    dt = 0.9 * grid.h[0] ** 2 / 2.0
    m0 = y1.mass + y2.mass
    worst = 0.0
    for _ in range(200):
        y1, y2 = step_semilinear(y1, y2, tgt, reactions, coef, dt)
        worst = max(worst, abs(y1.mass + y2.mass - m0))
        if y1.values.min() < -1e-14 or y2.values.min() < -1e-14:
            return 1.0
    return worst


def _check_switching_probability() -> float:
    rng = np.random.Generator(np.random.Philox(key=2027))
    n = 100_000
    states = np.zeros(n, dtype=np.int64)
    q1 = np.full(n, 100.0)
    q2 = np.zeros(n)
    new = _switch(states, q1, q2, 0.01, rng.random(n))
    p_hat = float(np.count_nonzero(new == 1) / n)
    p = -np.expm1(-1.0)
    sigma = np.sqrt(p * (1 - p) / n)
    return float(abs(p_hat - p) / (3.0 * sigma))  # < 1 inside the 3-sigma band


def _check_reflection() -> float:
    box = BoxDomain(np.array([0.0, 0.0]), np.array([1.0, 2.0]))
    rng = np.random.Generator(np.random.Philox(key=2028))
    pts = rng.standard_normal((1000, 2)) * 10.0
    folded = box.reflect(pts)
    inside = np.all(box.contains(folded))
    again = box.reflect(folded)
    return float((not inside) + np.abs(again - folded).max())


_CHECKS: list[tuple[str, Callable[[], float], float]] = [
    ("brockett bracket identity", _check_brockett_bracket, 1e-6),
    ("sphere bracket identity", _check_sphere_bracket, 1e-6),
    ("bracket-generating ranks", _check_ranks, 0.5),
    ("kernel normalization", _check_kernel_normalization, 1e-6),
    ("kde unit mass", _check_kde_mass, 1e-6),
    ("linear solver equilibrium", _check_linear_equilibrium, 1e-10),
    ("two-state mass conservation", _check_semilinear_conservation, 1e-12),
    ("switching probability", _check_switching_probability, 1.0),
    ("box reflection", _check_reflection, 1e-12),
]


def _cmd_verify(args: argparse.Namespace) -> int:
    all_ok = True
    for name, fn, tol in _CHECKS:
        try:
            residual = fn()
            ok = residual <= tol
        except Exception as exc:  # a crashed check is a failed check
            residual, ok = float("nan"), False
            if args.verbose:
                print(f"       {name}: {exc}")
        all_ok &= ok
        tag = "PASS" if ok else "FAIL"
        if args.verbose:
            print(f"[{tag}] {name:32s} residual {residual:.3e} (tol {tol:.1e})")
        else:
            print(f"[{tag}] {name}")
    return EXIT_OK if all_ok else EXIT_DOMAIN


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="swarmcover",
        description="Particle and grid simulation of swarm density stabilization",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a particle scenario")
    p_run.add_argument("scenario", help="path to a scenario TOML file")
    p_run.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    p_run.add_argument("--out", default=None, help="output directory")
    p_run.add_argument(
        "--threads", type=int, default=_default_threads(), help="worker threads (output-invariant)"
    )

    p_oracle = sub.add_parser("oracle", help="run a grid-solver scenario")
    p_oracle.add_argument("scenario", help="path to a scenario TOML file")
    p_oracle.add_argument("--out", default=None, help="output directory")

    p_verify = sub.add_parser("verify", help="run the built-in invariant suite")
    p_verify.add_argument("--verbose", action="store_true", help="print per-check residuals")

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "oracle":
            return _cmd_oracle(args)
        return _cmd_verify(args)
    except ScenarioError as exc:
        for line in exc.errors:
            print(f"error: {line}", file=sys.stderr)
        return EXIT_USAGE
    except SimulationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except (ValueError, ArithmeticError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())
