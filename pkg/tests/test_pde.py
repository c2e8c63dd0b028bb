from __future__ import annotations

import numpy as np
import pytest

from swarmcover.meanfield import ReactionFunctions
from swarmcover.pde import (
    CoefficientPair,
    Grid,
    GridField,
    _reaction_exchange,
    field_from_function,
    reaction_dt_bound,
    run_linear,
    run_semilinear,
    stability_bound,
    step_linear,
    step_semilinear,
)


def unit_grid(n: int) -> Grid:
    return Grid(np.array([0.0]), np.array([1.0]), (n,))


def constant_coefficients(grid: Grid, a: float = 1.0, b: float = 1.0) -> CoefficientPair:
    return CoefficientPair(
        GridField(grid, np.full(grid.shape, a)),
        GridField(grid, np.full(grid.shape, b)),
    )


# ---------------------------------------------------------------------------
# grids and fields
# ---------------------------------------------------------------------------


def test_grid_geometry():
    grid = Grid(np.array([0.0, -1.0]), np.array([2.0, 1.0]), (4, 8))
    assert grid.dim == 2
    assert np.allclose(grid.h, [0.5, 0.25])
    assert grid.cellvol == pytest.approx(0.125)
    assert np.allclose(grid.centers(0), [0.25, 0.75, 1.25, 1.75])
    assert grid.points().shape == (4, 8, 2)


def test_grid_validation():
    with pytest.raises(ValueError, match="1-D or 2-D"):
        Grid(np.zeros(3), np.ones(3), (2, 2, 2))
    with pytest.raises(ValueError, match="lo < hi"):
        Grid(np.array([1.0]), np.array([0.0]), (4,))
    with pytest.raises(ValueError, match="disagree"):
        Grid(np.array([0.0]), np.array([1.0]), (4, 4))


def test_grid_field_checks_shape_and_finiteness():
    grid = unit_grid(4)
    with pytest.raises(ValueError, match="does not match"):
        GridField(grid, np.zeros(5))
    with pytest.raises(ValueError, match="non-finite"):
        GridField(grid, np.array([0.0, np.nan, 0.0, 0.0]))
    field = GridField(grid, np.array([1.0, 2.0, 3.0, 4.0]))
    assert field.mass == pytest.approx(2.5)


def test_field_from_function_samples_centers():
    grid = unit_grid(4)
    field = field_from_function(grid, lambda p: p[..., 0] ** 2)
    assert np.allclose(field.values, np.array([0.125, 0.375, 0.625, 0.875]) ** 2)


def test_coefficients_must_share_grid_and_be_positive():
    g1, g2 = unit_grid(4), unit_grid(8)
    ones = GridField(g1, np.ones(4))
    with pytest.raises(ValueError, match="same grid"):
        CoefficientPair(ones, GridField(g2, np.ones(8)))
    with pytest.raises(ValueError, match="strictly positive"):
        CoefficientPair(ones, GridField(g1, np.array([1.0, 0.0, 1.0, 1.0])))


# ---------------------------------------------------------------------------
# linear model
# ---------------------------------------------------------------------------


def test_stability_bound_constant_coefficients():
    coef = constant_coefficients(unit_grid(10), a=2.0, b=3.0)
    assert stability_bound(coef) == pytest.approx(0.1 * 0.1 / 12.0, rel=1e-14)


def test_step_rejects_unstable_dt():
    coef = constant_coefficients(unit_grid(10))
    y = GridField(coef.grid, np.ones(10))
    with pytest.raises(ValueError, match="stability bound"):
        step_linear(y, coef, dt=0.01)


def test_equilibrium_is_exactly_stationary():
    # with a = 1/f the product a*y is constant at y = f, so every face flux
    # is an exact floating-point zero and the state never moves at all
    grid = unit_grid(64)
    x = grid.centers()
    f = 1.0 + 0.5 * np.sin(2.0 * np.pi * x)
    coef = CoefficientPair(GridField(grid, 1.0 / f), GridField(grid, np.ones(64)))
    y = GridField(grid, f.copy())
    dt = 0.5 * stability_bound(coef)
    out = run_linear(y, coef, t_final=200 * dt, dt=dt)
    assert np.array_equal(out.values, f)


def test_mass_is_conserved_for_random_coefficients():
    rng = np.random.default_rng(42)
    for _ in range(5):
        n = int(rng.integers(16, 48))
        grid = unit_grid(n)
        coef = CoefficientPair(
            GridField(grid, rng.uniform(0.5, 2.0, n)),
            GridField(grid, rng.uniform(0.5, 2.0, n)),
        )
        y0 = GridField(grid, rng.uniform(0.0, 3.0, n))
        dt = 0.9 * stability_bound(coef)
        out = run_linear(y0, coef, t_final=300 * dt, dt=dt)
        assert out.mass == pytest.approx(y0.mass, abs=1e-13)


def test_linear_solver_second_order_in_space():
    # against the closed-form solution 1 + cos(pi x) exp(-pi^2 t) of the
    # constant-coefficient problem; with dt proportional to h^2 the total
    # error contracts by ~4x per mesh doubling
    def sup_error(n: int) -> float:
        grid = unit_grid(n)
        coef = constant_coefficients(grid)
        x = grid.centers()
        y0 = GridField(grid, 1.0 + np.cos(np.pi * x))
        dt = 0.25 / (n * n)
        out = run_linear(y0, coef, t_final=0.05, dt=dt)
        exact = 1.0 + np.cos(np.pi * x) * np.exp(-np.pi**2 * 0.05)
        return float(np.max(np.abs(out.values - exact)))

    errs = [sup_error(n) for n in (50, 100, 200)]
    assert 3.0 < errs[0] / errs[1] < 5.5
    assert 3.0 < errs[1] / errs[2] < 5.5


def test_observer_cadence():
    coef = constant_coefficients(unit_grid(8))
    y0 = GridField(coef.grid, np.ones(8))
    dt = 0.5 * stability_bound(coef)
    times: list[float] = []
    run_linear(y0, coef, t_final=10 * dt, dt=dt,
               observer=lambda t, y: times.append(t), observe_every=4)
    assert times == pytest.approx([0.0, 4 * dt, 8 * dt, 10 * dt])


def test_single_step_matches_run():
    rng = np.random.default_rng(7)
    grid = unit_grid(16)
    coef = CoefficientPair(
        GridField(grid, rng.uniform(0.5, 2.0, 16)),
        GridField(grid, rng.uniform(0.5, 2.0, 16)),
    )
    y0 = GridField(grid, rng.uniform(0.0, 1.0, 16))
    dt = 0.8 * stability_bound(coef)
    a = step_linear(y0, coef, dt)
    b = run_linear(y0, coef, t_final=dt, dt=dt)
    assert np.array_equal(a.values, b.values)


def test_two_dimensional_mass_conservation():
    rng = np.random.default_rng(3)
    grid = Grid(np.zeros(2), np.ones(2), (12, 10))
    coef = CoefficientPair(
        GridField(grid, rng.uniform(0.5, 2.0, (12, 10))),
        GridField(grid, rng.uniform(0.5, 2.0, (12, 10))),
    )
    y0 = GridField(grid, rng.uniform(0.0, 1.0, (12, 10)))
    dt = 0.9 * stability_bound(coef)
    out = run_linear(y0, coef, t_final=200 * dt, dt=dt)
    assert out.mass == pytest.approx(y0.mass, abs=1e-13)


# ---------------------------------------------------------------------------
# semilinear two-state system
# ---------------------------------------------------------------------------


def test_exchange_matches_constant_rate_solution():
    # one cell in deficit: only the stopping rate fires, so the moving
    # density decays as exp(-q1 t) under the frozen-rate propagator
    rx = ReactionFunctions(k=4.0)
    y1, y2 = np.array([2.0]), np.array([0.5])
    target = np.array([0.75])
    v1, v2 = _reaction_exchange(y1, y2, target, rx, tau=0.3)
    q1 = 4.0 * 0.25
    assert v1[0] == pytest.approx(2.0 * np.exp(-q1 * 0.3), rel=1e-14)
    assert v2[0] == pytest.approx(0.5 + 2.0 * -np.expm1(-q1 * 0.3), rel=1e-14)
    assert v1[0] + v2[0] == pytest.approx(2.5, rel=1e-15)


def test_exchange_is_identity_at_matched_density():
    rx = ReactionFunctions(k=100.0)
    y1 = np.array([0.3, 0.7])
    y2 = np.array([0.4, 0.9])
    v1, v2 = _reaction_exchange(y1, y2, y2.copy(), rx, tau=0.5)
    assert np.array_equal(v1, y1)
    assert np.array_equal(v2, y2)


def test_reaction_dt_bound():
    grid = unit_grid(2)
    rx = ReactionFunctions(k=10.0)
    y1 = GridField(grid, np.zeros(2))
    y2 = GridField(grid, np.array([0.1, 0.9]))
    target = GridField(grid, np.array([0.5, 0.5]))
    assert reaction_dt_bound(y1, y2, target, rx) == pytest.approx(0.25)
    matched = GridField(grid, np.array([0.5, 0.5]))
    assert reaction_dt_bound(y1, matched, target, rx) == np.inf


def test_semilinear_step_rejects_bad_inputs():
    grid = unit_grid(4)
    coef = constant_coefficients(grid)
    rx = ReactionFunctions(k=1000.0)
    target = GridField(grid, np.full(4, 0.5))
    y1 = GridField(grid, np.full(4, 0.25))
    y2 = GridField(grid, np.full(4, 0.25))
    # q = 1000 * 0.25 caps the step at 0.004, well under the 0.03125
    # diffusion limit, so the reaction guard is the one that trips
    with pytest.raises(ValueError, match="reaction bound"):
        step_semilinear(y1, y2, target, rx, coef, dt=0.01)
    bad = GridField(grid, np.full(4, 0.25))
    bad.values = bad.values.copy()
    bad.values[0] = -1e-3
    with pytest.raises(ValueError, match="nonnegative"):
        step_semilinear(bad, y2, target, rx, coef, dt=1e-5)


def test_semilinear_conserves_and_stays_nonnegative():
    rng = np.random.default_rng(11)
    grid = unit_grid(40)
    coef = constant_coefficients(grid)
    rx = ReactionFunctions(k=50.0)
    target = GridField(grid, rng.uniform(0.0, 1.0, 40))
    y1 = GridField(grid, rng.uniform(0.0, 1.0, 40))
    y2 = GridField(grid, rng.uniform(0.0, 1.0, 40))
    total0 = y1.mass + y2.mass
    dt = min(0.9 * stability_bound(coef),
             0.5 * reaction_dt_bound(y1, y2, target, rx))
    f1, f2 = run_semilinear(y1, y2, target, rx, coef, t_final=100 * dt, dt=dt)
    assert f1.values.min() >= -1e-14
    assert f2.values.min() >= -1e-14
    assert f1.mass + f2.mass == pytest.approx(total0, abs=1e-13)


def test_semilinear_mismatch_shrinks_monotonically_per_cell():
    # in the moderate-rate regime the motionless density approaches the
    # target from its own side cell by cell: the deficit (target - y2)+
    # never grows and the excess (target - y2)- never deepens
    grid = unit_grid(50)
    coef = constant_coefficients(grid)
    rx = ReactionFunctions(k=20.0)
    x = grid.centers()
    target = GridField(grid, np.where(np.abs(x - 0.5) < 0.2, 2.0, 0.0))
    y1 = GridField(grid, np.full(50, 0.6))
    y2 = GridField(grid, np.full(50, 0.2))
    dt = 0.5 * stability_bound(coef)

    snaps: list[np.ndarray] = []
    run_semilinear(y1, y2, target, rx, coef, t_final=400 * dt, dt=dt,
                   observer=lambda t, a, b: snaps.append(b.copy()),
                   observe_every=40)
    tgt = target.values
    for prev, cur in zip(snaps, snaps[1:]):
        deficit_prev = np.maximum(tgt - prev, 0.0)
        deficit_cur = np.maximum(tgt - cur, 0.0)
        excess_prev = np.minimum(tgt - prev, 0.0)
        excess_cur = np.minimum(tgt - cur, 0.0)
        assert np.all(deficit_cur <= deficit_prev + 1e-14)
        assert np.all(excess_cur >= excess_prev - 1e-14)


def test_semilinear_relaxes_toward_target():
    grid = unit_grid(50)
    coef = constant_coefficients(grid)
    rx = ReactionFunctions(k=20.0)
    x = grid.centers()
    target = GridField(grid, np.where(np.abs(x - 0.5) < 0.25, 2.0, 0.0))
    y1 = GridField(grid, np.full(50, 1.0))
    y2 = GridField(grid, np.zeros(50))
    dt = 0.5 * stability_bound(coef)
    l1_0 = np.abs(y2.values - target.values).sum() / 50

    f1, f2 = run_semilinear(y1, y2, target, rx, coef, t_final=20.0, dt=dt)
    l1_T = np.abs(f2.values - target.values).sum() / 50
    assert l1_T < 0.05 * l1_0
    assert f1.mass < 0.05
