from __future__ import annotations

import numpy as np
import pytest

from swarmcover.domains import BoxDomain, SphereDomain
from swarmcover.targets import (
    BALL_RADIUS,
    build_target,
    eight_balls,
    sine_profile_1d,
    sphere_caps,
    two_bumps_1d,
    uniform_box,
)

# plateau heights computed by hand from the geometry:
# 8 balls of radius 12.5  ->  1 / (8 * 4/3 pi 12.5^3)
BALLS_LEVEL = 1.5278874536821953e-05
# same on a 0.001 floor over the 100^3 box
BALLS_FLOOR_LEVEL = 1.5048943615410392e-05
# six caps (x.a)^2 >= 3/4  ->  1 / (12 pi (1 - sqrt(3)/2))
CAPS_LEVEL = 0.19799144463156218

BOX3 = BoxDomain([0.0, 0.0, 0.0], [100.0, 100.0, 100.0])


def test_eight_balls_plateau_values():
    t = build_target("balls8", BOX3)
    center = np.array([25.0, 25.0, 25.0])
    assert t.eval(center) == pytest.approx(BALLS_LEVEL, rel=1e-12)
    assert t.eval(np.array([50.0, 50.0, 50.0])) == 0.0
    assert t.min_value == 0.0
    assert t.mass_quadrature == pytest.approx(1.0, abs=1e-9)


def test_eight_balls_with_floor():
    t = build_target("balls8+floor", BOX3)
    center = np.array([75.0, 25.0, 75.0])
    assert t.eval(center) == pytest.approx(BALLS_FLOOR_LEVEL * 1.001, rel=1e-12)
    assert t.eval(np.array([0.0, 0.0, 0.0])) == pytest.approx(
        BALLS_FLOOR_LEVEL * 0.001, rel=1e-12
    )
    assert t.min_value > 0.0
    assert t.mass_quadrature == pytest.approx(1.0, abs=1e-9)


def test_eight_balls_boundary_is_open():
    t = eight_balls(BOX3)
    edge = np.array([25.0 + BALL_RADIUS, 25.0, 25.0])
    assert t.eval(edge) == 0.0
    assert t.eval(edge - np.array([1e-9, 0.0, 0.0])) > 0.0


def test_eight_balls_batch_eval():
    t = eight_balls(BOX3, floor=0.001)
    pts = np.array([[25.0, 25.0, 25.0], [50.0, 50.0, 50.0]])
    vals = t.eval(pts)
    assert vals.shape == (2,)
    assert vals[0] > vals[1] > 0.0


def test_eight_balls_reject_poking_out():
    small = BoxDomain([0.0, 0.0, 0.0], [40.0, 100.0, 100.0])
    with pytest.raises(ValueError, match="pokes out"):
        eight_balls(small)


def test_eight_balls_reject_overlap():
    centers = np.array([[25.0, 25.0, 25.0], [30.0, 25.0, 25.0]])
    with pytest.raises(ValueError, match="overlap"):
        eight_balls(BOX3, centers=centers)


def test_sphere_caps_geometry():
    t = sphere_caps()
    pole = np.array([0.0, 0.0, 1.0])
    assert t.eval(pole) == pytest.approx(CAPS_LEVEL, rel=1e-12)
    # 45 degrees off every axis: outside all caps
    diag = np.ones(3) / np.sqrt(3.0)
    assert t.eval(diag) == 0.0
    assert t.mass_quadrature == pytest.approx(1.0, abs=1e-9)


def test_sphere_caps_threshold_bounds():
    with pytest.raises(ValueError):
        sphere_caps(threshold=0.4)
    with pytest.raises(ValueError):
        sphere_caps(threshold=1.0)


def test_uniform_box_level():
    t = uniform_box(BoxDomain([0.0], [4.0]))
    assert t.eval(np.array([1.0])) == 0.25
    assert t.min_value == 0.25


def test_sine_profile_shape():
    dom = BoxDomain([0.0], [1.0])
    t = sine_profile_1d(dom)
    assert t.eval(np.array([0.25])) == pytest.approx(1.5, rel=1e-12)
    assert t.eval(np.array([0.75])) == pytest.approx(0.5, rel=1e-12)
    assert t.min_value == pytest.approx(0.5)
    assert t.mass_quadrature == pytest.approx(1.0, abs=1e-10)


def test_sine_profile_off_unit_interval():
    dom = BoxDomain([2.0], [6.0])
    t = sine_profile_1d(dom, amplitude=0.25)
    assert t.eval(np.array([3.0])) == pytest.approx((1.0 + 0.25) / 4.0, rel=1e-12)
    assert t.mass_quadrature == pytest.approx(1.0, abs=1e-10)


def test_sine_profile_rejects_overdeep_trough():
    with pytest.raises(ValueError):
        sine_profile_1d(BoxDomain([0.0], [1.0]), amplitude=1.0)


def test_two_bumps_levels():
    dom = BoxDomain([0.0], [5.0])
    t = two_bumps_1d(dom)
    assert t.eval(np.array([1.25])) == pytest.approx(1.0)
    assert t.eval(np.array([3.75])) == pytest.approx(1.0)
    assert t.eval(np.array([2.5])) == 0.0
    assert t.min_value == 0.0
    assert t.mass_quadrature == pytest.approx(1.0, abs=1e-12)


def test_two_bumps_validation():
    dom = BoxDomain([0.0], [5.0])
    with pytest.raises(ValueError, match="inside the domain"):
        two_bumps_1d(dom, intervals=((4.5, 5.5), (1.0, 1.5)))
    with pytest.raises(ValueError, match="overlap"):
        two_bumps_1d(dom, intervals=((1.0, 2.0), (1.5, 2.5)))


def test_grid_file_target_roundtrip(tmp_path):
    values = np.array([[0.0, 2.0], [1.0, 1.0]])
    path = tmp_path / "target.npz"
    np.savez(path, lo=[0.0, 0.0], hi=[1.0, 1.0], values=values)
    t = build_target("grid-file", None, path=str(path))
    assert t.dim == 2
    # cell (0, 1) holds half the mass on a quarter of the area
    assert t.eval(np.array([0.25, 0.75])) == pytest.approx(2.0)
    assert t.eval(np.array([0.25, 0.25])) == 0.0
    assert t.mass_quadrature == pytest.approx(1.0)


def test_grid_file_target_validation(tmp_path):
    path = tmp_path / "bad.npz"
    np.savez(path, lo=[0.0], hi=[1.0], values=np.array([-1.0, 2.0]))
    with pytest.raises(ValueError, match="negative"):
        build_target("grid-file", None, path=str(path))
    path2 = tmp_path / "missing.npz"
    np.savez(path2, lo=[0.0], hi=[1.0])
    with pytest.raises(ValueError, match="missing"):
        build_target("grid-file", None, path=str(path2))


def test_build_target_registry():
    assert build_target("uniform", SphereDomain()).name == "uniform-sphere"
    assert build_target("uniform", BoxDomain([0.0], [1.0])).name == "uniform"
    with pytest.raises(ValueError, match="unknown target kind"):
        build_target("rings", BOX3)
    with pytest.raises(ValueError, match="path"):
        build_target("grid-file", None)
