from __future__ import annotations

import numpy as np
import pytest

from swarmcover.vectorfields import (
    FieldFamily,
    VectorField,
    bracket_field,
    bracket_generating_rank,
    builtin_brockett,
    builtin_coordinate,
    builtin_sphere,
    evaluate,
    family_by_name,
    lie_bracket_numeric,
)


def random_points(n, dim, lo=-5.0, hi=5.0, seed=0):
    rng = np.random.default_rng(seed)
    return rng.uniform(lo, hi, size=(n, dim))


def random_unit_vectors(n, seed=0):
    rng = np.random.default_rng(seed)
    v = rng.normal(size=(n, 3))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


# ---------------------------------------------------------------------------
# brackets
# ---------------------------------------------------------------------------


def test_planar_family_bracket_is_twice_e3():
    fam = builtin_brockett()
    pts = random_points(100, 3, lo=0.0, hi=100.0, seed=1)
    br = lie_bracket_numeric(fam.fields[0], fam.fields[1], pts)
    err = np.abs(br - np.array([0.0, 0.0, 2.0])).max()
    assert err <= 1e-6


def test_rotation_family_bracket_closes():
    fam = builtin_sphere()
    r1, r2, r3 = fam.fields
    pts = random_unit_vectors(100, seed=2)
    br = lie_bracket_numeric(r1, r2, pts)
    err = np.abs(br - r3(pts)).max()
    assert err <= 1e-6


def test_bracket_antisymmetry():
    fam = builtin_sphere()
    pts = random_unit_vectors(20, seed=3)
    for a in range(3):
        for b in range(3):
            fwd = lie_bracket_numeric(fam.fields[a], fam.fields[b], pts)
            rev = lie_bracket_numeric(fam.fields[b], fam.fields[a], pts)
            np.testing.assert_allclose(fwd, -rev, atol=1e-9)


def test_bracket_of_commuting_fields_vanishes():
    fam = builtin_coordinate(3)
    pts = random_points(20, 3, seed=4)
    br = lie_bracket_numeric(fam.fields[0], fam.fields[2], pts)
    assert np.abs(br).max() <= 1e-12


def test_bracket_rejects_bad_step():
    fam = builtin_brockett()
    with pytest.raises(ValueError):
        lie_bracket_numeric(fam.fields[0], fam.fields[1], np.zeros(3), h=0.0)


def test_bracket_field_nests():
    fam = builtin_brockett()
    nested = bracket_field(fam.fields[0], fam.fields[1])
    assert nested.dim == 3
    np.testing.assert_allclose(nested(np.zeros(3)), [0.0, 0.0, 2.0], atol=1e-6)


# ---------------------------------------------------------------------------
# rank of the bracket distribution
# ---------------------------------------------------------------------------


def test_planar_family_needs_one_bracket_level():
    fam = builtin_brockett()
    pts = random_points(20, 3, lo=0.0, hi=100.0, seed=5)
    for p in pts:
        assert bracket_generating_rank(fam, p, depth=0) == 2
        assert bracket_generating_rank(fam, p, depth=1) == 3


def test_rotation_family_spans_tangent_planes():
    from swarmcover.domains import SphereDomain

    fam = builtin_sphere()
    controls = FieldFamily(fields=fam.fields[:2], dim=3)
    sphere = SphereDomain()
    for p in random_unit_vectors(20, seed=6):
        proj = sphere.tangent_projector(p)
        assert bracket_generating_rank(controls, p, depth=1, tangent_projector=proj) == 2


def test_coordinate_family_full_rank_without_brackets():
    fam = builtin_coordinate(2)
    assert bracket_generating_rank(fam, np.zeros(2), depth=0) == 2


def test_deep_nesting_warns_about_roundoff():
    fam = builtin_brockett()
    with pytest.warns(UserWarning, match="roundoff"):
        bracket_generating_rank(fam, np.zeros(3), depth=3)


# ---------------------------------------------------------------------------
# exact flows
# ---------------------------------------------------------------------------


def test_planar_flows_match_field():
    fam = builtin_brockett()
    x0 = np.array([2.0, -1.0, 0.5])
    for f in fam.fields:
        h = 1e-6
        fd = (f.exact_flow(x0, h) - f.exact_flow(x0, -h)) / (2 * h)
        np.testing.assert_allclose(fd, f(x0), atol=1e-8)


def test_planar_first_flow_from_origin():
    fam = builtin_brockett()
    np.testing.assert_allclose(fam.fields[0].exact_flow(np.zeros(3), 1.0), [1.0, 0.0, 0.0])


def test_rotation_flow_quarter_turn():
    fam = builtin_sphere()
    out = fam.fields[0].exact_flow(np.array([1.0, 0.0, 0.0]), np.pi / 2)
    np.testing.assert_allclose(out, [0.0, 1.0, 0.0], atol=1e-12)


def test_rotation_flows_preserve_radius():
    fam = builtin_sphere()
    pts = random_unit_vectors(50, seed=7)
    for f in fam.fields:
        moved = f.exact_flow(pts, 0.37)
        np.testing.assert_allclose(np.linalg.norm(moved, axis=1), 1.0, atol=1e-13)


def test_flow_group_property():
    """Flowing s then t equals flowing s + t."""
    rng = np.random.default_rng(8)
    for fam in (builtin_brockett(), builtin_sphere()):
        pts = rng.normal(size=(10, 3))
        for f in fam.fields:
            s, t = 0.3, -0.7
            np.testing.assert_allclose(
                f.exact_flow(f.exact_flow(pts, s), t),
                f.exact_flow(pts, s + t),
                atol=1e-12,
            )


# ---------------------------------------------------------------------------
# lookup and validation
# ---------------------------------------------------------------------------


def test_family_lookup():
    assert len(family_by_name("brockett")) == 2
    assert len(family_by_name("sphere")) == 3
    fam = family_by_name("coordinate", dim=2)
    assert fam.dim == 2
    assert [f.name for f in fam.fields] == ["E1", "E2"]


def test_family_lookup_unknown_name():
    with pytest.raises(ValueError, match="unknown field family"):
        family_by_name("helix")


def test_family_dimension_mismatch_rejected():
    e1 = builtin_coordinate(2).fields[0]
    with pytest.raises(ValueError, match="dimension"):
        FieldFamily(fields=(e1,), dim=3)


def test_evaluate_checks_point_dimension():
    f = builtin_brockett().fields[0]
    with pytest.raises(ValueError, match="dimension"):
        evaluate(f, np.zeros(2))


def test_has_exact_flows_flag():
    assert builtin_brockett().has_exact_flows
    numeric_only = VectorField("N", 3, lambda p: p)
    assert not FieldFamily(fields=(numeric_only,), dim=3).has_exact_flows
