"""Smooth vector fields, numeric Lie brackets, and bracket-generating rank.

Fields are represented by analytic closures (never symbolically): each field
knows how to evaluate itself at a batch of points, and optionally how to flow
a point exactly for a given duration.  Brackets are approximated by central
finite differences; the rank computation stacks iterated brackets and counts
singular values.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Union

import numpy as np

Array = np.ndarray
FlowFn = Callable[[Array, Union[float, Array]], Array]

#: default finite-difference step for numeric brackets
DEFAULT_BRACKET_H = 1e-4

#: a singular value counts toward the rank if it exceeds RANK_RTOL * sigma_max
RANK_RTOL = 1e-8


@dataclass(frozen=True)
class VectorField:
    """A smooth vector field on R^dim given by an analytic closure.

    Parameters
    ----------
    name : str
        Label used in diagnostics and error messages.
    dim : int
        Ambient dimension.
    eval : callable
        Maps an array of points with shape ``(..., dim)`` to vectors of the
        same shape.  Must be vectorized over leading axes.
    exact_flow : callable, optional
        ``exact_flow(x, t)`` returns the time-``t`` flow of the field from
        ``x``; ``t`` may be a scalar or an array broadcastable against the
        leading axes of ``x``.  Only supplied when a closed form exists.
    """

    name: str
    dim: int
    eval: Callable[[Array], Array]
    exact_flow: Optional[FlowFn] = None

    def __call__(self, x: Array) -> Array:
        return self.eval(np.asarray(x, dtype=float))


@dataclass(frozen=True)
class FieldFamily:
    """An ordered collection of vector fields sharing one ambient space.

    Fewer fields than dimensions is allowed (and is the interesting case):
    the missing directions must then be recovered through brackets.
    """

    fields: tuple[VectorField, ...]
    dim: int

    def __post_init__(self) -> None:
        for f in self.fields:
            if f.dim != self.dim:
                raise ValueError(
                    f"field '{f.name}' has dimension {f.dim}, family expects {self.dim}"
                )

    def __len__(self) -> int:
        return len(self.fields)

    @property
    def has_exact_flows(self) -> bool:
        return all(f.exact_flow is not None for f in self.fields)


def evaluate(field: VectorField, x: Array) -> Array:
    """Evaluate ``field`` at point(s) ``x`` with a dimension check."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != field.dim:
        raise ValueError(
            f"point dimension {x.shape[-1]} does not match "
            f"field '{field.name}' dimension {field.dim}"
        )
    return field.eval(x)


def lie_bracket_numeric(
    X: VectorField, Y: VectorField, x: Array, h: float = DEFAULT_BRACKET_H
) -> Array:
    """Central-difference approximation of ``[X, Y](x)``.

    Computes (DY)(x) X(x) - (DX)(x) Y(x) through directional central
    differences: the Jacobian-vector product (DY)(x) X(x) is the derivative
    of ``Y`` along the direction ``X(x)``, approximated by
    ``(Y(x + h X(x)) - Y(x - h X(x))) / (2 h)``.  The error is O(h^2) for
    smooth fields.

    Parameters
    ----------
    X, Y : VectorField
    x : array, shape (..., dim)
    h : float
        Finite-difference step, must be positive.
    """
    if h <= 0:
        raise ValueError(f"finite-difference step must be positive, got {h}")
    x = np.asarray(x, dtype=float)
    vx = X.eval(x)
    vy = Y.eval(x)
    dy_along_x = (Y.eval(x + h * vx) - Y.eval(x - h * vx)) / (2.0 * h)
    dx_along_y = (X.eval(x + h * vy) - X.eval(x - h * vy)) / (2.0 * h)
    return dy_along_x - dx_along_y


def bracket_field(X: VectorField, Y: VectorField, h: float = DEFAULT_BRACKET_H) -> VectorField:
    """The bracket ``[X, Y]`` as a new (numerically evaluated) field.

    Used to nest brackets; each nesting level adds another layer of finite
    differencing, so precision degrades with depth.
    """
    return VectorField(
        name=f"[{X.name},{Y.name}]",
        dim=X.dim,
        eval=lambda p: lie_bracket_numeric(X, Y, p, h=h),
    )


def bracket_generating_rank(
    family: FieldFamily,
    x: Array,
    depth: int,
    tangent_projector: Optional[Callable[[Array], Array]] = None,
    h: float = DEFAULT_BRACKET_H,
) -> int:
    """Numerical rank of the iterated-bracket distribution at ``x``.

    Builds the family itself, then ``depth`` levels of brackets (level one is
    all pairwise brackets of the original fields; each further level brackets
    the previous level against the original fields), evaluates everything at
    ``x``, optionally projects onto a tangent space, and counts singular
    values above ``RANK_RTOL`` times the largest.

    Parameters
    ----------
    family : FieldFamily
    x : array, shape (dim,)
    depth : int
        Number of bracket levels; 0 means the raw fields only.
    tangent_projector : callable, optional
        Maps ambient vectors at ``x`` into the tangent space (e.g.
        ``v -> v - (x . v) x`` on the unit sphere).  Applied to every stacked
        vector before the rank computation.
    """
    if depth < 0:
        raise ValueError(f"bracket depth must be nonnegative, got {depth}")
    x = np.asarray(x, dtype=float)

    # Nested central differences amplify roundoff by ~ eps / (2h)^depth; warn
    # once that exceeds the rank tolerance, because then "rank" may count noise.
    noise = np.finfo(float).eps / (2.0 * h) ** depth
    if noise > RANK_RTOL:
        warnings.warn(
            f"bracket depth {depth} with step h={h:g} amplifies roundoff to "
            f"~{noise:.1e}, above the rank tolerance {RANK_RTOL:g}; "
            "the returned rank may be unreliable",
            stacklevel=2,
        )

    base = list(family.fields)
    collected: list[VectorField] = list(base)
    level = base
    for lvl in range(depth):
        if lvl == 0:
            # antisymmetry makes [Xi, Xi] = 0 and [Xj, Xi] = -[Xi, Xj]; only
            # the i < j pairs contribute new directions
            level = [
                bracket_field(base[i], base[j], h=h)
                for i in range(len(base))
                for j in range(i + 1, len(base))
            ]
        else:
            level = [bracket_field(V, B, h=h) for V in level for B in base]
        collected.extend(level)

    vectors = np.stack([f.eval(x) for f in collected])
    if tangent_projector is not None:
        vectors = np.stack([tangent_projector(v) for v in vectors])
    sigma = np.linalg.svd(vectors, compute_uv=False)
    if sigma.size == 0 or sigma[0] == 0.0:
        return 0
    return int(np.sum(sigma > RANK_RTOL * sigma[0]))


# ---------------------------------------------------------------------------
# Built-in families
# ---------------------------------------------------------------------------


def builtin_brockett() -> FieldFamily:
    """The planar-input family X1 = (1, 0, -x2), X2 = (0, 1, x1) on R^3.

    Both fields carry exact flows: the flow of a constant linear combination
    a1 X1 + a2 X2 is affine in the starting point, because the x3 component
    integrates a quantity that stays constant along the flow.
    """

    def x1_eval(p: Array) -> Array:
        out = np.zeros_like(p)
        out[..., 0] = 1.0
        out[..., 2] = -p[..., 1]
        return out

    def x1_flow(p: Array, t) -> Array:
        t = np.asarray(t, dtype=float)
        out = np.array(p, dtype=float, copy=True)
        out[..., 0] = p[..., 0] + t
        out[..., 2] = p[..., 2] - p[..., 1] * t
        return out

    def x2_eval(p: Array) -> Array:
        out = np.zeros_like(p)
        out[..., 1] = 1.0
        out[..., 2] = p[..., 0]
        return out

    def x2_flow(p: Array, t) -> Array:
        t = np.asarray(t, dtype=float)
        out = np.array(p, dtype=float, copy=True)
        out[..., 1] = p[..., 1] + t
        out[..., 2] = p[..., 2] + p[..., 0] * t
        return out

    return FieldFamily(
        fields=(
            VectorField("X1", 3, x1_eval, x1_flow),
            VectorField("X2", 3, x2_eval, x2_flow),
        ),
        dim=3,
    )


# Rotation generators about the z, y and x axes.  B2 B1 - B1 B2 = B3, so the
# numeric bracket of the first two fields reproduces the third.
_B1 = np.array([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 0.0]])
_B2 = np.array([[0.0, 0.0, 1.0], [0.0, 0.0, 0.0], [-1.0, 0.0, 0.0]])
_B3 = np.array([[0.0, 0.0, 0.0], [0.0, 0.0, -1.0], [0.0, 1.0, 0.0]])


def _rotation_field(name: str, mat: Array, axis: int) -> VectorField:
    """A field x -> B x whose exact flow is the rotation e^{tB}."""

    # indices of the plane that rotates (the `axis` coordinate is fixed)
    i, j = [k for k in range(3) if k != axis]

    def f_eval(p: Array) -> Array:
        return p @ mat.T

    def f_flow(p: Array, t) -> Array:
        t = np.asarray(t, dtype=float)
        c, s = np.cos(t), np.sin(t)
        out = np.array(p, dtype=float, copy=True)
        # e^{tB} rotates the (i, j) plane; signs follow from B itself
        sign = mat[j, i]
        out[..., i] = c * p[..., i] - sign * s * p[..., j]
        out[..., j] = sign * s * p[..., i] + c * p[..., j]
        return out

    return VectorField(name, 3, f_eval, f_flow)


def builtin_sphere() -> FieldFamily:
    """Three rotation fields on S^2 (only the first two are controls).

    The family is tangent to the unit sphere, and every field's exact flow is
    a closed-form rotation, so trajectories stay on the sphere to roundoff.
    """
    return FieldFamily(
        fields=(
            _rotation_field("R1", _B1, axis=2),
            _rotation_field("R2", _B2, axis=1),
            _rotation_field("R3", _B3, axis=0),
        ),
        dim=3,
    )


def builtin_coordinate(dim: int) -> FieldFamily:
    """The full coordinate frame d/dx_1, ..., d/dx_dim (abelian)."""
    if dim < 1:
        raise ValueError(f"dimension must be at least 1, got {dim}")

    def make(i: int) -> VectorField:
        def f_eval(p: Array) -> Array:
            out = np.zeros_like(p)
            out[..., i] = 1.0
            return out

        def f_flow(p: Array, t) -> Array:
            t = np.asarray(t, dtype=float)
            out = np.array(p, dtype=float, copy=True)
            out[..., i] = p[..., i] + t
            return out

        return VectorField(f"E{i + 1}", dim, f_eval, f_flow)

    return FieldFamily(fields=tuple(make(i) for i in range(dim)), dim=dim)


_BUILTIN_FAMILIES = {
    "brockett": builtin_brockett,
    "sphere": builtin_sphere,
}


def family_by_name(name: str, dim: int = 3) -> FieldFamily:
    """Look up a built-in family by its scenario-file name."""
    if name == "coordinate":
        return builtin_coordinate(dim)
    try:
        return _BUILTIN_FAMILIES[name]()
    except KeyError:
        known = ", ".join(sorted(_BUILTIN_FAMILIES) + ["coordinate"])
        raise ValueError(f"unknown field family '{name}' (known: {known})") from None
