"""Declarative scenario files: parse, validate, serialize, build.

A scenario is a TOML document with sections ``[domain]``, ``[fields]``,
``[control]``, ``[target]``, ``[sim]`` and optionally ``[metrics]`` /
``[output]`` for particle runs, or ``[domain]``, ``[target]``, ``[oracle]``
for grid-solver runs.  Validation reports every problem with its field path
(``sim.dt: must be > 0``) rather than stopping at the first.

This module only turns text into validated objects; command orchestration
lives in the CLI.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union

import numpy as np
import toml
import tomli

from .diagnostics import BoxBins, SphereBins
from .domains import BoxDomain, SphereDomain
from .meanfield import DEFAULT_RATE_CAP, Kernel, KernelVariant
from .pde import Grid
from .sde import ControlLaw, ControlVariant, DensitySource, SimConfig, default_bins
from .targets import TargetDensity, build_target
from .vectorfields import FieldFamily, family_by_name

Domain = Union[BoxDomain, SphereDomain]


class ScenarioError(ValueError):
    """Schema violations, each tagged with its field path."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


_SECTIONS = {
    "domain": {"kind", "lo", "hi"},
    "fields": {"family"},
    "control": {"variant", "D", "k", "epsilon", "density_source", "q_max"},
    "target": {"kind", "floor", "radius", "threshold", "amplitude", "path", "intervals"},
    "sim": {"dt", "t_final", "n_particles", "seed", "substeps", "snapshot_every"},
    "metrics": {"cells_per_axis", "bands", "sectors"},
    "output": {"dir"},
    "oracle": {"kind", "cells", "dt", "t_final", "snapshot_every", "D", "k", "y0"},
}


def parse_scenario_text(text: str) -> dict:
    try:
        return tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ScenarioError([f"scenario: not valid TOML ({exc})"]) from exc


def load_scenario(path: Union[str, Path]) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ScenarioError([f"scenario: cannot read {path} ({exc})"]) from exc
    return parse_scenario_text(text)


def serialize_scenario(raw: dict) -> str:
    """Render a scenario back to TOML (parse -> serialize -> parse is stable)."""
    return toml.dumps(raw)


def _check_sections(raw: dict, errors: list) -> None:
    for name, table in raw.items():
        if name not in _SECTIONS:
            errors.append(f"{name}: unknown section")
        elif not isinstance(table, dict):
            errors.append(f"{name}: expected a table")
        else:
            for key in table:
                if key not in _SECTIONS[name]:
                    errors.append(f"{name}.{key}: unknown key")


def _get(table: dict, section: str, key: str, kinds, errors: list, required=False, default=None):
    if key not in table:
        if required:
            errors.append(f"{section}.{key}: required")
        return default
    v = table[key]
    if isinstance(v, bool) and bool not in (kinds if isinstance(kinds, tuple) else (kinds,)):
        errors.append(f"{section}.{key}: expected a number, got a boolean")
        return default
    if not isinstance(v, kinds):
        names = (
            "/".join(k.__name__ for k in kinds) if isinstance(kinds, tuple) else kinds.__name__
        )
        errors.append(f"{section}.{key}: expected {names}, got {type(v).__name__}")
        return default
    return v


def _positive(value, section: str, key: str, errors: list) -> None:
    if value is not None and value <= 0:
        errors.append(f"{section}.{key}: must be > 0")


def _build_domain(raw: dict, errors: list) -> Optional[Domain]:
    table = raw.get("domain")
    if table is None:
        errors.append("domain: required section")
        return None
    kind = _get(table, "domain", "kind", str, errors, required=True)
    if kind == "sphere":
        for key in ("lo", "hi"):
            if key in table:
                errors.append(f"domain.{key}: not applicable to the sphere")
        return SphereDomain()
    if kind == "box":
        lo = _get(table, "domain", "lo", list, errors, required=True)
        hi = _get(table, "domain", "hi", list, errors, required=True)
        if lo is None or hi is None:
            return None
        if len(lo) != len(hi) or not 1 <= len(lo) <= 3:
            errors.append("domain.lo/hi: need matching lengths between 1 and 3")
            return None
        try:
            return BoxDomain(np.asarray(lo, dtype=float), np.asarray(hi, dtype=float))
        except (TypeError, ValueError) as exc:
            errors.append(f"domain: {exc}")
            return None
    if kind is not None:
        errors.append(f"domain.kind: unknown kind '{kind}'")
    return None


def _build_target(raw: dict, domain: Optional[Domain], errors: list) -> Optional[TargetDensity]:
    table = raw.get("target")
    if table is None:
        errors.append("target: required section")
        return None
    kind = _get(table, "target", "kind", str, errors, required=True)
    if kind is None or domain is None:
        return None
    kwargs = {k: v for k, v in table.items() if k != "kind"}
    if "intervals" in kwargs:
        try:
            kwargs["intervals"] = tuple(tuple(float(v) for v in pair) for pair in kwargs["intervals"])
        except (TypeError, ValueError):
            errors.append("target.intervals: expected a list of [a, b] pairs")
            return None
    try:
        return build_target(kind, domain, **kwargs)
    except (TypeError, ValueError) as exc:
        errors.append(f"target: {exc}")
        return None


@dataclass
class ParticleScenario:
    raw: dict
    domain: Domain
    family: FieldFamily
    law: ControlLaw
    config: SimConfig
    bins: Union[BoxBins, SphereBins]
    out_dir: Optional[str]


@dataclass
class OracleScenario:
    raw: dict
    domain: BoxDomain
    target: TargetDensity
    kind: str
    grid: Grid
    dt: float
    t_final: float
    snapshot_every: int
    D: float
    k: Optional[float]
    y0: str
    out_dir: Optional[str]


def scenario_kind(raw: dict) -> str:
    return "oracle" if "oracle" in raw else "particle"


def _out_dir(raw: dict, errors: list) -> Optional[str]:
    table = raw.get("output")
    if table is None:
        return None
    return _get(table, "output", "dir", str, errors)


def build_particle_scenario(raw: dict) -> ParticleScenario:
    errors: list[str] = []
    _check_sections(raw, errors)
    if "oracle" in raw:
        errors.append("oracle: not applicable to a particle run")

    domain = _build_domain(raw, errors)
    target = _build_target(raw, domain, errors)

    fields_table = raw.get("fields")
    family = None
    if fields_table is None:
        errors.append("fields: required section")
    else:
        name = _get(fields_table, "fields", "family", str, errors, required=True)
        if name is not None and domain is not None:
            dim = 3 if isinstance(domain, SphereDomain) else domain.dim
            try:
                family = family_by_name(name, dim)
            except (KeyError, ValueError) as exc:
                errors.append(f"fields.family: {exc}")
            if family is not None:
                if isinstance(domain, SphereDomain) and name != "sphere":
                    errors.append("fields.family: sphere runs need the 'sphere' family")
                elif isinstance(domain, BoxDomain) and family.dim != domain.dim:
                    errors.append(
                        f"fields.family: family dimension {family.dim} does not match "
                        f"the {domain.dim}-dimensional box"
                    )

    control = raw.get("control")
    law = None
    if control is None:
        errors.append("control: required section")
    else:
        variant = _get(control, "control", "variant", str, errors, required=True)
        D = _get(control, "control", "D", (int, float), errors, required=True)
        _positive(D, "control", "D", errors)
        if variant not in (None, "noninteracting", "switching"):
            errors.append(f"control.variant: unknown variant '{variant}'")
            variant = None
        k = _get(control, "control", "k", (int, float), errors)
        epsilon = _get(control, "control", "epsilon", (int, float), errors)
        q_max = _get(control, "control", "q_max", (int, float), errors, default=DEFAULT_RATE_CAP)
        _positive(q_max, "control", "q_max", errors)
        source = _get(control, "control", "density_source", str, errors, default="motionless")
        if source not in ("motionless", "all"):
            errors.append(f"control.density_source: unknown source '{source}'")
            source = "motionless"
        if variant == "switching":
            if k is None:
                errors.append("control.k: required for the switching law")
            else:
                _positive(k, "control", "k", errors)
            if epsilon is None:
                errors.append("control.epsilon: required for the switching law")
            else:
                _positive(epsilon, "control", "epsilon", errors)
        if variant == "noninteracting":
            for key in ("k", "epsilon"):
                if key in control:
                    errors.append(f"control.{key}: not applicable to the non-interacting law")
            if target is not None and target.min_value <= 0:
                errors.append(
                    "control: the non-interacting law requires a target density "
                    "bounded below by a positive constant"
                )
        if not errors and variant is not None and domain is not None and target is not None:
            kernel = None
            if variant == "switching":
                if isinstance(domain, SphereDomain):
                    kernel = Kernel(float(epsilon), KernelVariant.SPHERE)
                else:
                    kernel = Kernel(float(epsilon), KernelVariant.EUCLIDEAN, dim=domain.dim)
            try:
                law = ControlLaw(
                    variant=ControlVariant(variant),
                    D=float(D),
                    target=target,
                    k=None if k is None else float(k),
                    kernel=kernel,
                    density_source=DensitySource.MOTIONLESS_ONLY
                    if source == "motionless"
                    else DensitySource.ALL_AGENTS,
                    q_max=float(q_max),
                )
            except ValueError as exc:
                errors.append(f"control: {exc}")

    sim = raw.get("sim")
    config = None
    if sim is None:
        errors.append("sim: required section")
    else:
        dt = _get(sim, "sim", "dt", (int, float), errors, required=True)
        t_final = _get(sim, "sim", "t_final", (int, float), errors, required=True)
        n_particles = _get(sim, "sim", "n_particles", int, errors, required=True)
        seed = _get(sim, "sim", "seed", int, errors, required=True)
        substeps = _get(sim, "sim", "substeps", int, errors, default=4)
        snapshot_every = _get(sim, "sim", "snapshot_every", int, errors, default=100)
        if None not in (dt, t_final, n_particles, seed):
            try:
                config = SimConfig(
                    dt=float(dt),
                    t_final=float(t_final),
                    n_particles=n_particles,
                    seed=seed,
                    substeps=substeps,
                    snapshot_every=snapshot_every,
                )
            except ValueError as exc:
                errors.append(f"sim: {exc}")

    bins = None
    metrics = raw.get("metrics")
    if metrics is not None and domain is not None:
        if isinstance(domain, SphereDomain):
            bands = _get(metrics, "metrics", "bands", int, errors, default=12)
            sectors = _get(metrics, "metrics", "sectors", int, errors, default=24)
            if "cells_per_axis" in metrics:
                errors.append("metrics.cells_per_axis: not applicable to the sphere")
            try:
                bins = SphereBins(bands=bands, sectors=sectors)
            except ValueError as exc:
                errors.append(f"metrics: {exc}")
        else:
            cells = _get(metrics, "metrics", "cells_per_axis", int, errors, default=10)
            for key in ("bands", "sectors"):
                if key in metrics:
                    errors.append(f"metrics.{key}: only applicable to the sphere")
            if cells is not None and not 2 <= cells <= 64:
                errors.append("metrics.cells_per_axis: must be between 2 and 64")
            else:
                bins = BoxBins(domain.lo, domain.hi, (cells,) * domain.dim)

    out_dir = _out_dir(raw, errors)

    if errors:
        raise ScenarioError(errors)
    if bins is None:
        bins = default_bins(domain)
    return ParticleScenario(raw, domain, family, law, config, bins, out_dir)


def build_oracle_scenario(raw: dict) -> OracleScenario:
    errors: list[str] = []
    _check_sections(raw, errors)
    for name in ("fields", "control", "sim", "metrics"):
        if name in raw:
            errors.append(f"{name}: not applicable to an oracle run")

    domain = _build_domain(raw, errors)
    if isinstance(domain, SphereDomain):
        errors.append("domain.kind: the grid solver runs on 1-D/2-D boxes only")
        domain = None
    if domain is not None and domain.dim > 2:
        errors.append("domain: the grid solver runs on 1-D/2-D boxes only")
        domain = None
    target = _build_target(raw, domain, errors)

    table = raw.get("oracle")
    if table is None:
        errors.append("oracle: required section")
        raise ScenarioError(errors)

    kind = _get(table, "oracle", "kind", str, errors, required=True)
    if kind not in (None, "linear", "semilinear"):
        errors.append(f"oracle.kind: unknown kind '{kind}'")
        kind = None
    cells = _get(table, "oracle", "cells", (int, list), errors, required=True)
    dt = _get(table, "oracle", "dt", (int, float), errors, required=True)
    _positive(dt, "oracle", "dt", errors)
    t_final = _get(table, "oracle", "t_final", (int, float), errors, required=True)
    if t_final is not None and t_final < 0:
        errors.append("oracle.t_final: must be >= 0")
    snapshot_every = _get(table, "oracle", "snapshot_every", int, errors, default=100)
    _positive(snapshot_every, "oracle", "snapshot_every", errors)
    D = _get(table, "oracle", "D", (int, float), errors, default=1.0)
    _positive(D, "oracle", "D", errors)
    k = _get(table, "oracle", "k", (int, float), errors)
    y0 = _get(table, "oracle", "y0", str, errors, default="uniform")
    if y0 not in ("uniform", "equilibrium"):
        errors.append(f"oracle.y0: unknown initial state '{y0}'")
    if kind == "semilinear":
        if k is None:
            errors.append("oracle.k: required for the semilinear system")
        else:
            _positive(k, "oracle", "k", errors)
    if kind == "linear":
        if k is not None:
            errors.append("oracle.k: not applicable to the linear model")
        if target is not None and target.min_value <= 0:
            errors.append("oracle: the linear model needs a strictly positive target")

    grid = None
    if domain is not None and cells is not None:
        shape = tuple(cells) if isinstance(cells, list) else (cells,) * domain.dim
        if len(shape) != domain.dim:
            errors.append("oracle.cells: cell counts do not match the domain dimension")
        else:
            try:
                grid = Grid(domain.lo, domain.hi, shape)
            except (TypeError, ValueError) as exc:
                errors.append(f"oracle.cells: {exc}")

    out_dir = _out_dir(raw, errors)

    if errors:
        raise ScenarioError(errors)
    return OracleScenario(
        raw=raw,
        domain=domain,
        target=target,
        kind=kind,
        grid=grid,
        dt=float(dt),
        t_final=float(t_final),
        snapshot_every=snapshot_every,
        D=float(D),
        k=None if k is None else float(k),
        y0=y0,
        out_dir=out_dir,
    )
