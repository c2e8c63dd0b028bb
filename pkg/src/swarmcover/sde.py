"""Particle simulator: reflected Stratonovich dynamics with optional switching.

N particles move under ``dx = sum_i (u_i dt + sqrt(2) v_i o dW_i) X_i(x)``
inside a box (specular reflection) or on the unit sphere (retraction).  Each
step replaces the Brownian increments by their piecewise-linear interpolant
and integrates the resulting ODE, which converges to the Stratonovich
solution as dt -> 0.  The inner ODE solve is either a Heun (explicit
trapezoidal) loop or, when every field carries a closed-form flow, a
Strang-ordered composition of exact flows with coefficients frozen at the
step start.

Two control laws are provided.  The non-interacting law sets ``u = 0`` and
``v = sqrt(D) / y_d(x)``, whose stationary density is the target ``y_d``.
The switching law keeps ``v = sqrt(D)`` constant but toggles particles
between Moving and Motionless at rates fed back from a kernel density
estimate of the swarm.

Determinism: all randomness of step ``s`` comes from a counter-based stream
keyed by the master seed with counter ``[0, 0, 0, s]``, and every draw is
made up front in a fixed order.  Worker threads only partition pure
per-particle computations over disjoint slices, so the output is
byte-identical for any thread count.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Union

import numpy as np

from .diagnostics import MOTIONLESS, MOVING, BoxBins, RunRecord, SphereBins, moving_fraction
from .domains import BoxDomain, SphereDomain
from .meanfield import (
    DEFAULT_RATE_CAP,
    Kernel,
    ReactionFunctions,
    SpatialHash,
    kde,
    transition_rates,
)
from .targets import TargetDensity
from .vectorfields import FieldFamily

Array = np.ndarray

DEFAULT_SUBSTEPS = 4


class SimulationError(RuntimeError):
    """A run cannot continue (non-finite state or inconsistent setup)."""


class ControlVariant(str, Enum):
    NONINTERACTING = "noninteracting"
    SWITCHING = "switching"


class DensitySource(str, Enum):
    """Which particles feed the density estimate behind the switching rates."""

    MOTIONLESS_ONLY = "motionless"
    ALL_AGENTS = "all"


@dataclass(frozen=True)
class ControlLaw:
    variant: ControlVariant
    D: float
    target: TargetDensity
    k: Optional[float] = None
    kernel: Optional[Kernel] = None
    density_source: DensitySource = DensitySource.MOTIONLESS_ONLY
    q_max: float = DEFAULT_RATE_CAP

    def __post_init__(self) -> None:
        if self.D <= 0:
            raise ValueError(f"diffusion gain must be positive, got {self.D}")
        if self.variant == ControlVariant.SWITCHING:
            if self.k is None or self.k <= 0:
                raise ValueError("switching law needs a positive reaction gain k")
            if self.kernel is None:
                raise ValueError("switching law needs a kernel")

    @property
    def reactions(self) -> ReactionFunctions:
        return ReactionFunctions(float(self.k))


@dataclass(frozen=True)
class SimConfig:
    dt: float
    t_final: float
    n_particles: int
    seed: int
    substeps: int = DEFAULT_SUBSTEPS
    snapshot_every: int = 100

    def __post_init__(self) -> None:
        if self.dt <= 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.t_final < 0:
            raise ValueError(f"t_final must be nonnegative, got {self.t_final}")
        if self.n_particles < 1:
            raise ValueError(f"need at least one particle, got {self.n_particles}")
        if self.substeps < 1:
            raise ValueError(f"substeps must be >= 1, got {self.substeps}")
        if self.snapshot_every < 1:
            raise ValueError(f"snapshot_every must be >= 1, got {self.snapshot_every}")
        if not (0 <= self.seed < 2**64):
            raise ValueError("seed must fit in an unsigned 64-bit integer")

    @property
    def n_steps(self) -> int:
        return int(round(self.t_final / self.dt))


@dataclass
class SwarmState:
    """Positions and discrete motion states of the swarm at one instant."""

    positions: Array
    motion_states: Array
    time: float = 0.0
    step_index: int = 0

    def __post_init__(self) -> None:
        pos = np.asarray(self.positions, dtype=float)
        if pos.ndim != 2:
            raise ValueError("positions must be an (N, dim) array")
        states = np.asarray(self.motion_states, dtype=np.int64)
        if states.shape != (pos.shape[0],):
            raise ValueError("motion_states must be one code per particle")
        if not np.all((states == MOVING) | (states == MOTIONLESS)):
            raise ValueError("motion states must be 0 (moving) or 1 (motionless)")
        self.positions = pos
        self.motion_states = states

    @property
    def n(self) -> int:
        return self.positions.shape[0]


def _step_rng(seed: int, step: int) -> np.random.Generator:
    """Counter-based stream for one step: key = seed, counter high word = step."""
    return np.random.Generator(np.random.Philox(key=seed, counter=[0, 0, 0, step]))


def _init_rng(seed: int) -> np.random.Generator:
    # a lane no step stream can reach (step streams keep counter[2] = 0)
    return np.random.Generator(np.random.Philox(key=seed, counter=[0, 0, 1, 0]))


def noninteracting_coefficients(law: ControlLaw, x: Array) -> tuple[Array, Array]:
    """Coefficients (u, v) of the diffusion-only law at point(s) x.

    The same pair applies to every control field: ``u = 0`` and
    ``v = sqrt(D) / y_d(x)``, the choice whose generator has stationary
    density ``y_d``.  Requires the target to be positive at ``x``.
    """
    if law.variant != ControlVariant.NONINTERACTING:
        raise ValueError("coefficients are defined for the non-interacting law")
    y = np.asarray(law.target.eval(np.asarray(x, dtype=float)), dtype=float)
    if np.any(y <= 0.0):
        raise ValueError(
            "non-interacting control requires a target density bounded below "
            "by a positive constant; it vanishes at a queried point"
        )
    return np.zeros_like(y), math.sqrt(law.D) / y


def integrate_fields(
    positions: Array,
    coeffs: Array,
    family: FieldFamily,
    dt: float,
    substeps: int = DEFAULT_SUBSTEPS,
) -> Array:
    """Integrate ``dx/dt = sum_i coeffs_i X_i(x)`` over [0, dt].

    ``coeffs`` has shape (N, m) and is held constant over the step.  When
    every field has a closed-form flow the step is the symmetric (Strang)
    composition  half(1) ... half(m-1) full(m) half(m-1) ... half(1), which
    is exact for commuting or nilpotent families and second-order otherwise;
    without flows, ``substeps`` Heun passes are used.
    """
    x = np.asarray(positions, dtype=float)
    coeffs = np.asarray(coeffs, dtype=float)
    m = len(family.fields)
    if coeffs.shape != (x.shape[0], m):
        raise ValueError(f"coefficient array must have shape (N, {m})")
    if family.has_exact_flows:
        if m == 1:
            return family.fields[0].exact_flow(x, dt * coeffs[:, 0])
        for i in range(m - 1):
            x = family.fields[i].exact_flow(x, 0.5 * dt * coeffs[:, i])
        x = family.fields[m - 1].exact_flow(x, dt * coeffs[:, m - 1])
        for i in range(m - 2, -1, -1):
            x = family.fields[i].exact_flow(x, 0.5 * dt * coeffs[:, i])
        return x

    def rhs(p: Array) -> Array:
        out = np.zeros_like(p)
        for i, fld in enumerate(family.fields):
            out += coeffs[:, i, None] * fld.eval(p)
        return out

    h = dt / substeps
    x = x.copy()
    for _ in range(substeps):
        f0 = rhs(x)
        xp = x + h * f0
        f1 = rhs(xp)
        x += 0.5 * h * (f0 + f1)
    return x


def _noise_coefficients(
    law: ControlLaw, positions: Array, normals: Array, dt: float
) -> Array:
    """Per-field slope coefficients u + sqrt(2) v dW / dt for one step.

    ``normals`` are standard normals, so dW = normals * sqrt(dt) and the
    noise slope is sqrt(2) v normals / sqrt(dt).  Drift u is zero for both
    implemented laws.
    """
    if law.variant == ControlVariant.NONINTERACTING:
        _, v = noninteracting_coefficients(law, positions)
        v = v[:, None]
    else:
        v = math.sqrt(law.D)
    return math.sqrt(2.0) * v * normals / math.sqrt(dt)


def _confine(domain, x: Array) -> Array:
    if isinstance(domain, SphereDomain):
        return domain.retract(x)
    return domain.reflect(x)


def _ensure_finite(x: Array, step_index: int, particle_ids: Array) -> None:
    bad = ~np.all(np.isfinite(x), axis=-1)
    if np.any(bad):
        pid = int(particle_ids[np.argmax(bad)])
        raise SimulationError(
            f"non-finite position after step {step_index} for particle {pid}; "
            "reduce dt or check the control coefficients"
        )


def stratonovich_step(
    state: SwarmState,
    law: ControlLaw,
    family: FieldFamily,
    domain,
    dt: float,
    rng: np.random.Generator,
    substeps: int = DEFAULT_SUBSTEPS,
) -> SwarmState:
    """Advance every Moving particle by one noise increment; others stay put."""
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    normals = rng.standard_normal((state.n, len(family.fields)))
    moving = np.flatnonzero(state.motion_states == MOVING)
    positions = state.positions.copy()
    if moving.size:
        sub = positions[moving]
        coeffs = _noise_coefficients(law, sub, normals[moving], dt)
        moved = integrate_fields(sub, coeffs, family, dt, substeps)
        _ensure_finite(moved, state.step_index + 1, moving)
        positions[moving] = _confine(domain, moved)
    return SwarmState(positions, state.motion_states.copy(), state.time + dt, state.step_index + 1)


def _switch(states: Array, q1: Array, q2: Array, dt: float, uniforms: Array) -> Array:
    q1 = np.asarray(q1, dtype=float)
    q2 = np.asarray(q2, dtype=float)
    if q1.size and (q1.min() < 0 or q2.min() < 0):
        raise ValueError("internal error: negative transition rate")
    p_stop = -np.expm1(-q1 * dt)
    p_resume = -np.expm1(-q2 * dt)
    moving = states == MOVING
    out = states.copy()
    out[moving & (uniforms < p_stop)] = MOTIONLESS
    out[~moving & (uniforms < p_resume)] = MOVING
    return out


def switching_step(
    state: SwarmState, rates: tuple[Array, Array], dt: float, rng: np.random.Generator
) -> SwarmState:
    """Toggle motion states at the given rates; positions untouched.

    A Moving particle stops with probability 1 - exp(-q1 dt), a Motionless
    one resumes with probability 1 - exp(-q2 dt) (exact exponential-clock
    probabilities, valid for large q dt).  Time is not advanced here; the
    companion position step owns the clock.
    """
    q1, q2 = rates
    uniforms = rng.random(state.n)
    new_states = _switch(state.motion_states, q1, q2, dt, uniforms)
    return SwarmState(state.positions.copy(), new_states, state.time, state.step_index)


def _slices(n: int, parts: int) -> list[slice]:
    parts = max(1, min(parts, n))
    bounds = np.linspace(0, n, parts + 1).astype(int)
    return [slice(a, b) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]


def default_bins(domain) -> Union[BoxBins, SphereBins]:
    """Histogram bins used for run metrics when none are supplied."""
    if isinstance(domain, SphereDomain):
        return SphereBins(bands=12, sectors=24)
    cells = 20 if domain.dim == 1 else 10
    return BoxBins(domain.lo, domain.hi, (cells,) * domain.dim)


def _initial_state(
    config: SimConfig, domain, initial
) -> SwarmState:
    if initial is None:
        rng = _init_rng(config.seed)
        positions = domain.uniform_sample(rng, config.n_particles)
        states = np.full(config.n_particles, MOVING, dtype=np.int64)
        return SwarmState(positions, states)
    if isinstance(initial, SwarmState):
        state = SwarmState(
            initial.positions.copy(), initial.motion_states.copy(), initial.time, initial.step_index
        )
    elif callable(initial):
        rng = _init_rng(config.seed)
        drawn = initial(rng, config.n_particles)
        if isinstance(drawn, tuple):
            positions, states = drawn
        else:
            positions, states = drawn, np.full(config.n_particles, MOVING, dtype=np.int64)
        state = SwarmState(np.asarray(positions, dtype=float), states)
    else:
        raise TypeError("initial must be None, a SwarmState, or a sampler(rng, n)")
    if state.n != config.n_particles:
        raise ValueError(
            f"initial state has {state.n} particles, config expects {config.n_particles}"
        )
    return state


def _config_echo(config: SimConfig, law: ControlLaw, family: FieldFamily, domain) -> dict:
    dom: dict
    if isinstance(domain, SphereDomain):
        dom = {"kind": "sphere"}
    else:
        dom = {"kind": "box", "lo": domain.lo.tolist(), "hi": domain.hi.tolist()}
    control = {
        "variant": law.variant.value,
        "D": law.D,
        "density_source": law.density_source.value,
        "q_max": law.q_max,
    }
    if law.k is not None:
        control["k"] = law.k
    if law.kernel is not None:
        control["epsilon"] = law.kernel.epsilon
    return {
        "domain": dom,
        "fields": {"family": [f.name for f in family.fields]},
        "control": control,
        "target": {"kind": law.target.name},
        "sim": {
            "dt": config.dt,
            "t_final": config.t_final,
            "n_particles": config.n_particles,
            "seed": config.seed,
            "substeps": config.substeps,
            "snapshot_every": config.snapshot_every,
        },
    }


def run(
    config: SimConfig,
    law: ControlLaw,
    family: FieldFamily,
    domain,
    initial=None,
    threads: int = 1,
    bins: Optional[Union[BoxBins, SphereBins]] = None,
    config_echo: Optional[dict] = None,
) -> RunRecord:
    """Run the closed loop and collect snapshots plus metrics.

    Each step: estimate the density from the step-start snapshot, update the
    motion states, then advance the particles that are now Moving.  Metrics
    and particle snapshots are recorded at t = 0, every ``snapshot_every``
    steps, and at the final step.  With ``threads > 1`` the density queries
    and the integrator run on slices of the swarm; the result is identical
    to the single-threaded run, byte for byte.
    """
    if isinstance(domain, SphereDomain):
        if family.dim != 3:
            raise ValueError("sphere runs need 3-dimensional fields")
        hash_lo, hash_hi = np.full(3, -1.0), np.full(3, 1.0)
    else:
        if family.dim != domain.dim:
            raise ValueError(
                f"field dimension {family.dim} does not match domain dimension {domain.dim}"
            )
        hash_lo, hash_hi = domain.lo, domain.hi

    state = _initial_state(config, domain, initial)
    if not np.all(domain.contains(state.positions)):
        raise ValueError("initial positions must lie in the domain")

    switching = law.variant == ControlVariant.SWITCHING
    if not switching and np.any(state.motion_states != MOVING):
        raise ValueError("non-interacting runs require every particle to be Moving")

    positions = state.positions
    states = state.motion_states
    N = config.n_particles
    m = len(family.fields)
    dt = config.dt
    n_steps = config.n_steps

    if bins is None:
        bins = default_bins(domain)
    target_vals = bins.target_values(law.target.eval)

    record = RunRecord(config=config_echo or _config_echo(config, law, family, domain))

    def emit(t: float) -> None:
        metric_pos = positions[states == MOTIONLESS] if switching else positions
        density = bins.density(metric_pos, N)
        record.add_metrics(
            t, bins.l1(density, target_vals), moving_fraction(states), positions.shape[0] / N
        )
        record.add_particle_snapshot(t, positions, states)

    pool = ThreadPoolExecutor(max_workers=threads) if threads > 1 else None
    try:
        emit(0.0)
        for s in range(n_steps):
            rng = _step_rng(config.seed, s)
            normals = rng.standard_normal((N, m))
            if switching:
                uniforms = rng.random(N)
                if law.density_source == DensitySource.MOTIONLESS_ONLY:
                    sources = positions[states == MOTIONLESS]
                else:
                    sources = positions
                shash = SpatialHash(
                    sources, law.kernel.support_radius_ambient, hash_lo, hash_hi
                )
                if pool is None:
                    rho = kde(law.kernel, sources, N, positions, spatial_hash=shash)
                else:
                    rho = np.empty(N)

                    def kde_slice(sl: slice) -> None:
                        rho[sl] = kde(
                            law.kernel, sources, N, positions[sl], spatial_hash=shash
                        )

                    list(pool.map(kde_slice, _slices(N, threads)))
                q1, q2 = transition_rates(
                    law.reactions, rho, law.target.eval(positions), law.q_max
                )
                states = _switch(states, q1, q2, dt, uniforms)

            moving = np.flatnonzero(states == MOVING)
            if moving.size:
                sub = positions[moving]
                coeffs = _noise_coefficients(law, sub, normals[moving], dt)
                if pool is None or moving.size < 512:
                    moved = integrate_fields(sub, coeffs, family, dt, config.substeps)
                else:
                    moved = np.empty_like(sub)

                    def drive_slice(sl: slice) -> None:
                        moved[sl] = integrate_fields(
                            sub[sl], coeffs[sl], family, dt, config.substeps
                        )

                    list(pool.map(drive_slice, _slices(moving.size, threads)))
                _ensure_finite(moved, s + 1, moving)
                positions[moving] = _confine(domain, moved)

            if (s + 1) % config.snapshot_every == 0 or s + 1 == n_steps:
                emit((s + 1) * dt)
    finally:
        if pool is not None:
            pool.shutdown(wait=True)

    return record
