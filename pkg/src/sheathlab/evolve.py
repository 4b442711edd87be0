"""Time integration of the fluid system coupled to Poisson and the wall-charge law.

Unknowns are (v, u, T) with v = log n.  Every characteristic speed is
negative in the sheath regime, so all spatial derivatives use rightward
(upwind) one-sided stencils and the wall x = 0 needs no fluid boundary data.
The last node is pinned to the far-field values.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Collection

import numpy as np

from . import model, poisson
from .diagnostics import DiagnosticRecord, RunningSupremum, WeightSpec, make_record
from .errors import (CharacteristicSignViolation, DomainError, NonExistence, PositivityViolation,
                     SheathLabError)
from .model import PhysicalParams
from .poisson import PotentialState
from .stationary import Existence, Grid, StationaryProfile, existence_check, solve_sheath

SHAPES = ("gaussian_bump", "exponential_tail", "algebraic_tail", "uniform")


@dataclass(frozen=True, eq=False)
class FluidState:
    t: float
    v: np.ndarray
    u: np.ndarray
    T: np.ndarray
    grid: Grid

    @property
    def n(self) -> np.ndarray:
        return np.exp(self.v)


@dataclass(frozen=True)
class PerturbationSpec:
    """Initial perturbation amplitude * shape(x) added to the chosen components.

    ``decay`` is the rate of ``exponential_tail``; ``lam`` sets the algebraic
    tail (1 + x)^-(lam/2 + 1).  With ``random_mix`` the per-component
    coefficients are drawn uniformly from [-1, 1] using ``seed``.
    """

    shape: str = "gaussian_bump"
    amplitude: float = 0.0
    center: float = 5.0
    width: float = 1.0
    decay: float = 1.0
    lam: float = 4.0
    components: tuple[str, ...] = ("v", "u", "T")
    q0_offset: float = 0.0
    random_mix: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.shape not in SHAPES:
            raise DomainError(f"perturbation shape must be one of {SHAPES} (got {self.shape!r})")
        bad = set(self.components) - {"v", "u", "T"}
        if bad:
            raise DomainError(f"unknown perturbation components {sorted(bad)}")
        if self.width <= 0.0 or self.decay <= 0.0:
            raise DomainError("perturbation width and decay must be positive")

    def shape_values(self, x: np.ndarray) -> np.ndarray:
        if self.shape == "gaussian_bump":
            return np.exp(-0.5 * ((x - self.center) / self.width) ** 2)
        if self.shape == "exponential_tail":
            return np.exp(-self.decay * x)
        if self.shape == "algebraic_tail":
            return (1.0 + x) ** (-(self.lam / 2.0 + 1.0))
        return np.ones_like(x)

    def coefficients(self) -> dict[str, float]:
        if self.random_mix:
            draws = np.random.default_rng(self.seed).uniform(-1.0, 1.0, size=3)
        else:
            draws = np.ones(3)
        return {c: (float(d) if c in self.components else 0.0) for c, d in zip(("v", "u", "T"), draws)}


@dataclass(frozen=True)
class SimConfig:
    params: PhysicalParams
    grid: Grid
    cfl: float = 0.5
    t_end: float = 10.0
    perturbation: PerturbationSpec = field(default_factory=PerturbationSpec)
    weight: WeightSpec = field(default_factory=WeightSpec)
    output_every: float = 0.5
    fit_model: str = "exponential"
    fit_window: tuple[float, float] | None = None
    fit_key: str = "E_weighted"

    def __post_init__(self):
        if not 0.0 < self.cfl <= 0.9:
            raise DomainError(f"cfl must lie in (0, 0.9] (got {self.cfl})")
        if not self.t_end > 0.0:
            raise DomainError(f"t_end must be positive (got {self.t_end})")
        if not self.output_every > 0.0:
            raise DomainError(f"output_every must be positive (got {self.output_every})")


def initial_state(profile: StationaryProfile, pert: PerturbationSpec) -> tuple[FluidState, float]:
    """Sheath plus perturbation, and the initial wall field E0 = q0."""
    x = profile.grid.x
    s = pert.amplitude * pert.shape_values(x)
    k = pert.coefficients()
    v = profile.v + k["v"] * s
    u = profile.u + k["u"] * s
    T = profile.T + k["T"] * s
    # far node carries the pinned boundary values
    v[-1], u[-1], T[-1] = profile.v[-1], profile.u[-1], profile.T[-1]
    if np.any(T <= 0.0):
        raise PositivityViolation(f"initial temperature reaches {T.min():.6g} <= 0")
    params = profile.params
    E0 = params.q0 if params.q0 is not None else float(profile.phi_x[0]) + pert.q0_offset
    return FluidState(0.0, v, u, T, profile.grid), float(E0)


def upwind_dx(f: np.ndarray, dx: float) -> np.ndarray:
    """Rightward one-sided derivative: second order up to node N-3, first order at N-2."""
    out = np.zeros_like(f)
    out[:-2] = (-3.0 * f[:-2] + 4.0 * f[1:-1] - f[2:]) / (2.0 * dx)
    out[-2] = (f[-1] - f[-2]) / dx
    return out


def check_characteristics(state: FluidState, params: PhysicalParams) -> None:
    if np.any(state.T <= 0.0):
        raise PositivityViolation(f"temperature reaches {state.T.min():.6g} <= 0 at t = {state.t:.6g}")
    _, _, lam3 = model.characteristics(state.u, state.T, params)
    if np.any(lam3 >= 0.0):
        j = int(np.argmax(lam3))
        raise CharacteristicSignViolation(
            f"lambda3 = {lam3[j]:.6g} >= 0 at x = {state.grid.x[j]:.6g}, t = {state.t:.6g}")


def rhs(state: FluidState, pot: PotentialState, params: PhysicalParams,
        frozen: Collection[str] = ()) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Time derivatives of (v, u, T); zero at the pinned far node."""
    check_characteristics(state, params)
    p = params
    dx = state.grid.dx
    v, u, T = state.v, state.u, state.T
    v_x, u_x, T_x = upwind_dx(v, dx), upwind_dx(u, dx), upwind_dx(T, dx)
    dv = -u * v_x - u_x
    du = -u * u_x - (p.R / p.m) * (T * v_x + T_x) + pot.phi_x / p.m
    dT = -u * T_x - (p.gamma - 1.0) * T * u_x
    for arr in (dv, du, dT):
        arr[-1] = 0.0
    for name, arr in (("v", dv), ("u", du), ("T", dT)):
        if name in frozen:
            arr[:] = 0.0
    return dv, du, dT


def boundary_flux(state: FluidState, pot: PotentialState, params: PhysicalParams) -> float:
    """dE0/dt = -[n u + u_e e^{-phi}] at x = 0."""
    return -(math.exp(state.v[0]) * state.u[0] + params.u_e * math.exp(-pot.phi[0]))


def max_speed(state: FluidState, params: PhysicalParams) -> float:
    lam1, _, _ = model.characteristics(state.u, state.T, params)
    fast, _, _ = model.wave_speeds(state.u, state.T, params)
    return float(max(np.max(np.abs(lam1)), np.max(np.abs(fast))))


def stable_dt(state: FluidState, params: PhysicalParams, cfl: float) -> float:
    return cfl * state.grid.dx / max_speed(state, params)


def _solve(state: FluidState, E0: float, warm: PotentialState) -> PotentialState:
    return poisson.solve_potential(state.n, E0, state.grid, initial_guess=warm.phi, phi_far=warm.phi[-1])


def step(state: FluidState, pot: PotentialState, params: PhysicalParams, cfl: float = 0.5,
         dt: float | None = None, frozen: Collection[str] = ()) -> tuple[FluidState, PotentialState]:
    """One Heun (RK2) step of the fluid fields and the wall field E0."""
    if dt is None:
        dt = stable_dt(state, params, cfl)
    k1 = rhs(state, pot, params, frozen)
    F1 = boundary_flux(state, pot, params)
    s1 = FluidState(state.t + dt, state.v + dt * k1[0], state.u + dt * k1[1], state.T + dt * k1[2], state.grid)
    if np.any(s1.T <= 0.0):
        raise PositivityViolation(f"temperature reaches {s1.T.min():.6g} <= 0 in the predictor stage")
    pot1 = _solve(s1, pot.E0 + dt * F1, pot)
    k2 = rhs(s1, pot1, params, frozen)
    F2 = boundary_flux(s1, pot1, params)
    h = 0.5 * dt
    new = FluidState(state.t + dt, state.v + h * (k1[0] + k2[0]), state.u + h * (k1[1] + k2[1]),
                     state.T + h * (k1[2] + k2[2]), state.grid)
    if np.any(new.T <= 0.0):
        raise PositivityViolation(f"temperature reaches {new.T.min():.6g} <= 0 at t = {new.t:.6g}")
    new_pot = _solve(new, pot.E0 + h * (F1 + F2), pot1)
    return new, new_pot


class SimulationAborted(SheathLabError):
    """A run stopped early; ``records`` holds the diagnostics emitted so far."""

    def __init__(self, message: str, records: list, cause: Exception):
        super().__init__(message)
        self.records = records
        self.cause = cause


@dataclass
class RunResult:
    config: SimConfig
    profile: StationaryProfile
    records: list[DiagnosticRecord]
    state: FluidState
    pot: PotentialState
    steps: int
    max_dt: float
    max_cfl: float


def prepare(config: SimConfig, profile: StationaryProfile | None = None):
    """Sheath, initial fluid state and initial potential for ``config``."""
    verdict = existence_check(config.params)
    if verdict.status is not Existence.EXISTS and verdict.status is not Existence.TRIVIAL_ONLY:
        raise NonExistence("; ".join(verdict.reasons), verdict)
    if not verdict.regime.bohm:
        raise DomainError(f"time evolution needs a Bohm regime, got {verdict.regime.tag.value}")
    if profile is None:
        profile = solve_sheath(config.params, config.grid)
    state, E0 = initial_state(profile, config.perturbation)
    pot = poisson.solve_potential(state.n, E0, state.grid, initial_guess=profile.phi,
                                  phi_far=float(profile.phi[-1]))
    return profile, state, pot


def run(config: SimConfig, profile: StationaryProfile | None = None,
        callback: Callable[[DiagnosticRecord], None] | None = None) -> RunResult:
    """Advance to ``t_end`` and emit a diagnostic record every ``output_every``."""
    profile, state, pot = prepare(config, profile)
    params = config.params
    r0 = float(pot.E0 - profile.phi_x[0])
    running = RunningSupremum()
    records: list[DiagnosticRecord] = []

    def emit(t):
        rec = make_record(t, state, pot, profile, config.weight, running, r0)
        records.append(rec)
        if callback is not None:
            callback(rec)

    n_out = int(math.floor(config.t_end / config.output_every + 1e-9))
    out_times = [k * config.output_every for k in range(1, n_out + 1)]
    if not out_times or out_times[-1] < config.t_end - 1e-12:
        out_times.append(config.t_end)

    steps, max_dt, max_cfl = 0, 0.0, 0.0
    try:
        emit(0.0)
        for t_next in out_times:
            while state.t < t_next - 1e-12:
                dt_cfl = stable_dt(state, params, config.cfl)
                remaining = t_next - state.t
                dt = remaining if dt_cfl >= remaining * (1.0 - 1e-12) else dt_cfl
                speed = max_speed(state, params)
                state, pot = step(state, pot, params, config.cfl, dt=dt)
                if dt == remaining:
                    state = replace(state, t=t_next)
                steps += 1
                max_dt = max(max_dt, dt)
                max_cfl = max(max_cfl, dt * speed / state.grid.dx)
            emit(t_next)
    except SheathLabError as exc:
        raise SimulationAborted(f"run aborted at t = {state.t:.6g}: {exc}", records, exc) from exc
    return RunResult(config, profile, records, state, pot, steps, max_dt, max_cfl)
