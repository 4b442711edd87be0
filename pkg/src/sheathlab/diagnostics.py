"""Perturbation fields, weighted Sobolev norms, the E0 energy and decay fits."""
from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DegenerateFit, DomainError, GridMismatch
from .stationary import Grid, StationaryProfile, format_float, sample_profile

RECORD_COLUMNS = ("t", "E_weighted", "norm_phi_psi_zeta_h2", "norm_sigma", "sigma0", "sigmax0", "E0_boundary")
#: records whose fitted quantity falls below this count as numerically zero
FIT_FLOOR = 1e-14


@dataclass(frozen=True)
class WeightSpec:
    """Spatial weight e^{beta x} (exponential) or (1 + beta x)^alpha (algebraic)."""

    kind: str = "exponential"
    alpha: float = 0.0
    beta: float = 0.5
    order: int = 2

    def __post_init__(self):
        if self.kind not in ("exponential", "algebraic"):
            raise DomainError(f"weight kind must be 'exponential' or 'algebraic' (got {self.kind!r})")
        if not self.beta > 0.0:
            raise DomainError(f"weight beta must be positive (got {self.beta})")
        if self.order not in (0, 1, 2, 3, 4):
            raise DomainError(f"Sobolev order must be between 0 and 4 (got {self.order})")

    def with_order(self, order: int) -> "WeightSpec":
        return WeightSpec(self.kind, self.alpha, self.beta, order)

    def log_weight(self, x: np.ndarray) -> np.ndarray:
        if self.kind == "exponential":
            return self.beta * x
        return self.alpha * np.log1p(self.beta * x)

    def weight(self, x: np.ndarray) -> np.ndarray:
        return np.exp(self.log_weight(x))


def _derivatives(f: np.ndarray, dx: float, order: int) -> list[np.ndarray]:
    out = [f]
    for _ in range(order):
        out.append(np.gradient(out[-1], dx, edge_order=2))
    return out


def weighted_integral(density: np.ndarray, spec: WeightSpec, grid: Grid) -> float:
    """Trapezoid rule for the integral of W * density with density >= 0.

    The weight is applied in log form and contributions below 1e-300 are
    dropped, so e^{beta x} never overflows against an underflowing density.
    """
    density = np.asarray(density, dtype=float)
    out = np.zeros_like(density)
    pos = density > 0.0
    logs = spec.log_weight(grid.x[pos]) + np.log(density[pos])
    keep = logs > math.log(1e-300)
    vals = np.zeros(np.count_nonzero(pos))
    vals[keep] = np.exp(logs[keep])
    out[pos] = vals
    return float(np.trapezoid(out, dx=grid.dx))


def weighted_norm(fields, spec: WeightSpec, grid: Grid) -> float:
    """(integral W sum_{j <= order} (d^j f)^2 dx)^(1/2), summed over one or several fields."""
    arrays = [np.asarray(fields, dtype=float)] if np.ndim(fields) == 1 else [np.asarray(f, dtype=float) for f in fields]
    density = np.zeros(grid.N)
    for f in arrays:
        if f.shape != (grid.N,):
            raise GridMismatch(f"field has shape {f.shape}, grid has {grid.N} nodes")
        for d in _derivatives(f, grid.dx, spec.order):
            density += d * d
    return math.sqrt(weighted_integral(density, spec, grid))


@dataclass(frozen=True, eq=False)
class PerturbationFields:
    grid: Grid
    phi_p: np.ndarray
    psi: np.ndarray
    zeta: np.ndarray
    sigma: np.ndarray
    sigma_x0: float
    n_tilde: np.ndarray
    r0: float = 0.0


def _profile_on(grid: Grid, profile: StationaryProfile):
    pg = profile.grid
    if grid.N == pg.N and math.isclose(grid.L, pg.L, rel_tol=1e-14):
        return profile.v, profile.u, profile.T, profile.phi, profile.n
    if grid.L > pg.L * (1.0 + 1e-14):
        raise GridMismatch(f"state grid extends to {grid.L}, profile only to {pg.L}")
    n, u, T, phi, _ = sample_profile(profile, np.minimum(grid.x, pg.L))
    return np.log(n), u, T, phi, n


def perturbation(state, pot, profile: StationaryProfile, r0: float = 0.0) -> PerturbationFields:
    """(v - v~, u - u~, T - T~, phi - phi~) on the state grid."""
    v_t, u_t, T_t, phi_t, n_t = _profile_on(state.grid, profile)
    if np.shape(pot.phi) != (state.grid.N,):
        raise GridMismatch("potential and fluid state live on different grids")
    return PerturbationFields(
        grid=state.grid,
        phi_p=state.v - v_t,
        psi=state.u - u_t,
        zeta=state.T - T_t,
        sigma=pot.phi - phi_t,
        sigma_x0=float(pot.E0 - profile.phi_x[0]),
        n_tilde=n_t,
        r0=r0,
    )


def energy_density(pert: PerturbationFields, T: np.ndarray, params) -> np.ndarray:
    p = params
    n = pert.n_tilde
    return (0.5 * n * p.R * T * pert.phi_p**2 + 0.5 * n * p.m * pert.psi**2
            + n * p.R / (2.0 * (p.gamma - 1.0) * T) * pert.zeta**2)


def energy0(state, profile: StationaryProfile, pert: PerturbationFields, spec: WeightSpec) -> float:
    """Weighted integral of the quadratic energy density of (phi, psi, zeta)."""
    if np.any(state.T <= 0.0):
        raise DomainError("energy density needs a positive temperature")
    return weighted_integral(energy_density(pert, state.T, profile.params), spec, state.grid)


@dataclass(frozen=True)
class DiagnosticRecord:
    t: float
    norms: dict
    sigma0: float
    sigmax0: float
    E0_boundary: float
    energy0: float
    sup_N: float = 0.0

    def row(self) -> dict:
        return {
            "t": self.t,
            "E_weighted": self.energy0,
            "norm_phi_psi_zeta_h2": self.norms["h2"],
            "norm_sigma": self.norms["sigma"],
            "sigma0": self.sigma0,
            "sigmax0": self.sigmax0,
            "E0_boundary": self.E0_boundary,
        }

    def value(self, key: str) -> float:
        row = self.row()
        if key in row:
            return float(row[key])
        if key in self.norms:
            return float(self.norms[key])
        raise KeyError(key)


class RunningSupremum:
    """sup over emitted records of ||(phi, psi, zeta)||_{alpha,beta,2} + |sigma_x(t, 0)|."""

    def __init__(self):
        self.value = 0.0

    def update(self, h2_norm: float, sigma_x0: float) -> float:
        self.value = max(self.value, h2_norm + abs(sigma_x0))
        return self.value


def sup_diagnostic(pert: PerturbationFields, spec: WeightSpec, running: RunningSupremum | None = None) -> float:
    """Fold one snapshot into the running supremum and return the new value."""
    running = RunningSupremum() if running is None else running
    h2 = weighted_norm((pert.phi_p, pert.psi, pert.zeta), spec.with_order(2), pert.grid)
    return running.update(h2, pert.sigma_x0)


def sup_from_series(records: Sequence[DiagnosticRecord]) -> float:
    return max((r.norms["h2"] + abs(r.sigmax0) for r in records), default=0.0)


def make_record(t: float, state, pot, profile: StationaryProfile, spec: WeightSpec,
                running: RunningSupremum | None = None, r0: float = 0.0) -> DiagnosticRecord:
    pert = perturbation(state, pot, profile, r0)
    trio = (pert.phi_p, pert.psi, pert.zeta)
    norms = {
        "h0": weighted_norm(trio, spec.with_order(0), state.grid),
        "h1": weighted_norm(trio, spec.with_order(1), state.grid),
        "h2": weighted_norm(trio, spec.with_order(2), state.grid),
        "sigma": weighted_norm(pert.sigma, spec.with_order(2), state.grid),
    }
    sup = running.update(norms["h2"], pert.sigma_x0) if running is not None else norms["h2"] + abs(pert.sigma_x0)
    return DiagnosticRecord(
        t=float(t), norms=norms, sigma0=float(pert.sigma[0]), sigmax0=pert.sigma_x0,
        E0_boundary=float(pot.E0), energy0=energy0(state, profile, pert, spec), sup_N=sup)


# --- serialisation ------------------------------------------------------------

def records_csv(records: Sequence[DiagnosticRecord], error: str | None = None) -> str:
    buf = io.StringIO()
    buf.write(",".join(RECORD_COLUMNS) + "\n")
    for rec in records:
        row = rec.row()
        buf.write(",".join(format_float(float(row[c])) for c in RECORD_COLUMNS) + "\n")
    if error is not None:
        buf.write("# error: " + " ".join(error.split()) + "\n")
    return buf.getvalue()


def records_jsonl(records: Sequence[DiagnosticRecord], error: str | None = None) -> str:
    lines = [json.dumps({c: float(rec.row()[c]) for c in RECORD_COLUMNS}) for rec in records]
    if error is not None:
        lines.append(json.dumps({"error": error}))
    return "".join(line + "\n" for line in lines)


def read_records_csv(path) -> list[dict]:
    rows = []
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        for line in fh:
            if line.startswith("#") or not line.strip():
                continue
            rows.append(dict(zip(header, map(float, line.strip().split(",")))))
    return rows


# --- decay fits ---------------------------------------------------------------

@dataclass(frozen=True)
class DecayFit:
    model: str
    exponent: float
    r_squared: float
    window: tuple[float, float]
    n_points: int
    intercept: float = 0.0
    key: str = "E_weighted"
    beta: float | None = None

    def as_dict(self) -> dict:
        return {
            "status": "ok", "model": self.model, "key": self.key, "exponent": self.exponent,
            "r_squared": self.r_squared, "window": list(self.window), "n_points": self.n_points,
            "intercept": self.intercept, "beta": self.beta,
        }


def default_window(t_end: float) -> tuple[float, float]:
    return (max(1.0, 0.1 * t_end), t_end)


def fit_decay(series: Sequence[DiagnosticRecord], model: str = "exponential",
              window: tuple[float, float] | None = None, key: str = "E_weighted",
              beta: float | None = None, min_points: int = 20) -> DecayFit:
    """Least-squares fit of log E against t (exponential) or log(1 + beta t) (algebraic)."""
    if model not in ("exponential", "algebraic"):
        raise DomainError(f"decay model must be 'exponential' or 'algebraic' (got {model!r})")
    if model == "algebraic" and not (beta and beta > 0.0):
        raise DomainError("algebraic decay fits need beta > 0")
    if not series:
        raise DegenerateFit("empty diagnostic series")
    if window is None:
        window = default_window(series[-1].t)
    t = np.array([r.t for r in series])
    vals = np.array([r.value(key) for r in series])
    if t[0] == 0.0 and vals[0] <= FIT_FLOOR:
        # anything measured later is discretisation drift, not a decaying perturbation
        raise DegenerateFit(f"{key} is zero at t = 0: there is no perturbation to decay")
    sel = (t >= window[0] - 1e-12) & (t <= window[1] + 1e-12)
    t, vals = t[sel], vals[sel]
    if t.size < min_points:
        raise DegenerateFit(f"only {t.size} records in window {window}, need {min_points}")
    if np.count_nonzero(vals < FIT_FLOOR) * 2 > vals.size or np.any(vals <= 0.0):
        raise DegenerateFit(f"{key} sits at the numerical floor (< {FIT_FLOOR:g}) across the window")
    abscissa = t if model == "exponential" else np.log1p(beta * t)
    y = np.log(vals)
    slope, intercept = np.polyfit(abscissa, y, 1)
    pred = intercept + slope * abscissa
    ss_res = float(np.sum((y - pred) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0.0 else 1.0
    return DecayFit(model, float(slope), r2, (float(window[0]), float(window[1])), int(t.size),
                    float(intercept), key, beta)
