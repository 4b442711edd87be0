"""Monotone sheath profiles and their spatial-decay checks.

The stationary problem reduces to the first-order law
phi_x = -sign(phi_b) sqrt(2 V(phi)).  We integrate it in the log-density
variable v = log n, where both phi = f(e^v) and V are explicit, so no root
finding or quadrature is needed inside the ODE right-hand side.
"""
from __future__ import annotations

import enum
import io
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, interpolate

from . import model
from .errors import BranchEscape, DomainError, InsufficientWindow, NegativeV, NonExistence
from .model import PhysicalParams, Regime, RegimeTag

ODE_RTOL = 1e-12
#: round-off window in which a negative V is clamped to zero
V_CLAMP = 1e-14
#: below this |phi| the degenerate profile follows the algebraic envelope
DEGENERATE_SWITCH = 1e-6
PROFILE_COLUMNS = ("x", "n", "u", "T", "phi", "phi_x")


@dataclass(frozen=True)
class Grid:
    L: float
    N: int

    def __post_init__(self):
        if not (self.L > 0.0 and math.isfinite(self.L)):
            raise DomainError(f"grid length must be positive (got {self.L})")
        if int(self.N) != self.N or self.N < 16:
            raise DomainError(f"grid needs an integer N >= 16 nodes (got {self.N})")
        object.__setattr__(self, "N", int(self.N))

    @property
    def dx(self) -> float:
        return self.L / (self.N - 1)

    @property
    def x(self) -> np.ndarray:
        return np.arange(self.N) * self.dx


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class StationaryProfile:
    grid: Grid
    n: np.ndarray
    u: np.ndarray
    T: np.ndarray
    phi: np.ndarray
    phi_x: np.ndarray
    regime: Regime
    params: PhysicalParams
    #: log density kept at full relative precision (log(n) loses it near n = 1)
    log_n: np.ndarray | None = None

    def __post_init__(self):
        if self.log_n is None:
            object.__setattr__(self, "log_n", np.log(self.n))
        for name in ("n", "u", "T", "phi", "phi_x", "log_n"):
            arr = _frozen(getattr(self, name))
            if arr.shape != (self.grid.N,):
                raise DomainError(f"profile field {name} has shape {arr.shape}, expected ({self.grid.N},)")
            object.__setattr__(self, name, arr)

    @property
    def v(self) -> np.ndarray:
        return self.log_n

    @property
    def phi_b(self) -> float:
        return self.regime.phi_b


class Existence(str, enum.Enum):
    EXISTS = "Exists"
    NO_SOLUTION = "NoSolution"
    TRIVIAL_ONLY = "TrivialOnly"


@dataclass(frozen=True)
class ExistenceVerdict:
    status: Existence
    reasons: tuple[str, ...]
    regime: Regime
    f_c_inf: float
    V_phi_b: float | None

    @property
    def exists(self) -> bool:
        return self.status is Existence.EXISTS

    def as_dict(self) -> dict:
        return {
            "status": self.status.value,
            "reasons": list(self.reasons),
            "regime": self.regime.tag.value,
            "mach_margin": self.regime.mach_margin,
            "phi_b": self.regime.phi_b,
            "c_inf": self.regime.c_inf,
            "f_c_inf": self.f_c_inf,
            "V_phi_b": self.V_phi_b,
        }


def existence_check(params: PhysicalParams) -> ExistenceVerdict:
    """Decide which branch of the existence theory applies to ``params``."""
    regime = model.classify(params)
    pb = regime.phi_b
    f_c = model.branch_floor(params)
    if abs(pb) <= 1e-15:
        return ExistenceVerdict(Existence.TRIVIAL_ONLY,
                                ("phi_b = 0: the constant state (1, u_inf, T_inf, 0) is the unique solution",),
                                regime, f_c, 0.0)
    if regime.tag is RegimeTag.FORBIDDEN_WINDOW:
        return ExistenceVerdict(
            Existence.NO_SOLUTION,
            (f"gamma R T_inf/m < u_inf^2 < (gamma R T_inf + 1)/m and phi_b = {pb:.6g} != 0: "
             "the stationary problem does not admit any C^1 solution",),
            regime, f_c, None)
    reasons = []
    if pb < f_c:
        reasons.append(f"phi_b = {pb:.6g} < f(c_inf) = {f_c:.6g} violates phi_b >= f(c_inf)")
        return ExistenceVerdict(Existence.NO_SOLUTION, tuple(reasons), regime, f_c, None)
    V_b = float(model.sagdeev_V(pb, params))
    if V_b < 0.0:
        reasons.append(f"V(phi_b) = {V_b:.6g} < 0 violates V(phi_b) >= 0")
        return ExistenceVerdict(Existence.NO_SOLUTION, tuple(reasons), regime, f_c, V_b)
    reasons.append(f"V(phi_b) = {V_b:.6g} >= 0 and phi_b = {pb:.6g} >= f(c_inf) = {f_c:.6g}")
    return ExistenceVerdict(Existence.EXISTS, tuple(reasons), regime, f_c, V_b)


def degenerate_gamma(params: PhysicalParams) -> float:
    """The constant Gamma = sqrt(((gamma^2 + gamma) R T_inf + 2) / 12)."""
    p = params
    return math.sqrt(((p.gamma**2 + p.gamma) * p.R * p.T_inf + 2.0) / 12.0)


def default_length(params: PhysicalParams) -> float:
    """Truncation length for the half line, chosen from the predicted tail."""
    regime = model.classify(params)
    pb = regime.phi_b
    if regime.tag is RegimeTag.DEGENERATE and pb > 0.0:
        Gam = degenerate_gamma(params)
        return float(min(max((1e3 - pb**-0.5) / Gam, 10.0), 1e4))
    V2 = model.sagdeev_second_derivative(params)
    if V2 > 0.0:
        return 30.0 / math.sqrt(V2)
    return 40.0


def default_grid(params: PhysicalParams, N: int = 4096) -> Grid:
    return Grid(default_length(params), N)


def _constant_profile(params, grid, regime) -> StationaryProfile:
    N = grid.N
    return StationaryProfile(grid, np.ones(N), np.full(N, params.u_inf), np.full(N, params.T_inf),
                             np.zeros(N), np.zeros(N), regime, params)


def _log_density_of_phi(phi, params: PhysicalParams):
    """Vectorised Newton solve of f(e^v) = phi for small |phi| near v = 0."""
    phi = np.asarray(phi, dtype=float)
    v = phi / model.bernoulli_f_prime(1.0, params)
    for _ in range(50):
        step = (model._f_of_log(v, params) - phi) / model._df_dlog(v, params)
        v = v - step
        if np.all(np.abs(step) <= 1e-16 * np.maximum(np.abs(v), 1e-300)):
            break
    return v


def solve_sheath(params: PhysicalParams, grid: Grid | None = None) -> StationaryProfile:
    """Monotone sheath on ``grid`` (default: :func:`default_grid`)."""
    verdict = existence_check(params)
    regime = verdict.regime
    if grid is None:
        grid = default_grid(params)
    if verdict.status is Existence.TRIVIAL_ONLY:
        return _constant_profile(params, grid, regime)
    if verdict.status is Existence.NO_SOLUTION:
        raise NonExistence("; ".join(verdict.reasons), verdict)

    pb = regime.phi_b
    sign = 1.0 if pb > 0.0 else -1.0
    v_b = math.log(model.bernoulli_inverse(pb, params))
    v_lo, v_hi = sorted((v_b, 0.0))
    decreasing = model.branch_is_decreasing(params)
    x = grid.x

    def field_of(v):
        _, V = model.sagdeev_from_log_density(v, params)
        if V < -V_CLAMP:
            raise NegativeV(f"V = {V:.3e} < 0 at v = {v:.6g}: the orbit cannot reach phi = 0")
        return -sign * math.sqrt(2.0 * max(V, 0.0))

    def rhs(_, y):
        v = y[0]
        if not (v_lo - 1e-12 <= v <= v_hi + 1e-12):
            raise BranchEscape(f"log density {v:.6g} left [{v_lo:.6g}, {v_hi:.6g}]")
        slope = model._df_dlog(v, params)
        if (slope >= 0.0) == decreasing:
            raise BranchEscape(f"orbit crossed the fold of the Bernoulli function at v = {v:.6g}")
        return [field_of(v) / slope]

    events = None
    degenerate = regime.tag is RegimeTag.DEGENERATE
    if degenerate:
        def reach_envelope(_, y):
            return abs(float(model._f_of_log(y[0], params))) - DEGENERATE_SWITCH
        reach_envelope.terminal = True
        reach_envelope.direction = -1
        events = [reach_envelope]

    sol = integrate.solve_ivp(rhs, (0.0, grid.L), [v_b], method="DOP853", t_eval=x,
                              rtol=ODE_RTOL, atol=1e-20, events=events)
    if sol.status == -1:
        raise BranchEscape(f"sheath integration failed: {sol.message}")
    v = np.empty(grid.N)
    k = sol.y.shape[1]
    v[:k] = sol.y[0]
    phi = np.asarray(model._f_of_log(v, params))
    _, V = model.sagdeev_from_log_density(v[:k], params)
    phi_x = np.empty(grid.N)
    phi_x[:k] = -sign * np.sqrt(2.0 * np.clip(V, 0.0, None))

    if k < grid.N:
        # algebraic continuation phi = G^-2 from the switch point
        x_s = float(sol.t_events[0][0])
        phi_s = float(model._f_of_log(sol.y_events[0][0][0], params))
        Gam = degenerate_gamma(params)
        G = phi_s**-0.5 + Gam * (x[k:] - x_s)
        phi[k:] = G**-2
        phi_x[k:] = -2.0 * Gam * G**-3
        v[k:] = _log_density_of_phi(phi[k:], params)

    n = np.exp(v)
    return StationaryProfile(
        grid=grid, n=n, u=params.u_inf / n, T=params.T_inf * np.exp((params.gamma - 1.0) * v),
        phi=phi, phi_x=phi_x, regime=regime, params=params, log_n=v)


def stationary_residuals(profile: StationaryProfile) -> dict[str, float]:
    """Max-norm residuals of the four stationary equations on interior nodes."""
    p = profile.params
    h = profile.grid.dx
    n, u, T, phi = profile.n, profile.u, profile.T, profile.phi

    def d1(a):
        return (a[2:] - a[:-2]) / (2.0 * h)

    c = slice(1, -1)
    phi_xx = (phi[2:] - 2.0 * phi[1:-1] + phi[:-2]) / h**2
    mass = d1(n * u)
    momentum = p.m * n[c] * u[c] * d1(u) + p.R * d1(T * n) - n[c] * d1(phi)
    energy = u[c] * d1(T) + (p.gamma - 1.0) * T[c] * d1(u)
    poisson = phi_xx - n[c] + np.exp(-phi[c])
    return {name: float(np.max(np.abs(r))) for name, r in
            (("mass", mass), ("momentum", momentum), ("energy", energy), ("poisson", poisson))}


def invariant_defects(profile: StationaryProfile) -> dict[str, float]:
    """Max violations of the algebraic invariants every sheath profile satisfies."""
    p = profile.params
    _, V = model.sagdeev_from_log_density(profile.v, p)
    return {
        "mass_flux": float(np.max(np.abs(profile.n * profile.u - p.u_inf))),
        "entropy": float(np.max(np.abs(profile.T * profile.n ** (1.0 - p.gamma) - p.T_inf))),
        "bernoulli": float(np.max(np.abs(profile.phi - model._f_of_log(profile.v, p)))),
        "field": float(np.max(np.abs(profile.phi_x**2 - 2.0 * V))),
        "boundary_flux": float(abs(profile.n[0] * profile.u[0] + p.u_e * math.exp(-profile.phi[0]))),
    }


# --- spatial decay ----------------------------------------------------------

def sagdeev_curvature_fd(params: PhysicalParams) -> float:
    """V''(0) from a Richardson-extrapolated central difference of the quadrature V."""
    floor = model.branch_floor(params)
    h = min(4e-3, 0.25 * abs(floor)) if floor < 0 else 4e-3

    def second(step):
        return (model.sagdeev_V(step, params) + model.sagdeev_V(-step, params)) / step**2

    return float((4.0 * second(h / 2) - second(h)) / 3.0)


@dataclass(frozen=True)
class NondegenerateDecay:
    rate: float
    predicted: float
    relative_deviation: float
    window: tuple[float, float]
    n_points: int
    envelope_C: tuple[float, float]
    envelope_ok: bool

    def as_dict(self) -> dict:
        return {
            "rate": self.rate, "predicted_rate": self.predicted,
            "relative_deviation": self.relative_deviation, "window": list(self.window),
            "n_points": self.n_points, "envelope_C": list(self.envelope_C),
            "envelope_ok": self.envelope_ok,
        }


def verify_decay_nondegenerate(profile: StationaryProfile, C: float = 10.0) -> NondegenerateDecay:
    """Fit |phi| ~ e^{-c x} and compare c with sqrt(V''(0))."""
    pb = profile.phi_b
    absphi = np.abs(profile.phi)
    mask = (absphi > 1e-8) & (absphi < abs(pb) / 10.0)
    if np.count_nonzero(mask) < 20:
        raise InsufficientWindow(f"only {np.count_nonzero(mask)} nodes with 1e-8 < |phi| < |phi_b|/10")
    x = profile.grid.x
    xs = x[mask]
    slope, _ = np.polyfit(xs, np.log(absphi[mask]), 1)
    rate = -float(slope)
    predicted = math.sqrt(sagdeev_curvature_fd(profile.params))

    dn = profile.n - 1.0
    envelope = abs(pb) * np.exp(-rate * xs)
    C0 = float(np.max(np.abs(dn[mask]) / envelope))
    C1 = float(np.max(np.abs(np.gradient(dn, profile.grid.dx, edge_order=2)[mask]) / envelope))
    return NondegenerateDecay(rate, predicted, abs(rate - predicted) / predicted,
                              (float(xs[0]), float(xs[-1])), int(xs.size), (C0, C1),
                              max(C0, C1) <= C)


def _centered_derivatives(a: np.ndarray, h: float) -> list[np.ndarray]:
    """a, a_x, a_xx, a_xxx on nodes 2..N-3 by second-order central stencils."""
    c = slice(2, -2)
    d1 = (a[3:-1] - a[1:-3]) / (2.0 * h)
    d2 = (a[3:-1] - 2.0 * a[2:-2] + a[1:-3]) / h**2
    d3 = (a[4:] - 2.0 * a[3:-1] + 2.0 * a[1:-3] - a[:-4]) / (2.0 * h**3)
    return [a[c], d1, d2, d3]


def degenerate_constants(params: PhysicalParams) -> np.ndarray:
    p = params
    k = (p.gamma**2 + p.gamma) * p.R * p.T_inf + 2.0
    Gam = degenerate_gamma(p)
    return np.array([1.0, -2.0 * Gam, k / 2.0, -2.0 * Gam * k])


@dataclass(frozen=True, eq=False)
class DegenerateEnvelope:
    Gamma: float
    c: np.ndarray
    G: np.ndarray
    sup_defects: np.ndarray
    defects: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "Gamma": self.Gamma,
            "c": self.c.tolist(),
            "sup_defects": self.sup_defects.tolist(),
            "defects_by_U": {k: v.tolist() for k, v in self.defects.items()},
        }


def verify_decay_degenerate(profile: StationaryProfile, phi_b: float | None = None) -> DegenerateEnvelope:
    """sup_x |d^i U/dx^i G^{i+2} + c_i| for i = 0..3 and each U of the algebraic envelope.

    Only U = -phi and U = log n are expected to be O(phi_b); the other three
    entries are reported for inspection.
    """
    p = profile.params
    pb = profile.phi_b if phi_b is None else phi_b
    Gam = degenerate_gamma(p)
    c = degenerate_constants(p)
    x = profile.grid.x
    G = Gam * x + pb**-0.5
    Gi = G[2:-2]
    candidates = {
        "-phi": -profile.phi,
        "n-1": np.expm1(profile.v),
        "log n": profile.v,
        "u/u_inf-1": np.expm1(-profile.v),
        "(T/T_inf-1)/gamma": np.expm1((p.gamma - 1.0) * profile.v) / p.gamma,
    }
    defects = {}
    for name, U in candidates.items():
        derivs = _centered_derivatives(U, profile.grid.dx)
        defects[name] = np.array([np.max(np.abs(derivs[i] * Gi ** (i + 2) + c[i])) for i in range(4)])
    return DegenerateEnvelope(Gam, c, G, defects["-phi"], defects)


# --- sampling and export ----------------------------------------------------

def sample_profile(profile: StationaryProfile, x):
    """Cubic-spline values (n, u, T, phi, phi_x) at ``x``; exact at grid nodes."""
    xq = np.asarray(x, dtype=float)
    if np.any(xq < 0.0) or np.any(xq > profile.grid.L):
        raise DomainError(f"sample point outside [0, {profile.grid.L}]")
    nodes = profile.grid.x
    out = []
    for arr in (profile.n, profile.u, profile.T, profile.phi, profile.phi_x):
        val = interpolate.CubicSpline(nodes, arr)(xq)
        # spline coefficients are exact at knots up to round-off; snap to stored values
        idx = np.rint(xq / profile.grid.dx).astype(int)
        on_node = np.isclose(idx * profile.grid.dx, xq, rtol=0.0, atol=1e-12 * profile.grid.L)
        val = np.where(on_node, arr[np.clip(idx, 0, profile.grid.N - 1)], val)
        out.append(float(val) if np.ndim(val) == 0 else val)
    return tuple(out)


def format_float(value: float) -> str:
    return f"{value:.17g}"


def profile_csv(profile: StationaryProfile) -> str:
    buf = io.StringIO()
    buf.write(",".join(PROFILE_COLUMNS) + "\n")
    cols = (profile.grid.x, profile.n, profile.u, profile.T, profile.phi, profile.phi_x)
    for row in zip(*cols):
        buf.write(",".join(format_float(float(v)) for v in row) + "\n")
    return buf.getvalue()


def write_profile_csv(profile: StationaryProfile, path) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(profile_csv(profile))


def read_profile_csv(path) -> dict[str, np.ndarray]:
    data = np.genfromtxt(path, delimiter=",", names=True)
    return {name: np.asarray(data[name]) for name in PROFILE_COLUMNS}
