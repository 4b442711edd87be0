"""Physical constants, Bohm-regime classification and the Bernoulli/Sagdeev functions.

The far-field density is normalised to one and is never stored.  All
functions are pure and accept either scalars or numpy arrays where noted.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace

import numpy as np
from scipy import integrate, optimize

from .errors import BranchError, DomainError

#: relative tolerance for detecting the Bohm equality u_inf**2 == (gamma R T_inf + 1)/m
DEGENERACY_RTOL = 1e-12
#: lower end of the bracket used when inverting the decreasing Bernoulli branch
N_MIN = 1e-6
#: bracket for the lambda0 bisection
LAMBDA0_BRACKET = (4.0 + 1e-9, 5.5694)


@dataclass(frozen=True)
class PhysicalParams:
    """Constants of one problem instance.

    ``q0`` is the initial boundary field phi_x(0, 0); ``None`` means "take it
    from the sheath plus the perturbation's ``q0_offset``".
    """

    m: float = 1.0
    gamma: float = 2.0
    R: float = 1.0
    T_inf: float = 1.0
    u_inf: float = -2.0
    u_e: float = 2.0
    q0: float | None = None

    def __post_init__(self):
        for name in ("m", "gamma", "R", "T_inf", "u_inf", "u_e"):
            if not math.isfinite(getattr(self, name)):
                raise DomainError(f"{name} must be finite (got {getattr(self, name)})")
        checks = [
            (self.gamma > 1.0, f"gamma must satisfy gamma > 1 (got {self.gamma})"),
            (self.m > 0.0, f"m must be positive (got {self.m})"),
            (self.R > 0.0, f"R must be positive (got {self.R})"),
            (self.T_inf > 0.0, f"T_inf must be positive (got {self.T_inf})"),
            (self.u_inf < 0.0, f"u_inf must be negative, ions flow toward the wall (got {self.u_inf})"),
            (self.u_e > 0.0, f"u_e must be positive (got {self.u_e})"),
        ]
        for ok, message in checks:
            if not ok:
                raise DomainError(message)
        if self.q0 is not None and not math.isfinite(self.q0):
            raise DomainError(f"q0 must be finite (got {self.q0})")

    @property
    def sound_speed_sq(self) -> float:
        """gamma R T_inf / m, the squared adiabatic ion sound speed."""
        return self.gamma * self.R * self.T_inf / self.m

    @property
    def bohm_speed_sq(self) -> float:
        """(gamma R T_inf + 1) / m, the squared Bohm speed."""
        return (self.gamma * self.R * self.T_inf + 1.0) / self.m

    def with_phi_b(self, phi_b: float) -> "PhysicalParams":
        """Copy with u_e chosen so that ln(u_e/|u_inf|) equals ``phi_b``."""
        return replace(self, u_e=abs(self.u_inf) * math.exp(phi_b))


def degenerate_u_inf(m: float, gamma: float, R: float, T_inf: float) -> float:
    """Far-field velocity satisfying the Bohm criterion with equality."""
    return -math.sqrt((gamma * R * T_inf + 1.0) / m)


class RegimeTag(str, enum.Enum):
    SUBSONIC = "Subsonic"
    FORBIDDEN_WINDOW = "ForbiddenWindow"
    NONDEGENERATE = "Nondegenerate"
    DEGENERATE = "Degenerate"


@dataclass(frozen=True)
class Regime:
    tag: RegimeTag
    mach_margin: float
    phi_b: float
    c_inf: float

    @property
    def bohm(self) -> bool:
        return self.tag in (RegimeTag.NONDEGENERATE, RegimeTag.DEGENERATE)


def phi_b(params: PhysicalParams) -> float:
    """Boundary potential ln(u_e / |u_inf|) forced by the zero-net-flux condition."""
    return math.log(params.u_e / abs(params.u_inf))


def critical_density(params: PhysicalParams) -> float:
    """The unique critical point c_inf of the Bernoulli function."""
    p = params
    return (p.m * p.u_inf**2 / (p.gamma * p.R * p.T_inf)) ** (1.0 / (p.gamma + 1.0))


def classify(params: PhysicalParams) -> Regime:
    p = params
    u2 = p.u_inf**2
    bohm = p.bohm_speed_sq
    margin = u2 - bohm
    if abs(margin) <= DEGENERACY_RTOL * bohm:
        tag = RegimeTag.DEGENERATE
    elif margin > 0.0:
        tag = RegimeTag.NONDEGENERATE
    elif u2 > p.sound_speed_sq:
        tag = RegimeTag.FORBIDDEN_WINDOW
    else:
        tag = RegimeTag.SUBSONIC
    return Regime(tag=tag, mach_margin=margin, phi_b=phi_b(p), c_inf=critical_density(p))


def characteristics(u, T, params: PhysicalParams):
    """Characteristic speeds (lambda1, lambda2, lambda3) of the fluid system.

    Uses the closed form ((m+1)u -+ sqrt((m-1)^2 u^2 + 4 gamma R T)) / 2.
    """
    u = np.asarray(u, dtype=float)
    T = np.asarray(T, dtype=float)
    if np.any(T <= 0.0):
        raise DomainError("temperature must be positive to evaluate characteristics")
    p = params
    root = np.sqrt((p.m - 1.0) ** 2 * u**2 + 4.0 * p.gamma * p.R * T)
    lam1 = 0.5 * ((p.m + 1.0) * u - root)
    lam3 = 0.5 * ((p.m + 1.0) * u + root)
    if lam1.ndim == 0:
        return float(lam1), float(u), float(lam3)
    return lam1, u.copy(), lam3


def wave_speeds(u, T, params: PhysicalParams):
    """Propagation speeds u - c, u, u + c with c = sqrt(gamma R T / m).

    These are the eigenvalues of the mass-scaled system actually integrated
    in time.  They coincide with :func:`characteristics` when m = 1 and share
    its signs for every m.
    """
    u = np.asarray(u, dtype=float)
    T = np.asarray(T, dtype=float)
    if np.any(T <= 0.0):
        raise DomainError("temperature must be positive to evaluate wave speeds")
    c = np.sqrt(params.gamma * params.R * T / params.m)
    return u - c, u, u + c


# --- Bernoulli function -----------------------------------------------------

def _f_of_log(v, params: PhysicalParams):
    # f written in v = log n with expm1 so that f is accurate near n = 1
    p = params
    a = p.gamma * p.R * p.T_inf / (p.gamma - 1.0)
    b = 0.5 * p.m * p.u_inf**2
    return a * np.expm1((p.gamma - 1.0) * v) + b * np.expm1(-2.0 * v)


def _df_dlog(v, params: PhysicalParams):
    """d f / d(log n) = n f'(n)."""
    p = params
    return p.gamma * p.R * p.T_inf * np.exp((p.gamma - 1.0) * v) - p.m * p.u_inf**2 * np.exp(-2.0 * v)


def bernoulli_f(n, params: PhysicalParams):
    n_arr = np.asarray(n, dtype=float)
    if np.any(n_arr <= 0.0):
        raise DomainError("Bernoulli function needs a positive density")
    out = _f_of_log(np.log(n_arr), params)
    return float(out) if out.ndim == 0 else out


def bernoulli_f_prime(n, params: PhysicalParams):
    """f'(n) = (-m u_inf^2 + gamma R T_inf n^(gamma+1)) / n^3."""
    p = params
    n = np.asarray(n, dtype=float)
    if np.any(n <= 0.0):
        raise DomainError("Bernoulli function needs a positive density")
    out = (-p.m * p.u_inf**2 + p.gamma * p.R * p.T_inf * n ** (p.gamma + 1.0)) / n**3
    return float(out) if out.ndim == 0 else out


def branch_is_decreasing(params: PhysicalParams) -> bool:
    """True when the branch through n = 1 is (0, c_inf] (f decreasing there)."""
    return critical_density(params) >= 1.0


def branch_floor(params: PhysicalParams) -> float:
    """f(c_inf): the smallest potential reachable on the admissible branch."""
    return bernoulli_f(critical_density(params), params)


def _inverse_scalar(phi: float, params: PhysicalParams) -> float:
    c = critical_density(params)
    f_c = bernoulli_f(c, params)
    if phi < f_c:
        raise BranchError(f"phi = {phi!r} lies below the branch endpoint f(c_inf) = {f_c!r}")
    if phi == f_c:
        return c
    if phi == 0.0:
        return 1.0

    def g(n):
        return bernoulli_f(n, params) - phi

    if branch_is_decreasing(params):
        lo, hi = N_MIN, c
        if g(lo) < 0.0:
            raise BranchError(f"phi = {phi!r} exceeds f(n_min) on the decreasing branch")
    else:
        lo, hi = c, max(2.0, 2.0 * c)
        while g(hi) < 0.0:
            hi *= 2.0
            if hi > 1e12:
                raise BranchError(f"phi = {phi!r} is out of reach on the increasing branch")
    # Brent's method keeps the bracket and takes secant/inverse-quadratic steps
    n = optimize.brentq(g, lo, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=400)
    # Newton polish with the closed-form derivative; the fold is excluded by phi > f(c)
    for _ in range(3):
        d = bernoulli_f_prime(n, params)
        if d == 0.0:
            break
        step = g(n) / d
        trial = n - step
        if not (min(lo, hi) <= trial <= max(lo, hi)):
            break
        n = trial
        if abs(step) <= 1e-16 * n:
            break
    return n


def bernoulli_inverse(phi, params: PhysicalParams):
    """Density on the branch of f through n = 1 with f(n) = phi."""
    phi_arr = np.asarray(phi, dtype=float)
    if phi_arr.ndim == 0:
        return _inverse_scalar(float(phi_arr), params)
    return np.array([_inverse_scalar(float(x), params) for x in phi_arr.ravel()]).reshape(phi_arr.shape)


# --- Sagdeev potential ------------------------------------------------------

def _sagdeev_integrand(eta: float, params: PhysicalParams) -> float:
    return _inverse_scalar(eta, params) - math.exp(-eta)


def sagdeev_V(phi, params: PhysicalParams, epsabs: float = 1e-13):
    """V(phi) = integral_0^phi [f^{-1}(eta) - e^{-eta}] d eta by adaptive quadrature."""
    phi_arr = np.asarray(phi, dtype=float)
    floor = branch_floor(params)

    def one(x):
        if x == 0.0:
            return 0.0
        if x < floor:
            raise BranchError(f"phi = {x!r} lies below the branch endpoint f(c_inf) = {floor!r}")
        val, _ = integrate.quad(_sagdeev_integrand, 0.0, x, args=(params,),
                                epsabs=epsabs, epsrel=1e-13, limit=200)
        return val

    if phi_arr.ndim == 0:
        return one(float(phi_arr))
    return np.array([one(float(x)) for x in phi_arr.ravel()]).reshape(phi_arr.shape)


#: below this |log n| the Sagdeev potential is summed from its Taylor series
SERIES_SWITCH = 1e-3
SERIES_ORDER = 14


def _exp_series(s: np.ndarray) -> np.ndarray:
    """Coefficients of exp(S) for a power series S with zero constant term."""
    e = np.zeros_like(s)
    e[0] = 1.0
    k = np.arange(len(s))
    for j in range(1, len(s)):
        e[j] = np.dot(k[1:j + 1] * s[1:j + 1], e[j - 1::-1][:j]) / j
    return e


def sagdeev_series(params: PhysicalParams, order: int = SERIES_ORDER) -> np.ndarray:
    """Taylor coefficients of V as a function of v = log n around v = 0."""
    p = params
    k = np.arange(order + 1)
    fact = np.array([math.factorial(int(i)) for i in k], dtype=float)
    a = p.gamma * p.R * p.T_inf / (p.gamma - 1.0)
    b = 0.5 * p.m * p.u_inf**2
    f = (a * (p.gamma - 1.0) ** k + b * (-2.0) ** k) / fact
    f[0] = 0.0
    coeff = (p.R * p.T_inf * p.gamma**k + p.m * p.u_inf**2 * (-1.0) ** k) / fact
    coeff += _exp_series(-f)
    coeff[0] = 0.0
    coeff[1] = 0.0
    return coeff


def sagdeev_from_log_density(v, params: PhysicalParams):
    """Closed-form (phi, V) along the branch, parametrised by v = log n.

    Substituting eta = f(s) turns the integral of f^{-1} into
    R T_inf (n^gamma - 1) - m u_inf^2 (1 - 1/n).  The direct formula cancels
    to O(v^2) from O(v) terms, so for |v| < SERIES_SWITCH the Taylor series
    is summed instead.
    """
    p = params
    v = np.asarray(v, dtype=float)
    phi = _f_of_log(v, p)
    V = p.R * p.T_inf * np.expm1(p.gamma * v) + p.m * p.u_inf**2 * np.expm1(-v) + np.expm1(-phi)
    small = np.abs(v) < SERIES_SWITCH
    if np.any(small):
        V = np.where(small, np.polynomial.polynomial.polyval(v, sagdeev_series(p)), V)
    return phi, V


def sagdeev_second_derivative(params: PhysicalParams) -> float:
    """Closed form V''(0) = 1 + 1/f'(1)."""
    return 1.0 + 1.0 / bernoulli_f_prime(1.0, params)


def sagdeev_third_derivative(params: PhysicalParams) -> float:
    """Closed form V'''(0) = -f''(1)/f'(1)^3 - 1."""
    p = params
    f1 = bernoulli_f_prime(1.0, p)
    f2 = p.gamma * (p.gamma - 2.0) * p.R * p.T_inf + 3.0 * p.m * p.u_inf**2
    return -f2 / f1**3 - 1.0


# --- lambda0 ----------------------------------------------------------------

def _bisect(fun, lo: float, hi: float, xtol: float) -> float:
    f_lo = fun(lo)
    if f_lo == 0.0:
        return lo
    if f_lo * fun(hi) > 0.0:
        raise DomainError("bisection bracket does not enclose a sign change")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        f_mid = fun(mid)
        if f_mid == 0.0:
            return mid
        if (f_mid < 0.0) == (f_lo < 0.0):
            lo, f_lo = mid, f_mid
        else:
            hi = mid
        if hi - lo <= xtol:
            break
    return 0.5 * (lo + hi)


def lambda0_residual(lam: float, gamma: float) -> float:
    return lam * (lam - 1.0) * (lam - 2.0) - 12.0 * (2.0 * lam / (gamma + 1.0) + 2.0)


def lambda0(gamma: float, xtol: float = 1e-14) -> float:
    """Upper end of the admissible algebraic weight exponent in the degenerate case.

    Root of lam(lam-1)(lam-2) = 12(2 lam/(gamma+1) + 2) inside (4, 5.5694).
    """
    if not gamma > 1.0:
        raise DomainError(f"gamma must satisfy gamma > 1 (got {gamma})")
    return _bisect(lambda lam: lambda0_residual(lam, gamma), *LAMBDA0_BRACKET, xtol=xtol)


def lambda0_sup(xtol: float = 1e-14) -> float:
    """Root of lam(lam-1)(lam-2) = 12(lam + 2), the gamma -> 1 limit of :func:`lambda0`."""
    return _bisect(lambda lam: lam * (lam - 1.0) * (lam - 2.0) - 12.0 * (lam + 2.0), 5.0, 6.0, xtol)
