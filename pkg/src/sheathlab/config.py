"""INI run configurations, shipped presets and the resolved-config writer.

Sections: [physics], [grid], [perturbation], [weight], [run] and, for the
``sweep`` command only, [sweep].  Keys accept ``key = value`` or ``key: value``.
"""
from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, replace
from pathlib import Path

from . import model
from .diagnostics import WeightSpec
from .errors import ConfigError, SheathLabError
from .evolve import PerturbationSpec, SimConfig
from .model import PhysicalParams
from .stationary import Grid, default_length

DEFAULT_N = 2048

SCHEMA = {
    "physics": {"m", "gamma", "R", "T_inf", "u_inf", "u_e", "phi_b", "mach", "q0"},
    "grid": {"N", "L"},
    "perturbation": {"shape", "amplitude", "center", "width", "decay", "lam", "components",
                     "q0_offset", "random_mix", "seed"},
    "weight": {"kind", "alpha", "beta", "order"},
    "run": {"t_end", "cfl", "output_every", "fit_model", "fit_window", "fit_key"},
    "sweep": {"parameter", "values", "command"},
}

PRESETS = {
    "nondegenerate": """
[physics]
m = 1
gamma = 2
R = 1
T_inf = 1
u_inf = -2
phi_b = 0.05

[perturbation]
shape = gaussian_bump
amplitude = 1e-3

[weight]
kind = exponential
beta = 0.5

[run]
t_end = 50
output_every = 0.5
fit_window = 5, 50
""",
    "degenerate": """
[physics]
m = 1
gamma = 2
R = 1
T_inf = 1
mach = degenerate
phi_b = 0.01

[grid]
N = 4096
L = 200

[perturbation]
shape = gaussian_bump
amplitude = 1e-3

[weight]
kind = algebraic
alpha = 4
beta = 0.08

[run]
t_end = 50
output_every = 0.5
fit_model = algebraic
fit_window = 5, 50
""",
    "forbidden": """
[physics]
m = 1
gamma = 2
R = 1
T_inf = 1
u_inf = -1.6
phi_b = 0.05
""",
    "trivial": """
[physics]
m = 1
gamma = 2
R = 1
T_inf = 1
u_inf = -1
u_e = 1
""",
    "quiet": """
[physics]
m = 1
gamma = 2
R = 1
T_inf = 1
u_inf = -2
phi_b = 0.05

[perturbation]
amplitude = 0

[run]
t_end = 10
output_every = 0.5
""",
}


@dataclass(frozen=True)
class SweepSpec:
    parameter: str
    values: tuple[float, ...]
    command: str = "sheath"


@dataclass(frozen=True)
class LoadedConfig:
    sim: SimConfig
    sweep: SweepSpec | None
    source: str


def _line_of(text: str, section: str, key: str) -> int | None:
    current = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if line.startswith("[") and line.endswith("]"):
            current = line[1:-1].strip()
        elif current == section and line.split("=", 1)[0].split(":", 1)[0].strip() == key:
            return lineno
    return None


class _Reader:
    def __init__(self, text: str, source: str):
        self.text = text
        self.source = source
        self.cp = configparser.ConfigParser(interpolation=None)
        self.cp.optionxform = str
        try:
            self.cp.read_string(text, source=source)
        except configparser.Error as exc:
            raise ConfigError(f"{source}: {exc}") from exc
        for section in self.cp.sections():
            if section not in SCHEMA:
                raise ConfigError(f"{source}: unknown section [{section}] (allowed: {', '.join(SCHEMA)})")
            for key in self.cp[section]:
                if key not in SCHEMA[section]:
                    raise ConfigError(self.where(section, key) + f"unknown key {key!r} in [{section}]")

    def where(self, section: str, key: str) -> str:
        line = _line_of(self.text, section, key)
        return f"{self.source}:{line}: " if line else f"{self.source}: "

    def has(self, section: str, key: str) -> bool:
        return self.cp.has_option(section, key)

    def raw(self, section: str, key: str, default=None):
        return self.cp.get(section, key) if self.has(section, key) else default

    def number(self, section: str, key: str, default=None, kind=float):
        if not self.has(section, key):
            return default
        raw = self.cp.get(section, key)
        try:
            value = kind(raw)
        except ValueError:
            raise ConfigError(self.where(section, key) + f"[{section}] {key} = {raw!r} is not a valid "
                              f"{'integer' if kind is int else 'number'}") from None
        if kind is float and not math.isfinite(value):
            raise ConfigError(self.where(section, key) + f"[{section}] {key} must be finite")
        return value

    def floats(self, section: str, key: str):
        raw = self.raw(section, key)
        if raw is None:
            return None
        try:
            return tuple(float(s) for s in raw.replace(";", ",").split(",") if s.strip())
        except ValueError:
            raise ConfigError(self.where(section, key) + f"[{section}] {key} = {raw!r} is not a number list") from None

    def boolean(self, section: str, key: str, default: bool) -> bool:
        if not self.has(section, key):
            return default
        try:
            return self.cp.getboolean(section, key)
        except ValueError:
            raise ConfigError(self.where(section, key) + f"[{section}] {key} must be true or false") from None


def _physics(r: _Reader) -> PhysicalParams:
    s = "physics"
    m = r.number(s, "m", 1.0)
    gamma = r.number(s, "gamma", 2.0)
    R = r.number(s, "R", 1.0)
    T_inf = r.number(s, "T_inf", 1.0)
    mach = r.raw(s, "mach")
    if mach is not None:
        if mach.strip().lower() != "degenerate":
            raise ConfigError(r.where(s, "mach") + f"mach only accepts 'degenerate' (got {mach!r})")
        if r.has(s, "u_inf"):
            raise ConfigError(r.where(s, "mach") + "give either mach = degenerate or u_inf, not both")
        if not (m > 0 and gamma > 1 and R > 0 and T_inf > 0):
            u_inf = -1.0  # let PhysicalParams report the offending constant
        else:
            u_inf = model.degenerate_u_inf(m, gamma, R, T_inf)
    else:
        u_inf = r.number(s, "u_inf", -2.0)
    if r.has(s, "phi_b") and r.has(s, "u_e"):
        raise ConfigError(r.where(s, "phi_b") + "give either phi_b or u_e, not both")
    q0 = r.number(s, "q0")
    try:
        params = PhysicalParams(m=m, gamma=gamma, R=R, T_inf=T_inf, u_inf=u_inf,
                                u_e=r.number(s, "u_e", abs(u_inf) if u_inf < 0 else 1.0), q0=q0)
        if r.has(s, "phi_b"):
            params = params.with_phi_b(r.number(s, "phi_b"))
    except SheathLabError as exc:
        raise ConfigError(f"{r.source}: [physics] {exc}") from exc
    return params


def config_from_text(text: str, source: str = "<config>") -> LoadedConfig:
    r = _Reader(text, source)
    params = _physics(r)
    try:
        N = r.number("grid", "N", DEFAULT_N, kind=int)
        L = r.number("grid", "L")
        grid = Grid(L if L is not None else default_length(params), N)

        components = r.raw("perturbation", "components")
        pert = PerturbationSpec(
            shape=(r.raw("perturbation", "shape", "gaussian_bump")).strip(),
            amplitude=r.number("perturbation", "amplitude", 0.0),
            center=r.number("perturbation", "center", 5.0),
            width=r.number("perturbation", "width", 1.0),
            decay=r.number("perturbation", "decay", 1.0),
            lam=r.number("perturbation", "lam", 4.0),
            components=tuple(c.strip() for c in components.split(",") if c.strip()) if components else ("v", "u", "T"),
            q0_offset=r.number("perturbation", "q0_offset", 0.0),
            random_mix=r.boolean("perturbation", "random_mix", False),
            seed=r.number("perturbation", "seed", 0, kind=int),
        )
        weight = WeightSpec(
            kind=r.raw("weight", "kind", "exponential").strip(),
            alpha=r.number("weight", "alpha", 0.0),
            beta=r.number("weight", "beta", 0.5),
            order=r.number("weight", "order", 2, kind=int),
        )
        window = r.floats("run", "fit_window")
        if window is not None and (len(window) != 2 or window[0] >= window[1]):
            raise ConfigError(r.where("run", "fit_window") + "fit_window needs two increasing times")
        fit_model = r.raw("run", "fit_model", "exponential").strip()
        if fit_model not in ("exponential", "algebraic"):
            raise ConfigError(r.where("run", "fit_model") + f"fit_model must be exponential or algebraic (got {fit_model!r})")
        sim = SimConfig(
            params=params, grid=grid,
            cfl=r.number("run", "cfl", 0.5),
            t_end=r.number("run", "t_end", 10.0),
            perturbation=pert, weight=weight,
            output_every=r.number("run", "output_every", 0.5),
            fit_model=fit_model, fit_window=window,
            fit_key=r.raw("run", "fit_key", "E_weighted").strip(),
        )
    except ConfigError:
        raise
    except SheathLabError as exc:
        raise ConfigError(f"{source}: {exc}") from exc

    sweep = None
    if r.cp.has_section("sweep"):
        parameter = r.raw("sweep", "parameter")
        values = r.floats("sweep", "values")
        if not parameter or not values:
            raise ConfigError(f"{source}: [sweep] needs both 'parameter' and 'values'")
        if parameter not in ("m", "gamma", "R", "T_inf", "u_inf", "u_e", "phi_b", "amplitude", "beta"):
            raise ConfigError(r.where("sweep", "parameter") + f"cannot sweep over {parameter!r}")
        command = r.raw("sweep", "command", "sheath").strip()
        if command not in ("sheath", "evolve"):
            raise ConfigError(r.where("sweep", "command") + f"sweep command must be sheath or evolve (got {command!r})")
        sweep = SweepSpec(parameter, values, command)
    return LoadedConfig(sim, sweep, source)


def load(path=None, preset: str | None = None) -> LoadedConfig:
    if (path is None) == (preset is None):
        raise ConfigError("give exactly one of --config or --preset")
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(f"unknown preset {preset!r} (choose from {', '.join(PRESETS)})")
        return config_from_text(PRESETS[preset], f"<preset {preset}>")
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file {path} does not exist")
    return config_from_text(path.read_text(), str(path))


def parse_config(path) -> SimConfig:
    """Validated SimConfig from an INI file, defaults filled in."""
    return load(path).sim


def with_value(sim: SimConfig, parameter: str, value: float) -> SimConfig:
    """Copy of ``sim`` with one swept parameter replaced (phi_b re-derives u_e)."""
    if parameter == "phi_b":
        return replace(sim, params=sim.params.with_phi_b(value))
    if parameter == "amplitude":
        return replace(sim, perturbation=replace(sim.perturbation, amplitude=value))
    if parameter == "beta":
        return replace(sim, weight=replace(sim.weight, beta=value))
    return replace(sim, params=replace(sim.params, **{parameter: value}))


def _fmt(x) -> str:
    return repr(float(x))


def resolved_ini(sim: SimConfig, sweep: SweepSpec | None = None) -> str:
    """Every value the run actually used, with u_inf and u_e spelled out."""
    p, g, pert, w = sim.params, sim.grid, sim.perturbation, sim.weight
    lines = ["[physics]"]
    lines += [f"{k} = {_fmt(getattr(p, k))}" for k in ("m", "gamma", "R", "T_inf", "u_inf", "u_e")]
    if p.q0 is not None:
        lines.append(f"q0 = {_fmt(p.q0)}")
    lines += ["", "[grid]", f"N = {g.N}", f"L = {_fmt(g.L)}", "", "[perturbation]",
              f"shape = {pert.shape}", f"amplitude = {_fmt(pert.amplitude)}", f"center = {_fmt(pert.center)}",
              f"width = {_fmt(pert.width)}", f"decay = {_fmt(pert.decay)}", f"lam = {_fmt(pert.lam)}",
              f"components = {', '.join(pert.components)}", f"q0_offset = {_fmt(pert.q0_offset)}",
              f"random_mix = {str(pert.random_mix).lower()}", f"seed = {pert.seed}",
              "", "[weight]", f"kind = {w.kind}", f"alpha = {_fmt(w.alpha)}", f"beta = {_fmt(w.beta)}",
              f"order = {w.order}",
              "", "[run]", f"t_end = {_fmt(sim.t_end)}", f"cfl = {_fmt(sim.cfl)}",
              f"output_every = {_fmt(sim.output_every)}", f"fit_model = {sim.fit_model}", f"fit_key = {sim.fit_key}"]
    if sim.fit_window is not None:
        lines.append(f"fit_window = {_fmt(sim.fit_window[0])}, {_fmt(sim.fit_window[1])}")
    if sweep is not None:
        lines += ["", "[sweep]", f"parameter = {sweep.parameter}",
                  f"values = {', '.join(_fmt(v) for v in sweep.values)}", f"command = {sweep.command}"]
    return "\n".join(lines) + "\n"
