"""sheathlab command line: sheath, evolve, sweep, lambda0 and check.

Exit codes: 0 success, 1 usage or config error, 2 no stationary solution,
3 solver failure at run time.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import config as cfg
from . import model, stationary
from .diagnostics import fit_decay, records_csv, records_jsonl
from .errors import ConfigError, DegenerateFit, DomainError, InsufficientWindow, NonExistence, SheathLabError
from .evolve import SimConfig, SimulationAborted, run
from .model import RegimeTag

EXIT_OK, EXIT_USAGE, EXIT_NONEXISTENCE, EXIT_SOLVER = 0, 1, 2, 3
DEFAULT_GAMMAS = (1.01, 1.1, 1.4, 5.0 / 3.0, 2.0, 3.0, 5.0, 10.0, 100.0)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _clean(obj):
    """JSON-safe copy: numpy scalars to float, non-finite floats to None."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj) if math.isfinite(obj) else None
    if hasattr(obj, "value"):
        return obj.value
    return obj


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(_clean(obj), indent=2) + "\n")


def _write_text(path: Path, text: str) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(text)


def _prepare_out(out: Path, sim: SimConfig, sweep=None) -> Path:
    out.mkdir(parents=True, exist_ok=True)
    _write_text(out / "config.ini", cfg.resolved_ini(sim, sweep))
    return out


# --- sheath ---------------------------------------------------------------------

def _decay_report(profile) -> dict:
    tag = profile.regime.tag
    report: dict = {"regime": tag.value}
    report["stationary_residuals"] = stationary.stationary_residuals(profile)
    report["invariant_defects"] = stationary.invariant_defects(profile)
    if abs(profile.phi_b) <= 1e-15:
        report["decay"] = {"status": "TrivialOnly"}
    elif tag is RegimeTag.DEGENERATE:
        report["decay"] = {"status": "ok", "kind": "algebraic", **stationary.verify_decay_degenerate(profile).as_dict()}
    else:
        try:
            fit = stationary.verify_decay_nondegenerate(profile)
            report["decay"] = {"status": "ok", "kind": "exponential", **fit.as_dict()}
        except InsufficientWindow as exc:
            report["decay"] = {"status": "InsufficientWindow", "message": str(exc)}
    return report


def cmd_sheath(sim: SimConfig, out: Path, svg: bool = True) -> tuple[int, dict]:
    _prepare_out(out, sim)
    verdict = stationary.existence_check(sim.params)
    regime = {**verdict.as_dict()}
    if verdict.regime.tag is RegimeTag.DEGENERATE:
        regime["Gamma"] = stationary.degenerate_gamma(sim.params)
    _write_json(out / "regime.json", regime)
    summary = {"status": verdict.status.value, "regime": verdict.regime.tag.value, "phi_b": verdict.regime.phi_b}
    if verdict.status is stationary.Existence.NO_SOLUTION:
        print(f"no stationary solution: {'; '.join(verdict.reasons)}", file=sys.stderr)
        return EXIT_NONEXISTENCE, summary
    profile = stationary.solve_sheath(sim.params, sim.grid)
    stationary.write_profile_csv(profile, out / "profile.csv")
    _write_json(out / "decay.json", _decay_report(profile))
    if svg:
        from .plotting import plot_profile
        plot_profile(profile, out / "profile.svg", f"{verdict.regime.tag.value} sheath, phi_b = {profile.phi_b:.4g}")
    print(f"{verdict.status.value}: {verdict.regime.tag.value}, phi_b = {verdict.regime.phi_b:.6g} -> {out}")
    return EXIT_OK, summary


# --- evolve ---------------------------------------------------------------------

def cmd_evolve(sim: SimConfig, out: Path, svg: bool = True) -> tuple[int, dict]:
    _prepare_out(out, sim)
    try:
        result = run(sim)
    except SimulationAborted as exc:
        msg = str(exc)
        _write_text(out / "diagnostics.csv", records_csv(exc.records, error=msg))
        _write_text(out / "diagnostics.jsonl", records_jsonl(exc.records, error=msg))
        _write_json(out / "fit.json", {"status": "aborted", "error": type(exc.cause).__name__, "message": msg})
        print(f"error: {msg}", file=sys.stderr)
        return EXIT_SOLVER, {"status": "aborted", "message": msg}

    records = result.records
    _write_text(out / "diagnostics.csv", records_csv(records))
    _write_text(out / "diagnostics.jsonl", records_jsonl(records))
    beta = sim.weight.beta if sim.fit_model == "algebraic" else None
    fit = None
    try:
        fit = fit_decay(records, sim.fit_model, sim.fit_window, sim.fit_key, beta)
        fit_info = fit.as_dict()
    except DegenerateFit as exc:
        fit_info = {"status": "DegenerateFit", "message": str(exc)}
    last = records[-1]
    fit_info["run"] = {
        "steps": result.steps, "max_cfl": result.max_cfl, "t_end": last.t,
        "E0_final": last.E0_boundary, "phi_x0_sheath": float(result.profile.phi_x[0]),
        "E0_return_error": abs(last.E0_boundary - float(result.profile.phi_x[0])),
        "sup_N": last.sup_N, "regime": result.profile.regime.tag.value,
    }
    _write_json(out / "fit.json", fit_info)
    if svg:
        from .plotting import plot_decay, plot_profile
        plot_profile(result.profile, out / "profile.svg", f"sheath, phi_b = {result.profile.phi_b:.4g}")
        plot_decay(records, out / "energy.svg", fit, sim.fit_key)
    expo = f"exponent {fit.exponent:.6g} (r2 {fit.r_squared:.4f})" if fit else fit_info["status"]
    print(f"evolved to t = {last.t:g} in {result.steps} steps; {sim.fit_model} fit: {expo} -> {out}")
    return EXIT_OK, {"status": fit_info.get("status", "ok"), "exponent": fit.exponent if fit else None,
                     "r_squared": fit.r_squared if fit else None}


# --- sweep ----------------------------------------------------------------------

def _sweep_task(task):
    command, sim, out, svg = task
    fn = cmd_sheath if command == "sheath" else cmd_evolve
    try:
        code, summary = fn(sim, Path(out), svg)
    except NonExistence as exc:
        code, summary = EXIT_NONEXISTENCE, {"status": "NoSolution", "message": str(exc)}
    except SheathLabError as exc:
        code, summary = EXIT_SOLVER, {"status": type(exc).__name__, "message": str(exc)}
    return code, summary


def cmd_sweep(loaded: cfg.LoadedConfig, out: Path, workers: int = 1, svg: bool = False) -> int:
    sweep = loaded.sweep
    if sweep is None:
        raise ConfigError(f"{loaded.source}: sweep needs a [sweep] section")
    _prepare_out(out, loaded.sim, sweep)
    tasks = []
    for k, value in enumerate(sweep.values):
        try:
            sim = cfg.with_value(loaded.sim, sweep.parameter, value)
        except SheathLabError as exc:
            raise ConfigError(f"{loaded.source}: [sweep] {sweep.parameter} = {value!r}: {exc}") from exc
        tasks.append((sweep.command, sim, str(out / f"run_{k:03d}"), svg))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_sweep_task, tasks))
    else:
        results = [_sweep_task(t) for t in tasks]

    keys = ("status", "regime", "phi_b", "exponent", "r_squared")
    lines = ["index,value,exit_code," + ",".join(keys)]
    for k, (value, (code, summary)) in enumerate(zip(sweep.values, results)):
        cells = []
        for key in keys:
            v = summary.get(key)
            cells.append("" if v is None else stationary.format_float(v) if isinstance(v, float) else str(v))
        lines.append(f"{k},{stationary.format_float(value)},{code}," + ",".join(cells))
    _write_text(out / "summary.csv", "\n".join(lines) + "\n")
    failures = sum(code == EXIT_SOLVER for code, _ in results)
    print(f"sweep over {sweep.parameter}: {len(results)} runs, {failures} solver failures -> {out}")
    return EXIT_SOLVER if failures else EXIT_OK


# --- lambda0 / check ------------------------------------------------------------

def cmd_lambda0(gammas, out: Path | None) -> int:
    rows = ["gamma,lambda0,residual"]
    for g in gammas:
        lam = model.lambda0(g)
        rows.append(f"{stationary.format_float(g)},{stationary.format_float(lam)},"
                    f"{stationary.format_float(model.lambda0_residual(lam, g))}")
        print(f"gamma = {g:<10.6g} lambda0 = {lam:.12f}")
    print(f"gamma -> 1 limit: {model.lambda0_sup():.12f}")
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        _write_text(out / "lambda0.csv", "\n".join(rows) + "\n")
    return EXIT_OK


def cmd_check(loaded: cfg.LoadedConfig) -> int:
    verdict = stationary.existence_check(loaded.sim.params)
    sys.stdout.write(cfg.resolved_ini(loaded.sim, loaded.sweep))
    print(f"# regime: {verdict.regime.tag.value}")
    print(f"# existence: {verdict.status.value}")
    for reason in verdict.reasons:
        print(f"#   {reason}")
    return EXIT_NONEXISTENCE if verdict.status is stationary.Existence.NO_SOLUTION else EXIT_OK


# --- entry point ----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="sheathlab", description="Plasma sheath solutions and stability runs.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def source(p):
        g = p.add_mutually_exclusive_group(required=True)
        g.add_argument("--config", type=Path, help="INI run configuration")
        g.add_argument("--preset", choices=sorted(cfg.PRESETS), help="shipped configuration")
        p.add_argument("--seed", type=int, help="seed for randomised perturbation mixes")

    for name, text in (("sheath", "solve the stationary sheath and verify its tail"),
                       ("evolve", "perturb the sheath and track the decay"),
                       ("sweep", "run one command over a list of parameter values")):
        p = sub.add_parser(name, help=text)
        source(p)
        p.add_argument("--out", type=Path, required=True, help="output directory (created if absent)")
        p.add_argument("--svg", choices=("on", "off"), default="on" if name != "sweep" else "off")
        if name == "sweep":
            p.add_argument("--workers", type=int, default=1, help="worker processes")

    p = sub.add_parser("lambda0", help="tabulate the degenerate weight threshold lambda0(gamma)")
    p.add_argument("--gamma", type=float, nargs="+", help="adiabatic exponents (default: a fixed grid)")
    p.add_argument("--out", type=Path, help="also write lambda0.csv here")

    p = sub.add_parser("check", help="validate a configuration and print its regime")
    source(p)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "lambda0":
            return cmd_lambda0(args.gamma or DEFAULT_GAMMAS, args.out)
        loaded = cfg.load(args.config, args.preset)
        if args.seed is not None:
            sim = replace(loaded.sim, perturbation=replace(loaded.sim.perturbation, seed=args.seed))
            loaded = replace(loaded, sim=sim)
        if args.command == "check":
            return cmd_check(loaded)
        svg = args.svg == "on"
        if args.command == "sweep":
            if args.workers < 1:
                raise ConfigError("--workers must be at least 1")
            return cmd_sweep(loaded, args.out, args.workers, svg)
        fn = cmd_sheath if args.command == "sheath" else cmd_evolve
        return fn(loaded.sim, args.out, svg)[0]
    except (ConfigError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NonExistence as exc:
        print(f"no stationary solution: {exc}", file=sys.stderr)
        return EXIT_NONEXISTENCE
    except SheathLabError as exc:
        print(f"solver failure ({type(exc).__name__}): {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
