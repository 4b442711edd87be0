"""Acceptance criteria, one test each; every test also records a PASS/FAIL line
that is printed in the terminal summary."""
import math
import time
from dataclasses import replace

import numpy as np
import pytest

from sheathlab import cli, evolve, model, poisson, stationary
from sheathlab import config as cfg
from sheathlab.diagnostics import fit_decay, records_csv
from sheathlab.model import RegimeTag
from sheathlab.stationary import Grid

L_MMS = 20.0


@pytest.fixture(scope="module")
def nondeg_run():
    return evolve.run(cfg.load(preset="nondegenerate").sim)


@pytest.fixture(scope="module")
def deg_run():
    return evolve.run(cfg.load(preset="degenerate").sim)


def record_at(records, t):
    return min(records, key=lambda r: abs(r.t - t))


def test_criterion_01_stationary_structure(nondeg_params, acceptance):
    t0 = time.perf_counter()
    prof = stationary.solve_sheath(nondeg_params, stationary.default_grid(nondeg_params, 4096))
    elapsed = time.perf_counter() - t0
    res = stationary.stationary_residuals(prof)
    inv = stationary.invariant_defects(prof)
    ok = (max(res.values()) <= 1e-5 and inv["mass_flux"] <= 1e-10 and inv["entropy"] <= 1e-10
          and inv["boundary_flux"] <= 1e-8 and elapsed < 5.0)
    acceptance(1, ok, f"max residual {max(res.values()):.2e} (<= 1e-5), mass flux {inv['mass_flux']:.1e}, "
                      f"entropy {inv['entropy']:.1e} (<= 1e-10), wall flux {inv['boundary_flux']:.1e} (<= 1e-8), "
                      f"{elapsed:.2f} s (< 5 s)")
    assert ok


def test_criterion_02_nondegenerate_rate(nondeg_profile, nondeg_params, acceptance):
    fit = stationary.verify_decay_nondegenerate(nondeg_profile)
    oracle = math.sqrt(stationary.sagdeev_curvature_fd(nondeg_params))
    dev = abs(fit.rate - oracle) / oracle
    ok = dev <= 0.05
    acceptance(2, ok, f"fitted rate {fit.rate:.6f} vs sqrt(V''(0)) {oracle:.6f}: deviation {dev:.2e} (<= 5%)")
    assert ok


def test_criterion_03_degenerate_envelope(deg_profile, deg_params, acceptance):
    env = stationary.verify_decay_degenerate(deg_profile)
    G = env.Gamma
    c = stationary.degenerate_constants(deg_params)
    ident = max(abs(c[2] - 6 * G**2), abs(c[3] + 24 * G**3))
    ok = env.sup_defects[0] <= 0.2 and env.sup_defects[1] <= 0.3 * 2 * G and ident <= 1e-14
    acceptance(3, ok, f"sup|(-phi)G^2 + 1| = {env.sup_defects[0]:.4f} (<= 0.2), "
                      f"sup|(-phi)_x G^3 - 2 Gamma| = {env.sup_defects[1]:.4f} (<= {0.6 * G:.4f}), "
                      f"identity defect {ident:.1e} (<= 1e-14)")
    assert ok


def test_criterion_04_regime_partition(tmp_path, acceptance, capsys):
    expected = {"trivial": RegimeTag.SUBSONIC, "forbidden": RegimeTag.FORBIDDEN_WINDOW,
                "nondegenerate": RegimeTag.NONDEGENERATE, "degenerate": RegimeTag.DEGENERATE}
    got = {name: model.classify(cfg.load(preset=name).sim.params).tag for name in expected}
    code = cli.main(["sheath", "--preset", "forbidden", "--out", str(tmp_path), "--svg", "off"])
    err = capsys.readouterr().err
    ok = got == expected and code == 2 and "does not admit" in err
    acceptance(4, ok, ", ".join(f"{k} -> {v.value}" for k, v in got.items()) + f"; forbidden exit code {code}")
    assert ok


def test_criterion_05_lambda0(acceptance):
    gammas = np.unique(np.r_[np.geomspace(1.01, 100.0, 60), [4 / 3, 5 / 3, 2.0, 3.0]])
    lams = np.array([model.lambda0(g) for g in gammas])
    resid = max(abs(model.lambda0_residual(lam, g)) for lam, g in zip(lams, gammas))
    in_bracket = bool(np.all((lams > 4.0) & (lams < 5.5694)))
    lam100 = model.lambda0(100.0)
    ok = in_bracket and resid <= 1e-9 and abs(lam100 - 4.0) <= 1e-3
    acceptance(5, ok, f"{len(gammas)} gammas in (4, 5.5694): {in_bracket}, max residual {resid:.1e} (<= 1e-9), "
                      f"lambda0(100) = {lam100:.6f}, |lambda0(100) - 4| = {abs(lam100 - 4):.4f} (<= 1e-3)")
    assert in_bracket and resid <= 1e-9
    assert abs(lam100 - 4.0) <= 1e-3


def test_criterion_06_poisson(acceptance):
    def err(N):
        grid = Grid(L_MMS, N)
        x = grid.x
        g, gp, e = 1 - x / L_MMS, -1 / L_MMS, 0.1 * np.exp(-x)
        phi, dphi, d2phi = e * g**2, e * (-g**2 + 2 * g * gp), e * (g**2 - 4 * g * gp + 2 * gp**2)
        sol = poisson.solve_potential(d2phi + np.exp(-phi), dphi[0], grid)
        return np.max(np.abs(sol.phi - phi))

    errs = np.array([err(N) for N in (257, 513, 1025, 2049, 4097)])
    orders = np.log2(errs[:-1] / errs[1:])
    neutral = np.max(np.abs(poisson.solve_potential(np.ones(1025), 0.0, Grid(30.0, 1025)).phi))
    ok = bool(np.all(np.abs(orders - 2.0) <= 0.2)) and neutral <= 1e-14
    acceptance(6, ok, f"orders {np.array2string(orders, precision=4)} (2 +- 0.2), neutral max|phi| {neutral:.1e}")
    assert ok


def test_criterion_07_dynamic_stationarity(acceptance):
    sim = cfg.load(preset="nondegenerate").sim
    sim = replace(sim, grid=Grid(sim.grid.L, 2048), cfl=0.5, t_end=10.0,
                  perturbation=replace(sim.perturbation, amplitude=0.0, q0_offset=0.0))
    t0 = time.perf_counter()
    res = evolve.run(sim)
    elapsed = time.perf_counter() - t0
    worst = max(max(r.norms["h2"], r.norms["sigma"]) for r in res.records)
    drift = max(np.max(np.abs(res.state.u - res.profile.u)), np.max(np.abs(res.state.v - res.profile.v)),
                np.max(np.abs(res.state.T - res.profile.T)))
    ok = worst <= 1e-3 and drift <= 1e-3 and elapsed < 60.0
    acceptance(7, ok, f"max weighted perturbation norm {worst:.2e}, final state drift {drift:.2e} (<= 1e-3), "
                      f"{elapsed:.1f} s (< 60 s)")
    assert ok


def test_criterion_08_nondegenerate_stability(nondeg_run, acceptance):
    recs = nondeg_run.records
    h1_1, h1_50 = record_at(recs, 1.0).norms["h1"] ** 2, record_at(recs, 50.0).norms["h1"] ** 2
    fit = fit_decay(recs, "exponential", nondeg_run.config.fit_window)
    e0_err = abs(recs[-1].E0_boundary - nondeg_run.profile.phi_x[0])
    ratio = h1_50 / h1_1
    ok = ratio <= 0.1 and fit.exponent < 0 and fit.r_squared >= 0.9 and e0_err <= 1e-3
    acceptance(8, ok, f"H1 energy ratio E(50)/E(1) = {ratio:.2e} (<= 0.1), exponent {fit.exponent:.4f} (< 0), "
                      f"r2 {fit.r_squared:.4f} (>= 0.9), |E0 - phi_x(0)| = {e0_err:.1e} (<= 1e-3)")
    assert ok


def test_criterion_09_degenerate_stability(deg_run, acceptance):
    sim = deg_run.config
    beta_max = stationary.degenerate_gamma(sim.params) * math.sqrt(deg_run.profile.phi_b)
    recs = deg_run.records
    e5, e50 = record_at(recs, 5.0).energy0, record_at(recs, 50.0).energy0
    fit = fit_decay(recs, "algebraic", sim.fit_window, beta=sim.weight.beta)
    ok = (sim.weight.kind == "algebraic" and sim.weight.alpha == 4.0 and sim.weight.beta <= beta_max
          and e50 < e5 and fit.exponent < 0)
    acceptance(9, ok, f"beta {sim.weight.beta} (<= {beta_max:.4f}), E(5) = {e5:.3e} > E(50) = {e50:.3e}, "
                      f"algebraic power {fit.exponent:.3f} (< 0, r2 {fit.r_squared:.3f})")
    assert ok


def test_criterion_10_determinism(tmp_path, nondeg_run, deg_run, acceptance):
    same = {}
    for name in sorted(cfg.PRESETS):
        outs = [tmp_path / f"{name}_{k}" for k in range(2)]
        for out in outs:
            cli.main(["sheath", "--preset", name, "--out", str(out), "--svg", "off"])
        a, b = (o / "profile.csv" for o in outs)
        same[f"sheath/{name}"] = (not a.exists() and not b.exists()) or a.read_bytes() == b.read_bytes()
    for name, run in (("nondegenerate", nondeg_run), ("degenerate", deg_run)):
        out = tmp_path / f"evolve_{name}"
        cli.main(["evolve", "--preset", name, "--out", str(out), "--svg", "off"])
        same[f"evolve/{name}"] = (out / "diagnostics.csv").read_text() == records_csv(run.records)
    quiet = [tmp_path / f"quiet_{k}" for k in range(2)]
    for out in quiet:
        cli.main(["evolve", "--preset", "quiet", "--out", str(out)])
    same["evolve/quiet"] = all((quiet[0] / f).read_bytes() == (quiet[1] / f).read_bytes()
                               for f in ("diagnostics.csv", "energy.svg"))
    ok = all(same.values())
    acceptance(10, ok, f"{sum(same.values())}/{len(same)} preset outputs byte-identical across repeated runs")
    assert ok
