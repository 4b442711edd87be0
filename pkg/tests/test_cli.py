import json
import math

import pytest

from sheathlab import cli
from sheathlab import config as cfg
from sheathlab.errors import ConfigError
from sheathlab.model import RegimeTag, classify

SMALL_RUN = """
[physics]
u_inf = -2
phi_b = 0.05

[grid]
N = 512

[perturbation]
amplitude = {amp}
components = {comp}

[run]
t_end = 2
output_every = 0.05
fit_window = 0.5, 2
"""


def write(tmp_path, text, name="run.ini"):
    path = tmp_path / name
    path.write_text(text)
    return path


class TestConfig:
    def test_minimal_file_gets_defaults(self, tmp_path):
        sim = cfg.parse_config(write(tmp_path, "[physics]\nu_inf = -2\nphi_b = 0.05\n"))
        assert sim.cfl == 0.5 and sim.grid.N == 2048
        assert sim.params.gamma == 2.0 and sim.perturbation.amplitude == 0.0
        assert math.log(sim.params.u_e / 2.0) == pytest.approx(0.05)

    def test_gamma_rejected(self, tmp_path):
        with pytest.raises(ConfigError, match="gamma > 1"):
            cfg.parse_config(write(tmp_path, "[physics]\ngamma = 0.9\n"))

    def test_mach_degenerate(self, tmp_path):
        sim = cfg.parse_config(write(tmp_path, "[physics]\ngamma = 3\nT_inf = 0.5\nmach: degenerate\nphi_b = 0.01\n"))
        assert sim.params.u_inf == -math.sqrt((3 * 0.5 + 1) / 1.0)
        assert classify(sim.params).tag is RegimeTag.DEGENERATE

    def test_unknown_key_has_line(self, tmp_path):
        with pytest.raises(ConfigError, match=r"run.ini:3: unknown key 'gama'"):
            cfg.parse_config(write(tmp_path, "[physics]\nu_inf = -2\ngama = 2\n"))

    def test_bad_number_has_line(self, tmp_path):
        with pytest.raises(ConfigError, match=r":5: \[grid\] N = 'many'"):
            cfg.parse_config(write(tmp_path, "[physics]\nu_inf = -2\n\n[grid]\nN = many\n"))

    def test_conflicting_keys(self, tmp_path):
        with pytest.raises(ConfigError, match="either phi_b or u_e"):
            cfg.parse_config(write(tmp_path, "[physics]\nu_e = 2\nphi_b = 0.1\n"))

    def test_unknown_section(self, tmp_path):
        with pytest.raises(ConfigError, match="unknown section"):
            cfg.parse_config(write(tmp_path, "[physic]\nm = 1\n"))

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="does not exist"):
            cfg.parse_config(tmp_path / "none.ini")

    @pytest.mark.parametrize("name", sorted(cfg.PRESETS))
    def test_resolved_config_roundtrip(self, name):
        loaded = cfg.load(preset=name)
        again = cfg.config_from_text(cfg.resolved_ini(loaded.sim), "resolved")
        assert again.sim == loaded.sim

    def test_presets_cover_all_regimes(self):
        tags = {name: classify(cfg.load(preset=name).sim.params).tag for name in
                ("trivial", "forbidden", "nondegenerate", "degenerate")}
        assert tags == {"trivial": RegimeTag.SUBSONIC, "forbidden": RegimeTag.FORBIDDEN_WINDOW,
                        "nondegenerate": RegimeTag.NONDEGENERATE, "degenerate": RegimeTag.DEGENERATE}

    def test_sweep_section(self, tmp_path):
        loaded = cfg.load(write(tmp_path, "[physics]\nu_inf = -2\n[sweep]\nparameter = phi_b\nvalues = 0.01, 0.02\n"))
        assert loaded.sweep.values == (0.01, 0.02) and loaded.sweep.command == "sheath"
        sim = cfg.with_value(loaded.sim, "phi_b", 0.02)
        assert math.log(sim.params.u_e / 2) == pytest.approx(0.02)


class TestCommands:
    def test_sheath_outputs(self, tmp_path):
        out = tmp_path / "s"
        assert cli.main(["sheath", "--preset", "nondegenerate", "--out", str(out)]) == 0
        for name in ("profile.csv", "regime.json", "decay.json", "config.ini", "profile.svg"):
            assert (out / name).is_file()
        regime = json.loads((out / "regime.json").read_text())
        assert regime["status"] == "Exists" and regime["regime"] == "Nondegenerate"
        assert cfg.parse_config(out / "config.ini") == cfg.load(preset="nondegenerate").sim

    def test_trivial(self, tmp_path):
        out = tmp_path / "t"
        assert cli.main(["sheath", "--preset", "trivial", "--out", str(out), "--svg", "off"]) == 0
        assert json.loads((out / "regime.json").read_text())["status"] == "TrivialOnly"
        assert json.loads((out / "decay.json").read_text())["decay"]["status"] == "TrivialOnly"
        assert not (out / "profile.svg").exists()

    def test_forbidden_exit_code(self, tmp_path, capsys):
        assert cli.main(["sheath", "--preset", "forbidden", "--out", str(tmp_path / "f")]) == 2
        assert "does not admit any" in capsys.readouterr().err

    def test_degenerate_envelope_report(self, tmp_path):
        out = tmp_path / "d"
        assert cli.main(["sheath", "--preset", "degenerate", "--out", str(out), "--svg", "off"]) == 0
        decay = json.loads((out / "decay.json").read_text())["decay"]
        assert decay["kind"] == "algebraic" and len(decay["sup_defects"]) == 4
        assert set(decay["defects_by_U"]) == {"-phi", "n-1", "log n", "u/u_inf-1", "(T/T_inf-1)/gamma"}

    def test_usage_errors(self, tmp_path, capsys):
        assert cli.main(["sheath", "--config", str(tmp_path / "missing.ini"), "--out", str(tmp_path)]) == 1
        with pytest.raises(SystemExit) as info:
            cli.main(["sheath", "--preset", "nope", "--out", str(tmp_path)])
        assert info.value.code == 1
        with pytest.raises(SystemExit) as info:
            cli.main([])
        assert info.value.code == 1
        bad = write(tmp_path, "[physics]\ngamma = 0.9\n")
        assert cli.main(["check", "--config", str(bad)]) == 1
        assert "gamma > 1" in capsys.readouterr().err

    def test_check(self, capsys):
        assert cli.main(["check", "--preset", "degenerate"]) == 0
        assert "# regime: Degenerate" in capsys.readouterr().out
        assert cli.main(["check", "--preset", "forbidden"]) == 2

    def test_evolve_zero_perturbation(self, tmp_path):
        path = write(tmp_path, SMALL_RUN.format(amp=0, comp="v, u, T"))
        outs = [tmp_path / "a", tmp_path / "b"]
        for out in outs:
            assert cli.main(["evolve", "--config", str(path), "--out", str(out)]) == 0
        fit = json.loads((outs[0] / "fit.json").read_text())
        assert fit["status"] == "DegenerateFit"
        for name in ("diagnostics.csv", "diagnostics.jsonl", "energy.svg", "profile.svg"):
            assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()
        assert b"\r" not in (outs[0] / "diagnostics.csv").read_bytes()

    def test_evolve_small_perturbation(self, tmp_path):
        path = write(tmp_path, SMALL_RUN.format(amp=1e-3, comp="v, u, T"))
        assert cli.main(["evolve", "--config", str(path), "--out", str(tmp_path / "o"), "--svg", "off"]) == 0
        fit = json.loads((tmp_path / "o" / "fit.json").read_text())
        assert fit["status"] == "ok" and fit["exponent"] < 0

    def test_evolve_abort_is_flushed(self, tmp_path, capsys):
        path = write(tmp_path, SMALL_RUN.format(amp=1.5, comp="u"))
        out = tmp_path / "x"
        assert cli.main(["evolve", "--config", str(path), "--out", str(out)]) == 3
        lines = (out / "diagnostics.csv").read_text().splitlines()
        assert len(lines) == 3 and lines[-1].startswith("# error:")
        assert json.loads((out / "fit.json").read_text())["error"] == "CharacteristicSignViolation"

    def test_evolve_needs_bohm_regime(self, tmp_path):
        assert cli.main(["evolve", "--preset", "trivial", "--out", str(tmp_path / "t")]) == 1
        assert cli.main(["evolve", "--preset", "forbidden", "--out", str(tmp_path / "f")]) == 2

    def test_seed_changes_random_mix(self, tmp_path):
        text = SMALL_RUN.format(amp=1e-3, comp="v, u, T").replace("[run]", "random_mix = true\n\n[run]")
        path = write(tmp_path, text)
        csv = []
        for seed in (1, 1, 2):
            out = tmp_path / f"seed{len(csv)}"
            assert cli.main(["evolve", "--config", str(path), "--out", str(out), "--svg", "off", "--seed", str(seed)]) == 0
            csv.append((out / "diagnostics.csv").read_bytes())
        assert csv[0] == csv[1] != csv[2]
        assert "seed = 2" in (tmp_path / "seed2" / "config.ini").read_text()

    def test_sweep_parallel_matches_serial(self, tmp_path):
        path = write(tmp_path, "[physics]\nu_inf = -2\n[grid]\nN = 512\n"
                               "[sweep]\nparameter = phi_b\nvalues = 0.02, 0.05, -0.3\n")
        assert cli.main(["sweep", "--config", str(path), "--out", str(tmp_path / "p"), "--workers", "2"]) == 0
        assert cli.main(["sweep", "--config", str(path), "--out", str(tmp_path / "s")]) == 0
        par = (tmp_path / "p" / "summary.csv").read_text()
        assert par == (tmp_path / "s" / "summary.csv").read_text()
        rows = par.splitlines()
        assert len(rows) == 4 and rows[3].split(",")[2] == "2"
        assert (tmp_path / "p" / "run_001" / "profile.csv").read_bytes() == (tmp_path / "s" / "run_001" / "profile.csv").read_bytes()

    def test_lambda0(self, tmp_path, capsys):
        assert cli.main(["lambda0", "--gamma", "2", "100", "--out", str(tmp_path)]) == 0
        rows = (tmp_path / "lambda0.csv").read_text().splitlines()
        assert rows[0] == "gamma,lambda0,residual" and len(rows) == 3
        assert "5.569315" in capsys.readouterr().out
