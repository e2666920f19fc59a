"""Disk formats, config resolution, manifests, and the command line."""

import json
from fractions import Fraction

import numpy as np
import pytest

from nswave import (
    GridSpec,
    SolverConfig,
    SpectralField,
    evolve,
    read_field,
    taylor_green,
    write_diagnostics_csv,
    write_field,
)
from nswave import operators as ops
from nswave.cli import main
from nswave.config import (
    RunManifest,
    config_from_file,
    parse_config_text,
    resolve_config,
)
from nswave.fieldio import read_diagnostics_csv

TWO_PI = 2.0 * np.pi


class TestFieldFiles:
    def test_roundtrip_is_bit_exact(self, tmp_path):
        grid = GridSpec(2, (16, 12), (TWO_PI, 1.5 * TWO_PI), dealias_fraction=0.5)
        f = ops.random_div_free(grid, seed=3, max_mode=4)
        path = tmp_path / "field.f64"
        write_field(path, f)
        g, speed = read_field(path)
        assert speed is None
        assert g.grid.points_per_axis == grid.points_per_axis
        assert g.grid.period_per_axis == grid.period_per_axis
        assert g.grid.dealias_fraction == grid.dealias_fraction
        assert g.real_space == f.real_space
        assert np.array_equal(g.coeffs, f.coeffs)

    def test_profile_speed_tag(self, tmp_path):
        grid = GridSpec.cube(8, TWO_PI, dim=2)
        h = ops.random_div_free(grid, seed=1, max_mode=2, components=2)
        path = tmp_path / "profile.f64"
        write_field(path, h, wave_speed=Fraction(1, 2))
        _, speed = read_field(path)
        assert speed == Fraction(1, 2)

    def test_complex_scalar_roundtrip(self, tmp_path):
        from nswave import random_scalar_field

        grid = GridSpec.cube(8, TWO_PI, dim=2, dealias_fraction=0.5)
        f = random_scalar_field(grid, seed=2)
        path = tmp_path / "scalar.f64"
        write_field(path, f)
        g, _ = read_field(path)
        assert not g.real_space
        assert np.array_equal(g.coeffs, f.coeffs)


class TestDiagnosticsFiles:
    def _traj(self):
        grid = GridSpec.cube(16, TWO_PI, dim=2)
        return evolve(taylor_green(grid), SolverConfig(dt=1e-2, t_final=0.05))

    def test_roundtrip_and_byte_stability(self, tmp_path):
        traj = self._traj()
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        write_diagnostics_csv(a, traj)
        write_diagnostics_csv(b, traj.diagnostics)
        assert a.read_bytes() == b.read_bytes()
        table = read_diagnostics_csv(a)
        ts = np.array([row.t for row in traj.diagnostics])
        es = np.array([row.energy for row in traj.diagnostics])
        assert np.array_equal(table["t"], ts)
        assert np.array_equal(table["energy"], es)

    def test_rows_must_carry_the_standard_norms(self, tmp_path):
        grid = GridSpec.cube(16, TWO_PI, dim=2)
        traj = evolve(taylor_green(grid),
                      SolverConfig(dt=1e-2, t_final=0.03, p_set=(6.0,)))
        with pytest.raises(ValueError):
            write_diagnostics_csv(tmp_path / "bad.csv", traj)


class TestConfigParsing:
    def test_comments_and_blanks_ignored(self):
        raw = parse_config_text(
            "# header\n\nrun.dt = 0.01  # trailing\ngrid.points = 16, 16\n")
        assert raw == {"run.dt": "0.01", "grid.points": "16, 16"}

    def test_duplicate_key_rejected(self):
        with pytest.raises(ValueError):
            parse_config_text("a = 1\na = 2\n")

    def test_malformed_line_rejected(self):
        with pytest.raises(ValueError):
            parse_config_text("just some words\n")

    def test_defaults_materialized(self):
        cfg = resolve_config("simulate2d")
        assert cfg["ic.kind"] == "random"
        assert isinstance(cfg["run.dt"], float)
        assert isinstance(cfg["grid.points"], tuple)

    def test_unknown_key_named_in_error(self):
        with pytest.raises(ValueError, match="run.bogus"):
            resolve_config("simulate2d", {"run.bogus": "1"})

    def test_unknown_subcommand(self):
        with pytest.raises(ValueError):
            resolve_config("simulate9d")

    def test_typed_coercions(self):
        cfg = resolve_config("picard", {"wave.c": "1/2",
                                        "grid.points": "16 16 16"})
        assert cfg["wave.c"] == Fraction(1, 2)
        assert cfg["grid.points"] == (16, 16, 16)

    def test_inexact_float_speed_rejected(self):
        with pytest.raises(ValueError):
            resolve_config("picard", {"wave.c": 0.3333333})


class TestConfigFiles:
    def test_text_config(self, tmp_path):
        p = tmp_path / "run.cfg"
        p.write_text("run.dt = 0.005\nic.amplitude = 0.25\n")
        cfg = config_from_file("simulate2d", p)
        assert cfg["run.dt"] == 0.005
        assert cfg["ic.amplitude"] == 0.25

    def test_manifest_reuse(self, tmp_path):
        cfg = resolve_config("simulate2d", {"run.dt": "0.004"})
        man = RunManifest(tmp_path / "manifest.json", "simulate2d", cfg,
                          seed=5, threads=1, version="0.1.0")
        man.start()
        man.finalize("passed", [("demo", True, 1.0)], ["diagnostics.csv"])
        again = config_from_file("simulate2d", tmp_path / "manifest.json")
        assert again == cfg

    def test_manifest_subcommand_mismatch(self, tmp_path):
        cfg = resolve_config("heatdecay")
        man = RunManifest(tmp_path / "manifest.json", "heatdecay", cfg,
                          seed=0, threads=1, version="0.1.0")
        man.start()
        with pytest.raises(ValueError):
            config_from_file("simulate2d", tmp_path / "manifest.json")


class TestManifestLifecycle:
    def test_start_then_finalize(self, tmp_path):
        path = tmp_path / "m.json"
        man = RunManifest(path, "heatdecay", resolve_config("heatdecay"),
                          seed=1, threads=2, version="0.1.0")
        man.start()
        doc = json.loads(path.read_text())
        assert doc["status"] == "running"
        assert doc["seed"] == 1 and doc["threads"] == 2
        man.finalize("failed", [("x", False, float("inf"))], ["out.csv"])
        doc = json.loads(path.read_text())
        assert doc["status"] == "failed"
        assert doc["checks"] == [{"name": "x", "passed": False, "value": "inf"}]
        assert doc["outputs"] == ["out.csv"]
        assert not path.with_suffix(".tmp").exists()


class TestCommandLine:
    def test_heatdecay_run(self, tmp_path, capsys):
        out = tmp_path / "heat"
        code = main(["heatdecay", "--out", str(out)])
        assert code == 0
        doc = json.loads((out / "manifest.json").read_text())
        assert doc["status"] == "passed"
        summary = (out / "summary.txt").read_text()
        assert "PASS" in summary and "FAIL" not in summary
        assert "PASS" in capsys.readouterr().out

    def test_vortex_run_checks_closed_form(self, tmp_path):
        cfgfile = tmp_path / "run.cfg"
        cfgfile.write_text("grid.points = 32\nrun.dt = 0.002\n"
                           "run.t_final = 0.02\nic.kind = taylor-green\n")
        out = tmp_path / "tg"
        code = main(["simulate2d", "--config", str(cfgfile),
                     "--out", str(out)])
        assert code == 0
        doc = json.loads((out / "manifest.json").read_text())
        names = {c["name"] for c in doc["checks"]}
        assert "closed_form_error" in names
        assert all(c["passed"] for c in doc["checks"])
        assert (out / "diagnostics.csv").exists()

    def test_bad_config_key_is_a_usage_error(self, tmp_path, capsys):
        cfgfile = tmp_path / "run.cfg"
        cfgfile.write_text("run.bogus = 1\n")
        out = tmp_path / "broken"
        code = main(["simulate2d", "--config", str(cfgfile),
                     "--out", str(out)])
        assert code == 2
        # Rejected before any run state exists.
        assert not (out / "manifest.json").exists()
        assert "run.bogus" in capsys.readouterr().err

    def test_runner_failure_writes_error_report(self, tmp_path):
        cfgfile = tmp_path / "run.cfg"
        cfgfile.write_text("grid.points = 16\nrun.dt = 0.5\n"
                           "run.t_final = 1.0\nic.kind = taylor-green\n")
        out = tmp_path / "blowup"
        code = main(["simulate2d", "--config", str(cfgfile),
                     "--out", str(out)])
        assert code == 2
        assert "CFL" in (out / "error.txt").read_text()
        doc = json.loads((out / "manifest.json").read_text())
        assert doc["status"] == "error"

    def test_manifest_reproduces_bitwise(self, tmp_path):
        cfgfile = tmp_path / "run.cfg"
        cfgfile.write_text(
            "grid.points = 12\nrun.dt = 0.005\nrun.t_final = 0.03\n"
            "ic.kind = random\nic.amplitude = 0.2\nic.max_mode = 2\n"
            "run.snapshot_stride = 3\n")
        first = tmp_path / "r1"
        assert main(["simulate3d", "--config", str(cfgfile), "--seed", "9",
                     "--out", str(first)]) == 0
        second = tmp_path / "r2"
        assert main(["simulate3d", "--config", str(first / "manifest.json"),
                     "--out", str(second)]) == 0
        assert (first / "diagnostics.csv").read_bytes() \
            == (second / "diagnostics.csv").read_bytes()
        s1 = sorted((first / "snapshots").glob("*.f64"))
        s2 = sorted((second / "snapshots").glob("*.f64"))
        assert [p.name for p in s1] == [p.name for p in s2]
        assert s1[-1].read_bytes() == s2[-1].read_bytes()
        doc2 = json.loads((second / "manifest.json").read_text())
        assert doc2["seed"] == 9
