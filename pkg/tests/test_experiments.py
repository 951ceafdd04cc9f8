"""Config ingestion, presets, run/sweep orchestration, CLI."""

import hashlib
import json
import math

import numpy as np
import pytest

from kslab import cli
from kslab.diagnostics import mass
from kslab.errors import ValidationError
from kslab.experiments import (
    CSV_COLUMNS,
    InitialSpec,
    config_digest,
    config_from_dict,
    convergence_study,
    initial_data,
    parse_config,
    parse_sweep,
    run_experiment,
    run_sweep,
)
from kslab.solver import Grid


def base_dict(**overrides):
    data = {
        "label": "tiny",
        "horizon": 0.2,
        "cadence": 5,
        "sensitivity": {"K": 0.5, "k": 1.0, "a": 0.0},
        "grid": {"dim": 2, "extents": [1.0, 1.0], "cells": [16, 16]},
        "initial": {"preset": "gaussian-bump", "mass": 4.0, "width": 0.2, "v0": 1.0},
        "solver": {"dt_max": 0.01},
    }
    data.update(overrides)
    return data


class TestConfigParsing:
    def test_defaults_applied(self):
        cfg = config_from_dict(base_dict())
        assert cfg.cadence == 5
        assert cfg.n_effective == 2
        assert cfg.c_tol == 10.0
        assert cfg.solver.cfl_adv == 0.25
        assert cfg.solver.flux_scheme == "upwind"
        assert cfg.solver.cg_tol == 1e-10
        echoed = cfg.to_dict()
        assert echoed["solver"]["dt_min"] == 1e-12
        assert echoed["initial"]["preset"] == "gaussian-bump"

    def test_unknown_key_named(self):
        data = base_dict()
        data["sensitivity"]["chi_exponent"] = 2.0
        with pytest.raises(ValidationError, match="chi_exponent"):
            config_from_dict(data)

    def test_negative_K_cited(self):
        data = base_dict()
        data["sensitivity"]["K"] = -1.0
        with pytest.raises(ValidationError, match="K"):
            config_from_dict(data)

    def test_dt_min_beyond_horizon(self):
        data = base_dict()
        data["solver"]["dt_min"] = 1.0
        data["solver"]["dt_max"] = 2.0
        with pytest.raises(ValidationError, match="dt_min"):
            config_from_dict(data)

    def test_toml_and_json_files(self, tmp_path):
        toml_text = """
label = "filecfg"
horizon = 0.1
[sensitivity]
K = 0.5
[grid]
dim = 1
extents = [1.0]
cells = [16]
[initial]
preset = "uniform"
u = 1.0
v = 1.0
[solver]
dt_max = 0.01
"""
        p = tmp_path / "cfg.toml"
        p.write_text(toml_text)
        cfg = parse_config(p)
        assert cfg.label == "filecfg" and cfg.grid.dim == 1

        jp = tmp_path / "cfg.json"
        jp.write_text(json.dumps(base_dict()))
        cfg2 = parse_config(jp)
        assert cfg2.label == "tiny"

        bad = tmp_path / "cfg.yaml"
        bad.write_text("x: 1")
        with pytest.raises(ValidationError, match="extension"):
            parse_config(bad)

    def test_digest_matches_independent_rehash(self):
        cfg = config_from_dict(base_dict())
        text = json.dumps(cfg.to_dict(), sort_keys=True, separators=(",", ":"))
        assert config_digest(cfg) == hashlib.sha256(text.encode()).hexdigest()


class TestInitialData:
    grid = Grid(dim=2, extents=(1.0, 1.0), cells=(16, 16))

    def test_uniform(self):
        u, v = initial_data(
            InitialSpec("uniform", {"u": 1.0, "v": 2.0}), self.grid, a=1.0
        )
        assert np.all(u == 1.0) and np.all(v == 2.0)

    def test_gaussian_mass_renormalized(self):
        spec = InitialSpec(
            "gaussian-bump", {"mass": 4 * math.pi, "width": 0.15, "v0": 1.0, "center": None}
        )
        u, v = initial_data(spec, self.grid, a=0.0)
        assert mass(u, self.grid) == pytest.approx(4 * math.pi, abs=1e-10)
        assert np.all(v == 1.0)

    def test_two_bumps_mass(self):
        spec = InitialSpec(
            "two-bumps", {"mass": 3.0, "width": 0.1, "v0": 0.5, "centers": None}
        )
        u, _ = initial_data(spec, self.grid, a=1.0)
        assert mass(u, self.grid) == pytest.approx(3.0, abs=1e-10)

    def test_checker_pattern(self):
        spec = InitialSpec(
            "checker", {"u_hi": 2.0, "u_lo": 0.0, "blocks": 4, "v0": 1.0}
        )
        u, _ = initial_data(spec, self.grid, a=1.0)
        assert set(np.unique(u)) == {0.0, 2.0}

    def test_singular_case_rejects_zero_signal_floor(self):
        spec = InitialSpec("checker", {"u_hi": 1.0, "u_lo": 0.0, "blocks": 2, "v0": 0.0})
        with pytest.raises(ValidationError, match="positive"):
            initial_data(spec, self.grid, a=0.0)

    def test_eigenmode_positivity_guard(self):
        spec = InitialSpec(
            "eigenmode", {"mean": 1.0, "amplitude": 1.5, "modes": [1, 1], "v0": 1.0}
        )
        with pytest.raises(ValidationError):
            initial_data(spec, self.grid, a=1.0)


class TestRunExperiment:
    def test_artifacts_and_summary(self, tmp_path):
        cfg = config_from_dict(base_dict())
        report = run_experiment(cfg, out_dir=tmp_path / "run")
        assert report.status == "completed"
        cert = json.loads((tmp_path / "run" / "certificate.json").read_text())
        assert cert["admissible"] is True and cert["branch"] == "k=1"
        csv_lines = (tmp_path / "run" / "monitors.csv").read_text().strip().splitlines()
        assert csv_lines[0] == ",".join(CSV_COLUMNS)
        assert len(csv_lines) == 1 + len(report.samples)
        summary = json.loads((tmp_path / "run" / "summary.json").read_text())
        assert summary["status"] == "completed"
        assert summary["config_hash"] == config_digest(cfg)
        assert summary["margins"]["min_v_margin"] > 0.0
        assert summary["extrema"]["mass_rel_drift_max"] <= 1e-12
        assert summary["threads"] == 1

    def test_csv_floats_round_trip(self, tmp_path):
        cfg = config_from_dict(base_dict())
        report = run_experiment(cfg, out_dir=tmp_path / "run")
        lines = (tmp_path / "run" / "monitors.csv").read_text().strip().splitlines()
        first = lines[1].split(",")
        sample = report.samples[0]
        for col, cell in zip(CSV_COLUMNS, first):
            want = getattr(sample, col)
            got = float(cell)
            assert (math.isnan(want) and math.isnan(got)) or got == want

    def test_deterministic_summary_modulo_timing(self, tmp_path):
        cfg = config_from_dict(base_dict())
        run_experiment(cfg, out_dir=tmp_path / "a")
        run_experiment(cfg, out_dir=tmp_path / "b")
        sa = json.loads((tmp_path / "a" / "summary.json").read_text())
        sb = json.loads((tmp_path / "b" / "summary.json").read_text())
        sa.pop("timing")
        sb.pop("timing")
        assert json.dumps(sa, sort_keys=True) == json.dumps(sb, sort_keys=True)
        ca = (tmp_path / "a" / "monitors.csv").read_bytes()
        cb = (tmp_path / "b" / "monitors.csv").read_bytes()
        assert ca == cb

    def test_kgt1_energy_pinched_by_weight_floor(self, tmp_path):
        # admissible k > 1 certificate: the weighted functional stays between
        # C_phi * ||u||_p^p and ||u||_p^p at every sample
        from kslab.sensitivity import phi_floor

        data = base_dict(label="kgt1", horizon=0.3)
        data["sensitivity"] = {"K": 1.0, "k": 2.0, "a": 1.0}
        cfg = config_from_dict(data)
        report = run_experiment(cfg, out_dir=tmp_path / "kgt1")
        cert = json.loads((tmp_path / "kgt1" / "certificate.json").read_text())
        assert cert["admissible"] and cert["branch"] == "k>1"
        from kslab.sensitivity import EnergyParams, SensitivityParams

        ep = EnergyParams(p=cert["p"], r=cert["r0"], eps=cert["eps"], eta=cert["eta"])
        floor = phi_floor(ep, SensitivityParams(K=1.0, k=2.0, a=1.0))
        for s in report.samples:
            assert floor * s.lp_u ** ep.p - 1e-9 <= s.energy <= s.lp_u ** ep.p + 1e-9

    def test_one_dimensional_run_flagged_outside_scope(self, tmp_path):
        data = {
            "label": "line",
            "horizon": 0.1,
            "sensitivity": {"K": 0.5, "k": 1.0, "a": 0.0},
            "grid": {"dim": 1, "extents": [1.0], "cells": [32]},
            "initial": {"preset": "uniform", "u": 1.0, "v": 1.0},
            "solver": {"dt_max": 0.01},
        }
        cfg = config_from_dict(data)
        assert cfg.n_effective == 1
        run_experiment(cfg, out_dir=tmp_path / "line")
        cert = json.loads((tmp_path / "line" / "certificate.json").read_text())
        assert any("outside theorem scope" in note for note in cert["notes"])

    def test_trivial_certificate_note_for_K_zero(self, tmp_path):
        data = base_dict()
        data["sensitivity"]["K"] = 0.0
        data["initial"] = {"preset": "uniform", "u": 1.0, "v": 1.0}
        cfg = config_from_dict(data)
        report = run_experiment(cfg, out_dir=tmp_path / "k0")
        assert report.status == "completed"
        summary = json.loads((tmp_path / "k0" / "summary.json").read_text())
        assert "trivially admissible (K=0)" in summary["certificate"]["notes"]

    def test_K_zero_heat_run_energy_monotone(self, tmp_path):
        # diffusion-only run: the weighted functional decays (density
        # flattens, signal rises into the decreasing weight) and the
        # residual stays within its tolerance at every interior sample
        data = base_dict(label="k0heat", horizon=1.0, cadence=2)
        data["sensitivity"]["K"] = 0.0
        cfg = config_from_dict(data)
        report = run_experiment(cfg, out_dir=tmp_path / "k0heat")
        energies = [s.energy for s in report.samples]
        assert all(b <= a * (1 + 1e-12) for a, b in zip(energies, energies[1:]))
        h = cfg.grid.h[0]
        for s in report.samples:
            if not math.isnan(s.residual):
                assert s.residual <= 10.0 * (h * h + s.dt) * max(abs(s.energy), 1.0)


class TestSweep:
    def sweep_dict(self, **kw):
        data = {
            "base": base_dict(),
            "axes": [
                {"path": "sensitivity.K", "values": [0.95, 1.05]},
            ],
            "parallelism": 1,
        }
        data.update(kw)
        return data

    def test_margin_sign_change_across_threshold(self, tmp_path):
        spec_path = tmp_path / "sweep.json"
        spec_path.write_text(json.dumps(self.sweep_dict()))
        spec = parse_sweep(spec_path)
        index = run_sweep(spec, out_dir=tmp_path / "out")
        lines = index.read_text().strip().splitlines()
        assert lines[0].startswith("label,sensitivity.K,status,")
        assert len(lines) == 3
        margins = [float(line.split(",")[-1]) for line in lines[1:]]
        # sqrt(2/n) = 1 at n = 2: the sign flips across K = 1
        assert margins[0] > 0.0 > margins[1]

    def test_empty_axes_single_run(self, tmp_path):
        spec_path = tmp_path / "s.json"
        spec_path.write_text(json.dumps(self.sweep_dict(axes=[])))
        index = run_sweep(parse_sweep(spec_path), out_dir=tmp_path / "out")
        assert len(index.read_text().strip().splitlines()) == 2

    def test_duplicate_labels_rejected(self, tmp_path):
        spec_path = tmp_path / "s.json"
        spec_path.write_text(
            json.dumps(
                self.sweep_dict(
                    axes=[{"path": "sensitivity.K", "values": [0.5, 0.5]}]
                )
            )
        )
        with pytest.raises(ValidationError, match="duplicate"):
            run_sweep(parse_sweep(spec_path), out_dir=tmp_path / "out")

    def test_run_failures_recorded_not_fatal(self, tmp_path):
        # cg_max_iter = 1 cannot converge on non-uniform data: run errors out,
        # the sweep records it and continues
        data = self.sweep_dict(
            axes=[{"path": "solver.cg_max_iter", "values": [100000, 1]}]
        )
        spec_path = tmp_path / "s.json"
        spec_path.write_text(json.dumps(data))
        index = run_sweep(parse_sweep(spec_path), out_dir=tmp_path / "out")
        lines = index.read_text().strip().splitlines()
        assert len(lines) == 3
        statuses = [line.split(",")[2] for line in lines[1:]]
        assert statuses[0] == "completed"
        assert statuses[1] == "error"

    def test_unknown_axis_path(self, tmp_path):
        spec_path = tmp_path / "s.json"
        spec_path.write_text(
            json.dumps(self.sweep_dict(axes=[{"path": "solver.nope", "values": [1]}]))
        )
        with pytest.raises(ValidationError, match="nope"):
            run_sweep(parse_sweep(spec_path), out_dir=tmp_path / "out")

    def test_parallel_matches_serial(self, tmp_path):
        data = self.sweep_dict(
            axes=[{"path": "sensitivity.K", "values": [0.3, 0.6]}], parallelism=2
        )
        spec_path = tmp_path / "s.json"
        spec_path.write_text(json.dumps(data))
        idx_par = run_sweep(parse_sweep(spec_path), out_dir=tmp_path / "par")
        data["parallelism"] = 1
        spec_path.write_text(json.dumps(data))
        idx_ser = run_sweep(parse_sweep(spec_path), out_dir=tmp_path / "ser")
        assert idx_par.read_text() == idx_ser.read_text()


class TestConvergenceStudy:
    def heat_config(self):
        return config_from_dict(
            {
                "label": "heat",
                "horizon": 0.05,
                "cadence": 1000000,
                "sensitivity": {"K": 0.0, "k": 1.0, "a": 1.0},
                "grid": {"dim": 1, "extents": [1.0], "cells": [16]},
                "initial": {"preset": "eigenmode", "mean": 1.0, "amplitude": 0.5, "v0": 1.0},
                "solver": {"dt_max": 2e-4},
            }
        )

    def test_levels_validation(self):
        with pytest.raises(ValidationError, match="3 levels"):
            convergence_study(self.heat_config(), 1)

    def test_requires_eigenmode(self):
        with pytest.raises(ValidationError, match="eigenmode"):
            convergence_study(config_from_dict(base_dict()), 3)

    def test_heat_second_order(self):
        report = convergence_study(self.heat_config(), 3)
        assert report.benchmark == "heat"
        assert report.monotone
        assert 1.9 <= report.observed_order <= 2.1


class TestCli:
    def test_check_emits_certificate(self, capsys):
        code = cli.main(
            ["check", "--K", "0.5", "--n", "2", "--eta", "0.7"]
        )
        assert code == 0
        doc = json.loads(capsys.readouterr().out)
        assert doc["admissible"] is True and doc["margin"] == pytest.approx(0.5)

    def test_check_with_computed_eta(self, capsys):
        code = cli.main(
            ["check", "--K", "0.5", "--n", "2", "--v0-min", "1.0", "--mass", "1.0", "--c0", "1.0"]
        )
        assert code == 0
        doc = json.loads(capsys.readouterr().out)
        assert doc["eta"] == pytest.approx((3 - math.sqrt(5)) / 2, abs=1e-6)

    def test_eta_subcommand(self, capsys):
        code = cli.main(["eta", "--v0-min", "1.0", "--mass", "1.0", "--c0", "1.0"])
        assert code == 0
        doc = json.loads(capsys.readouterr().out)
        assert doc["mode"] == "general-c0"
        code = cli.main(
            ["eta", "--v0-min", "1.0", "--mass", "1.0", "--diam", "1.4142", "--n", "2"]
        )
        assert code == 0
        assert json.loads(capsys.readouterr().out)["mode"] == "convex-explicit"

    def test_simulate_blow_up_exit_code(self, tmp_path, capsys):
        # grossly supercritical amplitude: the CFL step underflows dt_min
        data = base_dict(label="hot")
        data["sensitivity"]["K"] = 1e9
        data["solver"]["dt_min"] = 1e-4
        cfg_path = tmp_path / "hot.json"
        cfg_path.write_text(json.dumps(data))
        code = cli.main(["simulate", str(cfg_path), "--out", str(tmp_path / "hot")])
        assert code == 3
        summary = json.loads((tmp_path / "hot" / "summary.json").read_text())
        assert summary["status"] == "blow-up-suspected"

    def test_validation_exit_code(self, capsys):
        assert cli.main(["check", "--K", "0.5", "--n", "2"]) == 1
        assert cli.main(["eta", "--v0-min", "1.0", "--mass", "1.0"]) == 1

    def test_simulate_and_exit_codes(self, tmp_path, capsys):
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps(base_dict()))
        code = cli.main(
            ["simulate", str(cfg_path), "--out", str(tmp_path / "out"), "--cadence", "10"]
        )
        assert code == 0
        assert (tmp_path / "out" / "summary.json").exists()

    def test_converge_csv_output(self, tmp_path, capsys):
        cfg_path = tmp_path / "heat.json"
        cfg_path.write_text(
            json.dumps(
                {
                    "label": "heat",
                    "horizon": 0.05,
                    "sensitivity": {"K": 0.0, "k": 1.0, "a": 1.0},
                    "grid": {"dim": 1, "extents": [1.0], "cells": [16]},
                    "initial": {"preset": "eigenmode", "mean": 1.0, "amplitude": 0.5, "v0": 1.0},
                    "solver": {"dt_max": 2e-4},
                }
            )
        )
        code = cli.main(["converge", str(cfg_path), "--levels", "3", "--format", "csv"])
        assert code == 0
        out = capsys.readouterr().out.strip().splitlines()
        assert out[0] == "cells,error,order"
        assert len(out) == 4

    def test_sweep_subcommand(self, tmp_path, capsys):
        spec = {
            "base": base_dict(),
            "axes": [{"path": "sensitivity.K", "values": [0.4, 0.8]}],
            "parallelism": 1,
        }
        spec_path = tmp_path / "sweep.json"
        spec_path.write_text(json.dumps(spec))
        code = cli.main(["sweep", str(spec_path), "--out", str(tmp_path / "sw")])
        assert code == 0
        assert (tmp_path / "sw" / "index.csv").exists()
