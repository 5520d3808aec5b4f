"""Command-line interface tests: exit codes, outputs, determinism."""

import json

import pytest

from uclab.cli import build_parser, load_config, main


def write_cfg(tmp_path, payload, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(payload))
    return str(path)


class TestConfig:
    def test_flat_keys_map_to_dataclasses(self, tmp_path):
        path = write_cfg(tmp_path, {
            "model.d": 2, "model.delta": 0.2, "model.G": 1.0,
            "free.K2": 2.0, "seeds": [3, 4],
        })
        cfg = load_config(path, {})
        assert cfg.model.d == 2 and cfg.model.delta == 0.2
        assert cfg.free.K2 == 2.0 and cfg.seeds == (3, 4)

    def test_flags_win_over_file(self, tmp_path):
        path = write_cfg(tmp_path, {"seeds": [3, 4]})
        cfg = load_config(path, {"seeds": (9,)})
        assert cfg.seeds == (9,)

    def test_unknown_key_rejected(self, tmp_path):
        path = write_cfg(tmp_path, {"model.bogus": 1})
        with pytest.raises(KeyError):
            load_config(path, {})
        path2 = write_cfg(tmp_path, {"bogus_top": 1}, "b.json")
        with pytest.raises(KeyError):
            load_config(path2, {})

    def test_validation_catches_geometry(self, tmp_path):
        path = write_cfg(tmp_path, {"model.delta": 0.6})
        cfg = load_config(path, {})
        assert any("delta" in p for p in cfg.validate())
        path2 = write_cfg(tmp_path, {"model.L": 4.0}, "c.json")
        cfg2 = load_config(path2, {})
        assert any("odd" in p for p in cfg2.validate())


class TestExitCodes:
    def test_unknown_flag_exits_two(self):
        with pytest.raises(SystemExit) as exc:
            main(["constants", "--frobnicate"])
        assert exc.value.code == 2

    def test_unknown_command_exits_two(self):
        with pytest.raises(SystemExit) as exc:
            main(["not-a-command"])
        assert exc.value.code == 2

    def test_bad_config_exits_two(self, tmp_path):
        path = write_cfg(tmp_path, {"model.delta": 0.9})
        assert main(["verify", "--config", path, "--out", str(tmp_path / "o")]) == 2

    def test_inadmissible_constants_report_is_success(self, tmp_path):
        path = write_cfg(tmp_path, {"model.theta2": 1.0})
        out = tmp_path / "out"
        assert main(["constants", "--config", path, "--out", str(out)]) == 0
        rep = json.loads((out / "report.json").read_text())
        assert rep["report"]["admissible"] is False
        assert rep["report"]["epsilon"] < 0

    def test_inadmissible_verify_needs_opt_in(self, tmp_path):
        path = write_cfg(tmp_path, {"model.theta2": 1.0})
        assert main(["verify", "--config", path, "--out", str(tmp_path / "o")]) == 2


class TestCommands:
    def test_constants_report_embeds_config(self, tmp_path):
        path = write_cfg(tmp_path, {"model.d": 1, "model.delta": 0.25})
        out = tmp_path / "out"
        assert main(["constants", "--config", path, "--out", str(out)]) == 0
        rep = json.loads((out / "report.json").read_text())
        assert rep["config"]["model.delta"] == 0.25
        assert rep["report"]["T"] == 39
        assert rep["report"]["epsilon"] == 1.0

    def test_verify_writes_records_and_passes(self, tmp_path):
        path = write_cfg(tmp_path, {
            "ds": [1], "norm_Vs": [0.0], "bcs": ["dirichlet"],
            "L_over_Gs": [3], "deltas_over_G": [0.25], "seeds": [0, 1],
            "h_per_G": 16,
        })
        out = tmp_path / "out"
        assert main(["verify", "--config", path, "--out", str(out)]) == 0
        lines = (out / "records.jsonl").read_text().splitlines()
        assert len(lines) == 1 + 4  # header + 2 seeds x 2 paths
        assert (out / "summary.csv").exists()
        rep = json.loads((out / "report.json").read_text())
        assert rep["min_margin"] > 0

    def test_verify_deterministic_after_header(self, tmp_path):
        path = write_cfg(tmp_path, {
            "ds": [1], "norm_Vs": [1.0], "bcs": ["periodic"],
            "L_over_Gs": [3], "deltas_over_G": [0.125], "seeds": [0],
            "h_per_G": 16,
        })
        out1, out2 = tmp_path / "a", tmp_path / "b"
        assert main(["verify", "--config", path, "--out", str(out1)]) == 0
        assert main(["verify", "--config", path, "--out", str(out2)]) == 0
        body1 = (out1 / "records.jsonl").read_text().splitlines()[1:]
        body2 = (out2 / "records.jsonl").read_text().splitlines()[1:]
        assert body1 == body2
        assert (out1 / "report.json").read_bytes() == (out2 / "report.json").read_bytes()

    def test_sweep_with_plot_data(self, tmp_path):
        path = write_cfg(tmp_path, {
            "ds": [1], "model.L": 3.0, "h_per_G": 128,
            "deltas_over_G": [0.125, 0.175, 0.25, 0.35, 0.45],
            "seeds": [0, 1, 2],
        })
        out = tmp_path / "out"
        assert main(["sweep", "--config", path, "--out", str(out),
                     "--emit-plot-data"]) == 0
        assert (out / "plot.csv").read_text().startswith("delta,ratio,log_bound")
        rep = json.loads((out / "report.json").read_text())
        assert abs(rep["slope"] - 1.0) < 0.05

    def test_weight_command(self, tmp_path):
        out = tmp_path / "out"
        assert main(["weight", "--out", str(out)]) == 0
        assert (out / "summary.csv").read_text().startswith("r,phi")

    def test_carleman_check_command(self, tmp_path):
        path = write_cfg(tmp_path, {"trials": 2, "ds": [1],
                                    "grids": [1 / 64, 1 / 128]})
        out = tmp_path / "out"
        assert main(["carleman-check", "--config", path, "--out", str(out)]) == 0
        rows = (out / "summary.csv").read_text().splitlines()
        assert rows[0] == "h,worst_ratio,allowed"
        assert len(rows) == 3

    def test_cacciopoli_check_command(self, tmp_path):
        out = tmp_path / "out"
        path = write_cfg(tmp_path, {"h_per_G": 64})
        assert main(["cacciopoli-check", "--config", path,
                     "--out", str(out)]) == 0

    def test_extend_check_command(self, tmp_path):
        path = write_cfg(tmp_path, {"ds": [2], "seeds": [0, 1], "h_per_G": 16})
        out = tmp_path / "out"
        assert main(["extend-check", "--config", path, "--out", str(out)]) == 0

    def test_h_flag_overrides_grid(self, tmp_path):
        path = write_cfg(tmp_path, {"ds": [1], "seeds": [0], "h_per_G": 16})
        out = tmp_path / "out"
        assert main(["verify", "--config", path, "--out", str(out),
                     "--h", "0.125"]) == 0
        rep = json.loads((out / "report.json").read_text())
        assert rep["config"]["h_per_G"] == 8

    def test_parser_lists_all_subcommands(self):
        parser = build_parser()
        subactions = [
            a for a in parser._actions if hasattr(a, "choices") and a.choices
        ]
        names = set(subactions[0].choices)
        assert names == {
            "constants", "verify", "sweep", "carleman-check",
            "cacciopoli-check", "extend-check", "weight",
        }


class TestFieldFileFlag:
    def test_extend_check_consumes_saved_field(self, tmp_path):
        import numpy as np

        from uclab.fields import save_field, synthesize_dir_cross_field
        from uclab.geometry import CubeDomain

        dom = CubeDomain(2, 3.0, 1 / 16, "dirichlet")
        fld = synthesize_dir_cross_field(3, dom, 1.4)
        ff = tmp_path / "field.npz"
        save_field(ff, fld)
        cfg = write_cfg(tmp_path, {"seeds": [0]})
        out = tmp_path / "out"
        assert main(["extend-check", "--config", cfg, "--out", str(out),
                     "--field-file", str(ff)]) == 0

    def test_verify_dump_eigenpairs(self, tmp_path):
        cfg = write_cfg(tmp_path, {"ds": [1], "seeds": [0], "h_per_G": 16})
        out = tmp_path / "out"
        assert main(["verify", "--config", cfg, "--out", str(out),
                     "--dump-eigenpairs"]) == 0
        dumped = sorted((out / "eigenpairs").iterdir())
        assert any(p.suffix == ".csv" for p in dumped)
        assert any(p.suffix == ".npy" for p in dumped)


class TestCarlemanFlags:
    def test_pinned_weight_parameters(self, tmp_path):
        out = tmp_path / "out"
        assert main([
            "carleman-check", "--out", str(out), "--d", "1",
            "--grid", "0.015625", "--rho", "1.0", "--mu", "0.08",
            "--alpha-mult", "1.2", "--trials", "2", "--seed", "5",
        ]) == 0
        body = (out / "records.jsonl").read_text().splitlines()[1:]
        rows = [json.loads(ln) for ln in body]
        assert all(r["rho"] == 1.0 and r["mu"] == 0.08 for r in rows)
        assert all(abs(r["alpha"] / r["alpha0"] - 1.2) < 1e-12 for r in rows)
