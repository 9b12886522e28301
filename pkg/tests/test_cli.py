import csv
import json
import math

import pytest

from pooltrace import (
    ModelParams,
    PenaltyWeights,
    build_cost_table_from_prior,
    build_truncated_prior,
    optimal_design,
    paired_designs,
)
from pooltrace.cli import (
    CSV_COLUMNS,
    ExperimentConfig,
    format_real,
    main,
    parse_config,
    preset_points,
)


def run_cli(args, capsys):
    status = main(args)
    captured = capsys.readouterr()
    return status, captured.out, captured.err


class TestDesignCommand:
    def test_single_contact(self, capsys):
        status, out, _ = run_cli(
            ["design", "--n", "1", "--r", "2.5", "--k", "0.1", "--se", "0.95", "--sp", "0.95"],
            capsys,
        )
        assert status == 0
        assert "pools: 1\n" in out
        assert "expected tests: 1\n" in out

    def test_clean_population_single_pool(self, capsys):
        status, out, _ = run_cli(
            ["design", "--n", "20", "--r", "0", "--k", "0.1", "--se", "1", "--sp", "1"],
            capsys,
        )
        assert status == 0
        assert "pools: 20\n" in out
        assert "expected tests: 1\n" in out

    def test_output_matches_library_serialization(self, capsys):
        status, out, _ = run_cli(
            ["design", "--n", "20", "--r", "2.5", "--k", "0.1", "--se", "0.95", "--sp", "0.95"],
            capsys,
        )
        assert status == 0
        params = ModelParams(n=20, r=2.5, k=0.1, s_e=0.95, s_p=0.95)
        prior = build_truncated_prior(params.negbin(), 20)
        table = build_cost_table_from_prior(prior, params.tc(), PenaltyWeights())
        design = optimal_design(table)
        tests = sum(table.tests[s] for s in design.sizes)
        fneg = sum(table.fneg[s] for s in design.sizes)
        fpos = sum(table.fpos[s] for s in design.sizes)
        expected = (
            "ours:\n"
            f"  pools: {' '.join(str(s) for s in design.sizes)}\n"
            f"  expected tests: {tests:.6g}\n"
            f"  expected false negatives: {fneg:.6g}\n"
            f"  expected false positives: {fpos:.6g}\n"
            f"  objective: {design.objective_value:.6g}\n"
        )
        assert out == expected

    def test_json_round_trips_library_values(self, capsys):
        status, out, _ = run_cli(
            ["design", "--n", "15", "--r", "2.5", "--k", "0.1", "--se", "0.95", "--sp", "0.95",
             "--compare", "--format", "json"],
            capsys,
        )
        assert status == 0
        payload = json.loads(out)
        assert [entry["method"] for entry in payload] == ["ours", "baseline"]
        ours, baseline, _ = paired_designs(
            ModelParams(n=15, r=2.5, k=0.1, s_e=0.95, s_p=0.95), PenaltyWeights()
        )
        assert payload[0]["pools"] == list(ours.sizes)
        assert payload[1]["pools"] == list(baseline.sizes)
        assert payload[0]["objective"] == pytest.approx(ours.objective_value, rel=1e-12)

    def test_invalid_value_is_usage_error(self, capsys):
        status, _, err = run_cli(
            ["design", "--n", "10", "--r", "2.5", "--k", "-1", "--se", "0.95", "--sp", "0.95"],
            capsys,
        )
        assert status != 0
        assert "error" in err.lower()


class TestEvaluateCommand:
    def test_explicit_pools(self, capsys):
        status, out, _ = run_cli(
            ["evaluate", "--pools", "5,5,5,5", "--r", "2.5", "--k", "0.1",
             "--se", "0.95", "--sp", "0.95"],
            capsys,
        )
        assert status == 0
        assert "pools: 5 5 5 5\n" in out
        prior = build_truncated_prior(ModelParams(20, 2.5, 0.1, 0.95, 0.95).negbin(), 20)
        table = build_cost_table_from_prior(
            prior, ModelParams(20, 2.5, 0.1, 0.95, 0.95).tc(), PenaltyWeights()
        )
        assert f"expected tests: {4 * table.tests[5]:.6g}\n" in out

    def test_bad_pool_token(self, capsys):
        status, _, err = run_cli(
            ["evaluate", "--pools", "5,x", "--r", "2.5", "--k", "0.1"], capsys
        )
        assert status == 2
        assert "pools" in err


class TestSimulateCommand:
    def test_text_summary(self, capsys):
        status, out, _ = run_cli(
            ["simulate", "--n", "12", "--r", "2.5", "--k", "0.1", "--se", "0.95",
             "--sp", "0.95", "--replicates", "400", "--seed", "9"],
            capsys,
        )
        assert status == 0
        assert "replicates: 400" in out
        assert "ours:" in out and "baseline:" in out
        assert "savings mean:" in out


class TestSweepConfig:
    def test_parse_round_trip(self):
        config = parse_config(
            "# comment\n"
            "n = 10, 20\n"
            "r = 2.5\n"
            "k = 0.1, 1\n"
            "se = 0.9\n"
            "sp = 0.8\n"
            "replicates = 50\n"
            "seed = 3\n"
        )
        assert config.n_values == (10, 20)
        assert config.k_values == (0.1, 1.0)
        assert config.s_e == 0.9
        points = config.points()
        assert len(points) == 4
        assert points[0].params.n == 10 and points[-1].params.n == 20

    def test_unknown_key_rejected(self):
        with pytest.raises(Exception, match="unknown key"):
            parse_config("n = 10\nr = 1\nk = 1\nbogus = 3\n")

    def test_malformed_line_rejected(self):
        with pytest.raises(Exception, match="key=value"):
            parse_config("n 10\n")

    def test_missing_axis_rejected(self):
        with pytest.raises(Exception, match="missing"):
            parse_config("n = 10\nr = 1\n")

    def test_empty_axis_rejected(self):
        with pytest.raises(Exception):
            ExperimentConfig(
                n_values=(),
                r_values=(1.0,),
                k_values=(1.0,),
                lambda1_values=(0.0,),
                lambda2_values=(0.0,),
                s_e=0.9,
                s_p=0.9,
            )


class TestPresets:
    def test_fig1_axis(self):
        points = preset_points("fig1")
        assert [p.params.n for p in points] == [5, 10, 20, 50, 100, 200]
        assert all(p.params.r == 2.5 and p.params.k == 0.1 for p in points)
        assert all(p.weights == PenaltyWeights() for p in points)

    def test_fig2_grid_size(self):
        points = preset_points("fig2")
        assert len(points) == 60  # 120 CSV rows: one per (point, method)
        assert {p.params.n for p in points} == {20, 100, 200}
        assert {p.params.r for p in points} == {0.5, 1.0, 2.5, 5.0}
        assert {p.params.k for p in points} == {0.05, 0.1, 0.5, 1.0, 10.0}

    def test_fig3_axes(self):
        points = preset_points("fig3")
        lam1 = [p.weights.lambda1 for p in points if p.weights.lambda2 == 0.0]
        lam2 = [p.weights.lambda2 for p in points if p.weights.lambda1 == 0.0]
        assert lam1 == [0.0, 1.0, 5.0, 25.0, 125.0]
        assert lam2 == [0.0, 1.0, 5.0, 25.0, 125.0, 625.0]  # the origin belongs to both
        assert all(p.params.n == 100 for p in points)

    def test_unknown_preset(self):
        with pytest.raises(Exception, match="preset"):
            preset_points("fig9")


class TestSweepCommand:
    def test_fig1_csv_shape_and_roundtrip(self, tmp_path, capsys):
        out_path = tmp_path / "fig1.csv"
        status, _, _ = run_cli(
            ["sweep", "--preset", "fig1", "--replicates", "800", "--seed", "7",
             "--out", str(out_path)],
            capsys,
        )
        assert status == 0
        with open(out_path, newline="") as handle:
            rows = list(csv.DictReader(handle))
        assert len(rows) == 12
        assert list(rows[0].keys()) == list(CSV_COLUMNS)
        for row in rows:
            # analytic columns re-validate against direct library calls
            params = ModelParams(
                n=int(row["N"]), r=float(row["r"]), k=float(row["k"]),
                s_e=float(row["s_e"]), s_p=float(row["s_p"]),
            )
            weights = PenaltyWeights(float(row["lambda1"]), float(row["lambda2"]))
            ours, baseline, _ = paired_designs(params, weights)
            design = ours if row["method"] == "ours" else baseline
            assert float(row["mean_pool_size"]) == design.mean_pool_size
            assert int(row["replicates"]) == 800
            assert int(row["seed"]) == 7
            assert 0.0 < float(row["mean_tests_per_contact"]) <= 1.0 + 1.0 / params.n
        by_method = {
            row["method"]: float(row["mean_tests_per_contact"])
            for row in rows
            if row["N"] == "20"
        }
        assert by_method["ours"] < by_method["baseline"]

    def test_stdout_matches_file_output(self, tmp_path, capsys):
        out_path = tmp_path / "mini.csv"
        config = tmp_path / "mini.cfg"
        config.write_text("n = 8\nr = 2.5\nk = 0.1\nreplicates = 40\nseed = 2\n")
        status, _, _ = run_cli(
            ["sweep", "--config", str(config), "--out", str(out_path)], capsys
        )
        assert status == 0
        status, out, _ = run_cli(["sweep", "--config", str(config)], capsys)
        assert status == 0
        assert out == out_path.read_text()

    def test_json_format(self, tmp_path, capsys):
        config = tmp_path / "mini.cfg"
        config.write_text("n = 6\nr = 1.0\nk = 0.5\nreplicates = 30\nseed = 4\n")
        status, out, _ = run_cli(["sweep", "--config", str(config), "--format", "json"], capsys)
        assert status == 0
        rows = json.loads(out)
        assert len(rows) == 2
        assert {row["method"] for row in rows} == {"ours", "baseline"}
        assert math.isfinite(rows[0]["mean_tests_per_contact"])

    def test_rerun_is_byte_identical(self, tmp_path, capsys):
        paths = [tmp_path / "a.csv", tmp_path / "b.csv"]
        for path in paths:
            status, _, _ = run_cli(
                ["sweep", "--preset", "fig1", "--replicates", "40", "--seed", "7",
                 "--out", str(path)],
                capsys,
            )
            assert status == 0
        assert paths[0].read_bytes() == paths[1].read_bytes()

    def test_requires_exactly_one_source(self, capsys):
        status, _, err = run_cli(["sweep"], capsys)
        assert status == 2
        assert "preset" in err
        status, _, err = run_cli(
            ["sweep", "--preset", "fig1", "--config", "x.cfg"], capsys
        )
        assert status == 2

    def test_missing_config_file(self, capsys):
        status, _, err = run_cli(["sweep", "--config", "/nonexistent/path.cfg"], capsys)
        assert status == 2
        assert "error" in err

    def test_unwritable_output_path(self, tmp_path, capsys):
        config = tmp_path / "mini.cfg"
        config.write_text("n = 4\nr = 1.0\nk = 0.5\nreplicates = 10\nseed = 1\n")
        status, _, err = run_cli(
            ["sweep", "--config", str(config), "--out", "/nonexistent/dir/out.csv"], capsys
        )
        assert status == 2
        assert "error" in err

    def test_invalid_threads_env(self, tmp_path, capsys, monkeypatch):
        monkeypatch.setenv("POOLTRACE_THREADS", "soup")
        config = tmp_path / "mini.cfg"
        config.write_text("n = 4\nr = 1.0\nk = 0.5\nreplicates = 10\nseed = 1\n")
        status, _, err = run_cli(["sweep", "--config", str(config)], capsys)
        assert status == 2
        assert "POOLTRACE_THREADS" in err


class TestFormatReal:
    def test_seventeen_significant_digits_round_trip(self):
        for value in (0.1, 2.5, 1 / 3, 0.95, 6.558031761760091, -1.2345678901234567e-7):
            assert float(format_real(value)) == value
        assert "." in format_real(2.5)
