"""End-to-end runs of the experiment commands."""

import csv
import json
import logging

import numpy as np
import pytest

from main import (
    EXIT_INTERRUPTED,
    EXIT_IO,
    EXIT_NUMERICAL,
    EXIT_OK,
    EXIT_USAGE,
    ExperimentRunner,
    build_parser,
    load_defaults,
    main,
)
from utils.config import Config


def read_csv(path):
    with open(path, newline="") as f:
        rows = list(csv.reader(f))
    return rows[0], rows[1:]


class TestCommands:
    def test_profile(self, out_dir):
        code = main(["profile", "--c-list", "2.5", "--t-min", "0.1", "--t-max", "10", "--per-decade", "2",
                     "--out", str(out_dir)])
        assert code == EXIT_OK
        header, rows = read_csv(out_dir / "profile.csv")
        assert header == ["c", "T", "K", "r_max", "gamma_star", "rho_eff", "V"]
        assert len(rows) == 5
        assert all(float(row[6]) >= 1.0 for row in rows)

    def test_kernel_dump_includes_cutoff(self, out_dir):
        code = main(["kernel-dump", "--kind", "hs", "--temperatures", "1,0.1", "--r-max", "2", "--r-points", "5",
                     "--out", str(out_dir)])
        assert code == EXIT_OK
        header, rows = read_csv(out_dir / "kernels.csv")
        assert header == ["r", "T", "w", "psi", "rho"]
        assert len(rows) == 14
        at_cutoff = [row for row in rows if row[0] == "2.5"]
        assert [float(row[2]) for row in at_cutoff] == [0.5, 0.5]

    def test_location_demo(self, out_dir):
        code = main(["location-demo", "--n", "200", "--mu-points", "11", "--scale", "1.31", "--out", str(out_dir)])
        assert code == EXIT_OK
        summary = json.loads((out_dir / "location_summary.json").read_text())
        assert abs(summary["estimate"]) < 0.5
        assert summary["n_inliers"] + summary["n_outliers"] == 200
        assert summary["scale_overridden"] is True
        header, rows = read_csv(out_dir / "location_objective.csv")
        assert header == ["T", "mu", "M"]
        assert len(rows) == 11 * len(summary["trace"])
        assert summary["trace"][-1]["T"] == 0.1

    def test_vertex_sim(self, out_dir):
        code = main(["vertex-sim", "--events", "3", "--out", str(out_dir)])
        assert code == EXIT_OK
        header, rows = read_csv(out_dir / "table1.csv")
        assert header[0] == "scheme" and header[-1] == "n_rec"
        assert [row[0] for row in rows] == ["no-anneal T=1", "no-anneal T=0.01", "anneal T_end=1", "anneal T_end=0.01"]

    def test_tail_sweep(self, out_dir):
        code = main(["tail-index", "--tail-n", "100", "--reps", "1", "--out", str(out_dir)])
        assert code == EXIT_OK
        header, rows = read_csv(out_dir / "tail_hill.csv")
        assert header == ["nu", "p_opt", "rmse_opt"]
        assert len(rows) == 19
        header, rows = read_csv(out_dir / "tail_alg_a.csv")
        assert header == ["nu", "p_used_mean", "p_used_sd", "rmse_algA"]
        assert [float(row[0]) for row in rows][:3] == [1.0, 1.5, 2.0]

    def test_tail_input_sample(self, tmp_path, out_dir):
        n = 500
        sample = (n + 1.0) / (n + 1.0 - np.arange(1, n + 1))
        source = tmp_path / "sample.csv"
        source.write_text("x\n" + "\n".join(repr(float(v)) for v in sample) + "\n")
        code = main(["tail-index", "--input", str(source), "--out", str(out_dir)])
        assert code == EXIT_OK
        fit = json.loads((out_dir / "tail_fit.json").read_text())
        assert fit["n"] == n
        assert fit["slope"] == pytest.approx(1.0, abs=1e-8)
        assert fit["stop_reason"] == "exhausted"
        assert fit["n_discard"] == 3
        assert fit["hill_k"] == 499
        assert not (out_dir / "tail_hill.csv").exists()

        code = main(["tail-index", "--input", str(source), "--single-refit", "--out", str(out_dir)])
        assert code == EXIT_OK
        assert json.loads((out_dir / "tail_fit.json").read_text())["n_included"] == 497

    def test_reruns_are_byte_identical(self, tmp_path):
        args = ["location-demo", "--n", "100", "--mu-points", "21", "--seed", "11"]
        assert main(args + ["--out", str(tmp_path / "a")]) == EXIT_OK
        assert main(args + ["--out", str(tmp_path / "b")]) == EXIT_OK
        for name in ("location_objective.csv", "location_summary.json"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


class TestConfigFile:
    def test_file_values_and_flag_precedence(self, tmp_path, out_dir):
        config = tmp_path / "tail.json"
        config.write_text(json.dumps({"reps": 1, "tail-n": 100, "nu_grid": "2,3"}))
        code = main(["tail-index", "--config", str(config), "--nu-grid", "4", "--out", str(out_dir)])
        assert code == EXIT_OK
        _, rows = read_csv(out_dir / "tail_hill.csv")
        assert [row[0] for row in rows] == ["4.0"]

    def test_option_names_map_to_fields(self, tmp_path):
        config = tmp_path / "run.json"
        config.write_text(json.dumps({"c": 3.0, "out": "elsewhere", "cutoff": 2.0, "c-list": "2"}))
        defaults = load_defaults(str(config))
        assert defaults.cutoff == 2.0
        assert defaults.output_dir == "elsewhere"
        assert defaults.profile_cutoffs == "2"

    def test_unknown_key(self, tmp_path):
        config = tmp_path / "bad.json"
        config.write_text(json.dumps({"no_such_option": 1}))
        assert main(["profile", "--config", str(config)]) == EXIT_USAGE

    def test_missing_file(self, tmp_path):
        assert main(["profile", "--config", str(tmp_path / "missing.json")]) == EXIT_IO

    def test_parser_defaults_follow_config(self):
        args = build_parser(Config(reps=7)).parse_args(["tail-index"])
        assert args.reps == 7


class TestExitCodes:
    def test_invalid_value(self, out_dir):
        assert main(["kernel-dump", "--temperatures", "-1", "--out", str(out_dir)]) == EXIT_USAGE

    def test_numerical_failure(self, out_dir):
        code = main(["location-demo", "--n", "50", "--t0", "1e-4", "--t-end", "1e-4", "--scale", "1e-6",
                     "--out", str(out_dir)])
        assert code == EXIT_NUMERICAL

    def test_unknown_command(self):
        with pytest.raises(SystemExit) as info:
            main(["bogus"])
        assert info.value.code == 2

    def test_stop_request(self, out_dir):
        class StopAtOnce:
            def should_stop(self):
                return True

        config = Config(output_dir=str(out_dir), profile_cutoffs="2.5")
        runner = ExperimentRunner(config, logging.getLogger("test"), StopAtOnce())
        args = build_parser().parse_args(["profile"])
        assert runner.run(args) == EXIT_INTERRUPTED
        assert not (out_dir / "profile.csv").exists()
