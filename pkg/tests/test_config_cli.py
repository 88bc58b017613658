import json
import subprocess
import sys

import numpy as np
import pytest

from bssp.cli import main
from bssp.config import parse_config
from bssp.errors import ConfigError
from bssp.geometry import BallRegion, BoxRegion

SMALL = {"benchmark": "CVX1", "rays": 4, "solver": {"max_iters": 500}}


class TestParse:
    def test_benchmark_defaults(self):
        cfg = parse_config({"benchmark": "cvx2"})
        assert cfg.problem.name == "CVX2"
        assert isinstance(cfg.region, BallRegion)
        assert cfg.solver.beta == 1e6
        assert cfg.rays == 50

    def test_overrides_and_region(self):
        cfg = parse_config(json.dumps({"benchmark": "CVX1", "Q": {"box": {"upper": [0.5, 0.5]}},
                                       "solver": {"nu": 0.8}, "seed": 3}))
        assert isinstance(cfg.region, BoxRegion)
        assert cfg.solver.nu == 0.8 and cfg.solver.seed == 3

    def test_file_source(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text(json.dumps(SMALL))
        assert parse_config(str(path)).rays == 4

    @pytest.mark.parametrize("doc,where", [
        ({"benchmark": "CVX1", "solver": {"nu": 0.4}}, "solver.nu"),
        ({"benchmark": "CVX1", "solver": {"lr": 1}}, "solver.lr"),
        ({"benchmark": "CVX1", "bogus": 1}, "bogus"),
        ({"benchmark": "CVX9"}, "benchmark"),
        ({"benchmark": "CVX1", "Q": {"ball": {"c": [0, 0], "R": -1}}}, "Q.ball.R"),
        ({"benchmark": "CVX1", "Q": {"ball": {"c": [0, 0, 0], "R": 1}}}, "Q"),
        ({"benchmark": "CVX1", "eps": 0.6}, "eps"),
        ({"benchmark": "CVX1", "rays": 0}, "rays"),
    ])
    def test_errors_name_the_key(self, doc, where):
        with pytest.raises(ConfigError) as info:
            parse_config(doc)
        assert str(info.value).startswith(where)

    def test_malformed_json(self):
        with pytest.raises(ConfigError):
            parse_config("{not json")

    def test_user_problem_factory(self, tmp_path, monkeypatch):
        (tmp_path / "myprob.py").write_text(
            "import numpy as np\n"
            "from bssp import Box, ProblemInstance\n"
            "def make():\n"
            "    f = lambda x: np.concatenate([x ** 2, (x - 1) ** 2], -1)\n"
            "    j = lambda x: np.stack([2 * x, 2 * (x - 1)], axis=-2)\n"
            "    return ProblemInstance('mine', 1, 2, f, j, Box([0.0], [1.0]), ideal_point=[0, 0])\n")
        monkeypatch.syspath_prepend(str(tmp_path))
        cfg = parse_config({"problem": "myprob:make", "Q": {"ball": {"c": [0.3, 0.3], "R": 0.1}}})
        assert cfg.problem.name == "mine" and cfg.benchmark is None


class TestCLI:
    def test_solve_writes_artifacts(self, tmp_path):
        out = tmp_path / "run"
        assert main(["solve", "--config", json.dumps(SMALL), "--out", str(out), "--trace"]) == 0
        for name in ("solutions.csv", "metrics.json", "ground_truth.csv", "trace.jsonl",
                     "timing.json"):
            assert (out / name).exists(), name
        metrics = json.loads((out / "metrics.json").read_text())
        assert metrics["ray_count"] == 4 and metrics["failures"] == []
        first = json.loads((out / "trace.jsonl").read_text().splitlines()[0])
        assert first["ray_index"] == 0 and first["k"] == 0

    def test_metrics_recompute_matches_solve(self, tmp_path):
        out = str(tmp_path)
        main(["solve", "--config", json.dumps(SMALL), "--out", out])
        assert main(["metrics", "--config", json.dumps(SMALL), "--out", out]) == 0
        a = json.loads((tmp_path / "metrics.json").read_text())
        b = json.loads((tmp_path / "metrics_recomputed.json").read_text())
        for key in ("med", "hv_all", "hv_feasible", "pi", "efhv"):
            assert a[key] == b[key]

    def test_sweep_rays(self, tmp_path):
        rc = main(["sweep-rays", "--config", json.dumps(SMALL), "--out", str(tmp_path),
                   "--ray-counts", "2", "5"])
        assert rc == 0
        lines = (tmp_path / "sweep.csv").read_text().splitlines()
        assert lines[0] == "K,med,hv_all,hv_feasible,pi,efhv"
        assert [line.split(",")[0] for line in lines[1:]] == ["2", "5"]

    def test_config_error_exit_code(self, tmp_path, capsys):
        assert main(["solve", "--config", '{"benchmark": "CVX1", "solver": {"nu": 2}}']) == 1
        assert "solver.nu" in capsys.readouterr().err

    def test_bad_arguments_exit_code(self):
        assert main(["frobnicate"]) == 1
        assert main(["sweep-rays", "--config", json.dumps(SMALL), "--ray-counts", "5", "2"]) == 1

    def test_runtime_error_exit_code(self, tmp_path):
        assert main(["metrics", "--config", json.dumps(SMALL), "--out", str(tmp_path)]) == 2

    def test_console_script(self, tmp_path):
        proc = subprocess.run([sys.executable, "-m", "bssp", "ground-truth", "--config",
                               json.dumps(SMALL), "--out", str(tmp_path)],
                              capture_output=True, text=True)
        assert proc.returncode == 0, proc.stderr
        rows = (tmp_path / "ground_truth.csv").read_text().splitlines()
        assert len(rows) == 5
        assert np.isfinite(float(rows[1].split(",")[-1]))
