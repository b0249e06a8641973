from pathlib import Path

import pytest

from stakesim.cli import main

FAST_SIM = """
[sim]
n = 10
h_max = 300
eta = 10
trajectories = 2
sample_stride = 20
"""

FAST_SWEEP = FAST_SIM + """
[sweep]
axis1 = lambda_borrow
axis1_values = 0.2 0.8
axis2 = lambda_slash
axis2_values = 0.2 0.8
trajectories = 2
"""


def write_cfg(tmp_path: Path, text: str) -> Path:
    path = tmp_path / "cfg.ini"
    path.write_text(text)
    return path


class TestAnalytic:
    def test_writes_csv(self, tmp_path, capsys):
        code = main(["analytic", "--out", str(tmp_path)])
        assert code == 0
        text = (tmp_path / "analytic.csv").read_text()
        assert text.splitlines()[0] == "p,gamma,beta,aleph,k,sigma_s2,s_star"

    def test_bad_grid_is_config_error(self, tmp_path):
        code = main(["analytic", "--out", str(tmp_path), "--p-grid", "0.7"])
        assert code == 2


class TestSimCommands:
    def test_sim2_runs(self, tmp_path, capsys):
        cfg = write_cfg(tmp_path, FAST_SIM)
        code = main(
            ["sim2", "--config", str(cfg), "--out", str(tmp_path / "out"), "--seed", "5"]
        )
        assert code == 0
        assert (tmp_path / "out" / "aggregate.csv").exists()
        assert (tmp_path / "out" / "trajectory_001.csv").exists()

    def test_sim3_runs(self, tmp_path):
        cfg = write_cfg(tmp_path, FAST_SIM)
        code = main(["sim3", "--config", str(cfg), "--out", str(tmp_path / "out")])
        assert code == 0
        header = (tmp_path / "out" / "trajectory_000.csv").read_text().splitlines()[0]
        assert header.endswith("w_s,w_d,w_l")

    def test_threads_byte_identical(self, tmp_path):
        cfg = write_cfg(tmp_path, FAST_SIM)
        assert main(["sim2", "--config", str(cfg), "--out", str(tmp_path / "t1"), "--threads", "1"]) == 0
        assert main(["sim2", "--config", str(cfg), "--out", str(tmp_path / "t8"), "--threads", "8"]) == 0
        for name in ("aggregate.csv", "trajectory_000.csv", "trajectory_001.csv"):
            assert (tmp_path / "t1" / name).read_bytes() == (tmp_path / "t8" / name).read_bytes()

    def test_missing_config_is_io_error(self, tmp_path):
        code = main(["sim2", "--config", str(tmp_path / "nope.ini"), "--out", str(tmp_path)])
        assert code == 4

    def test_bad_config_is_config_error(self, tmp_path):
        cfg = write_cfg(tmp_path, "[sim]\nn = 1\n")
        code = main(["sim2", "--config", str(cfg), "--out", str(tmp_path / "out")])
        assert code == 2

    def test_overflowing_policy_is_runtime_error(self, tmp_path):
        cfg = write_cfg(tmp_path, "[monetary]\nlambda = 1.5\n[sim]\nn = 5\nh_max = 5000\n")
        code = main(["sim2", "--config", str(cfg), "--out", str(tmp_path / "out")])
        assert code == 3


class TestSweepCommands:
    def test_sweep2_writes_grid(self, tmp_path):
        cfg = write_cfg(tmp_path, FAST_SWEEP)
        out = tmp_path / "sweep"
        assert main(["sweep2", "--config", str(cfg), "--out", str(out)]) == 0
        text = (out / "sweep.csv").read_text()
        assert text.splitlines()[0] == "axis1_name,axis1_value,axis2_name,axis2_value,metric,stat,value"
        assert (out / "manifest.json").exists()

    def test_sweep_threads_byte_identical(self, tmp_path):
        cfg = write_cfg(tmp_path, FAST_SWEEP)
        assert main(["sweep2", "--config", str(cfg), "--out", str(tmp_path / "s1"), "--threads", "1"]) == 0
        assert main(["sweep2", "--config", str(cfg), "--out", str(tmp_path / "s8"), "--threads", "8"]) == 0
        assert (tmp_path / "s1" / "sweep.csv").read_bytes() == (tmp_path / "s8" / "sweep.csv").read_bytes()

    def test_sweep3_runs(self, tmp_path):
        cfg = write_cfg(tmp_path, FAST_SIM + """
[sweep]
axis1 = k
axis1_values = 0.5 4.0
axis2 = lambda_slash
axis2_values = 0.1 0.5
trajectories = 1
""")
        out = tmp_path / "sweep3"
        assert main(["sweep3", "--config", str(cfg), "--out", str(out)]) == 0
        assert "w_d" in (out / "sweep.csv").read_text()
