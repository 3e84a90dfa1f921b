import csv
import math

import numpy as np
import pytest

from maternapprox import bench
from maternapprox.cli import main
from maternapprox.config import ConfigError, load_config, parse_value

SMALL_COV = ["--set", "experiment.upper=5 5", "--set", "methods.s_nodes=15", "--set", "methods.conv_nodes=5",
             "--set", "cov_error.u_per_axis=11", "--set", "cov_error.s_per_axis=3"]


def read_csv(path):
    with open(path, encoding="utf-8", newline="") as fh:
        return list(csv.reader(fh))


def test_defaults_and_precedence(tmp_path):
    cfg = load_config("kriging-bench")
    assert cfg["experiment"]["m"] == 1000 and cfg["methods"]["taper_theta"] == {1.0: 1.1, 2.0: 1.5}
    ini = tmp_path / "run.ini"
    ini.write_text("[experiment]\nm = 200\nranges = 0.5 1\n[methods]\nconv_nodes = 2:9 3:10\n")
    cfg = load_config("kriging-bench", path=ini, overrides=["experiment.m=300"])
    assert cfg["experiment"]["m"] == 300
    assert cfg["experiment"]["ranges"] == (0.5, 1.0)
    assert cfg["methods"]["conv_nodes"] == {2.0: 9, 3.0: 10}


def test_theta_range_syntax():
    thetas = parse_value("taper_sweep", "thetas", "0.05:2:0.05")
    assert len(thetas) == 40 and thetas[0] == 0.05 and thetas[-1] == 2.0
    assert parse_value("taper_sweep", "thetas", "0.1 0.3") == (0.1, 0.3)


@pytest.mark.parametrize("text,match", [
    ("[bogus]\nx = 1\n", "unknown section"),
    ("[experiment]\nwidth = 3\n", "unknown key"),
    ("[experiment]\nm = many\n", "bad value"),
])
def test_config_file_rejects_unknown_and_malformed(tmp_path, text, match):
    ini = tmp_path / "bad.ini"
    ini.write_text(text)
    with pytest.raises(ConfigError, match=match):
        load_config("cov-error", path=ini)


@pytest.mark.parametrize("override", [
    "experiment.width=3", "nosuch.key=1", "methods.names=markov-s9", "experiment.sigma=0",
    "experiment.grid=10", "taper_sweep.thetas=0 1", "noequals",
])
def test_bad_overrides_exit_2(tmp_path, capsys, override):
    code = main(["cov-error", "--out", str(tmp_path), "--set", override])
    assert code == 2
    assert "config error" in capsys.readouterr().err


def test_cov_error_empty_method_list(tmp_path):
    assert main(["cov-error", "--out", str(tmp_path), "--set", "methods.names="]) == 0
    assert (tmp_path / "cov_error.csv").read_text() == "method,nu,range,epsilon\n"


def test_cov_error_skips_convolution_at_nu1(tmp_path):
    args = ["cov-error", "--out", str(tmp_path), "--set", "experiment.nu=1", "--set", "experiment.ranges=1",
            "--set", "methods.names=markov-s1 convolution"] + SMALL_COV
    assert main(args) == 0
    rows = read_csv(tmp_path / "cov_error.csv")
    assert rows[0] == ["method", "nu", "range", "epsilon"]
    assert [r[0] for r in rows[1:]] == ["markov-s1"]
    assert read_csv(tmp_path / "skipped.csv")[1:] == [["convolution", "1", "1", "kernel singular"]]


def test_cov_error_is_byte_deterministic(tmp_path):
    outs = []
    for k in range(2):
        out = tmp_path / f"run{k}"
        args = ["cov-error", "--out", str(out), "--seed", "7", "--set", "experiment.nu=2",
                "--set", "experiment.ranges=0.5 1", "--set", "methods.names=markov-s1 convolution"] + SMALL_COV
        assert main(args) == 0
        outs.append((out / "cov_error.csv").read_bytes())
    assert outs[0] == outs[1]
    rows = outs[0].decode().splitlines()
    assert len(rows) == 5
    # 17 significant digits, LF only
    assert b"\r" not in outs[0]
    eps = rows[1].split(",")[3]
    assert float(eps) == float("%.17g" % float(eps))


def test_kriging_bench_summary_and_optimal(tmp_path):
    args = ["kriging-bench", "--out", str(tmp_path), "--set", "experiment.ranges=0.5",
            "--set", "experiment.m=150", "--set", "experiment.grid=8 8", "--set", "experiment.replicates=3",
            "--set", "methods.s_nodes=20", "--set", "methods.db3_nodes=12", "--set", "methods.conv_nodes=8"]
    assert main(args) == 0
    rows = read_csv(tmp_path / "kriging_bench.csv")
    assert tuple(rows[0]) == bench.KRIGING_HEADER
    data = rows[1:]
    methods = {r[0] for r in data}
    assert methods == {"optimal", "markov-s1", "markov-db3", "convolution", "taper"}
    assert all(float(r[4]) == 0.0 for r in data if r[0] == "optimal")
    summary = read_csv(tmp_path / "kriging_bench_summary.csv")
    assert tuple(summary[0]) == bench.SUMMARY_HEADER
    for srow in summary[1:]:
        mine = [r for r in data if r[:3] == srow[:3]]
        assert int(srow[3]) == len(mine) == 3
        for col, name in ((4, "kriging_error"), (5, "t_step1"), (6, "t_step2"), (7, "t_step3")):
            values = [float(r[col]) for r in mine]
            j = bench.SUMMARY_HEADER.index(name + "_mean")
            assert float(srow[j]) == pytest.approx(math.fsum(values) / 3, rel=1e-12, abs=1e-300)
            assert float(srow[j + 1]) == pytest.approx(np.std(values, ddof=1), rel=1e-9, abs=1e-300)


def test_kriging_bench_errors_ignore_timing_noise(tmp_path):
    cols = []
    for k in range(2):
        out = tmp_path / f"r{k}"
        args = ["kriging-bench", "--out", str(out), "--set", "experiment.ranges=1", "--set", "experiment.m=80",
                "--set", "experiment.grid=5 5", "--set", "experiment.replicates=2",
                "--set", "methods.names=markov-s1 taper", "--set", "methods.s_nodes=12"]
        assert main(args) == 0
        cols.append([r[:5] for r in read_csv(out / "kriging_bench.csv")])
    assert cols[0] == cols[1]


def test_taper_sweep_shape_and_trend(tmp_path):
    reps = 3
    args = ["taper-sweep", "--out", str(tmp_path), "--set", "experiment.ranges=0.25",
            "--set", f"experiment.replicates={reps}", "--set", "experiment.m=300",
            "--set", "experiment.grid=15 15", "--set", "taper_sweep.s_nodes=30"]
    assert main(args) == 0
    rows = read_csv(tmp_path / "taper_sweep.csv")
    assert tuple(rows[0]) == bench.TAPER_HEADER
    data = np.array([[float(v) for v in r] for r in rows[1:]])
    assert data.shape[0] == 40 * reps
    for rep in range(reps):
        block = data[data[:, 2] == rep]
        assert len(block) == 40
        assert np.allclose(block[:, 3], np.arange(1, 41) * 0.05, rtol=0, atol=1e-12)
        # the S1 baseline is computed once per replicate
        assert np.all(block[:, 7:] == block[0, 7:])
    mean_err = data[:, 4].reshape(reps, 40).mean(axis=0)
    assert np.all(np.diff(mean_err) < 0)


def test_taper_sweep_skips_untaperable_nu(tmp_path):
    args = ["taper-sweep", "--out", str(tmp_path), "--set", "experiment.nu=3", "--set", "experiment.ranges=1",
            "--set", "experiment.replicates=1", "--set", "taper_sweep.thetas=0.5"]
    assert main(args) == 0
    assert len(read_csv(tmp_path / "taper_sweep.csv")) == 1
    assert read_csv(tmp_path / "skipped.csv")[1:] == [["taper", "3", "1", "nu not taperable"]]


def test_demo_header_and_taper_zeros(tmp_path):
    args = ["demo-predict", "--out", str(tmp_path), "--set", "experiment.m=100", "--set", "demo.grid=12 9",
            "--set", "methods.names=taper", "--set", "methods.taper_theta=0.05"]
    assert main(args) == 0
    for name in ("optimal", "taper"):
        lines = (tmp_path / f"demo_{name}.txt").read_text().splitlines()
        assert lines[0] == "# dims 12 9"
        assert lines[1] == "# bbox 0 5 0 5"
        assert len(lines) == 2 + 12
    values, dims, bbox = bench.read_grid(tmp_path / "demo_taper.txt")
    assert dims == (12, 9) and bbox == (0.0, 5.0, 0.0, 5.0)
    assert np.count_nonzero(values == 0.0) > 0.5 * values.size
    assert values[0, 0] == 0.0 or values[-1, -1] == 0.0


@pytest.mark.slow
def test_demo_s1_close_to_optimal(tmp_path):
    assert main(["demo-predict", "--out", str(tmp_path)]) == 0
    opt = bench.read_grid(tmp_path / "demo_optimal.txt")[0]
    s1 = bench.read_grid(tmp_path / "demo_markov-s1.txt")[0]
    assert opt.shape == (40, 40)
    assert np.abs(opt - s1).max() < 0.10 * (opt.max() - opt.min())


def test_demo_records_kernel_singular(tmp_path):
    args = ["demo-predict", "--out", str(tmp_path), "--set", "experiment.m=60", "--set", "demo.grid=5 5",
            "--set", "demo.nu=1", "--set", "methods.names=convolution"]
    assert main(args) == 0
    assert not (tmp_path / "demo_convolution.txt").exists()
    assert read_csv(tmp_path / "skipped.csv")[1:] == [["convolution", "1", "1", "kernel singular"]]


def test_manifest_written(tmp_path):
    import json

    assert main(["cov-error", "--out", str(tmp_path), "--set", "methods.names="]) == 0
    manifest = json.loads((tmp_path / "run_config.json").read_text())
    assert manifest["command"] == "cov-error" and manifest["scale"] == "desk"
    assert manifest["config"]["methods"]["names"] == []


def test_selftest_passes(capsys):
    assert main(["selftest"]) == 0


@pytest.mark.parametrize("name,scale", [("desk", "desk"), ("full", "paper")])
def test_shipped_configs_load(name, scale):
    from pathlib import Path

    path = Path(__file__).resolve().parent.parent / "configs" / f"{name}.ini"
    cfg = load_config("kriging-bench", scale, path)
    preset = load_config("kriging-bench", scale)
    for section in ("experiment", "methods"):
        for key, value in cfg[section].items():
            if key != "nu":
                assert value == preset[section][key], (section, key)


def test_ranges_accept_start_stop_step():
    assert parse_value("experiment", "ranges", "0.1:0.5:0.1") == (0.1, 0.2, 0.3, 0.4, 0.5)
