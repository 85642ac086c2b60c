"""End-to-end runs of the ``potdiag`` command line."""
import json

import numpy as np
import pytest

from potdiag.cli import build_parser, integer_grid, main, probability_grid
from potdiag.cli.commands import DEFAULT_K_GRID, DEFAULT_P_GRID, RunConfig
from potdiag.cli.io import CONFIG_PREFIX, read_config, read_series


@pytest.fixture(scope="module")
def ar1_file(tmp_path_factory):
    """An 8000-observation AR(1) series written by the command line itself."""
    path = tmp_path_factory.mktemp("data") / "ar1.csv"
    assert main(["simulate", "ar1", "--n", "8000", "--seed", "7", "--out", str(path)]) == 0
    return path


def _data_rows(path):
    return [line for line in path.read_text().splitlines() if not line.startswith("#")][1:]


def test_grid_arguments():
    assert probability_grid("0.95:0.995:0.005") == DEFAULT_P_GRID
    assert probability_grid("0.9") == (0.9,)
    assert integer_grid("1:12") == DEFAULT_K_GRID
    assert integer_grid("3") == (3,)


@pytest.mark.parametrize(
    "argv", [["imt-grid", "--K-grid", "5:1"], ["imt-grid", "--p-grid", "0.99:0.95:0.01"]]
)
def test_empty_grid_is_a_usage_error(argv):
    with pytest.raises(SystemExit) as exc_info:
        build_parser().parse_args(argv + ["--process", "ar1", "--n", "500"])
    assert exc_info.value.code == 2


def test_simulate_writes_series_and_spec(ar1_file):
    assert len(_data_rows(ar1_file)) == 8000
    assert read_series(ar1_file).n == 8000
    meta = json.loads(ar1_file.with_name("ar1.meta.json").read_text())
    assert meta["spec"]["kind"] == "ar1_cauchy"
    assert meta["spec"]["extremal_index"] == pytest.approx(0.3)
    assert meta["metadata"]["generator"] == "PCG64"


def test_simulate_is_reproducible(ar1_file, tmp_path):
    again = tmp_path / "again.csv"
    assert main(["simulate", "ar1", "--n", "8000", "--seed", "7", "--out", str(again)]) == 0
    assert again.read_bytes() == ar1_file.read_bytes()


def test_simulate_to_standard_output(capsys):
    assert main(["simulate", "exact_gpd", "--n", "5", "--seed", "1"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0].startswith(CONFIG_PREFIX)
    assert lines[1] == "value"
    assert len(lines) == 7


def test_invalid_process_parameter():
    assert main(["simulate", "farima", "--d", "0.6", "--n", "100"]) == 2


def test_unknown_process(capsys):
    assert main(["simulate", "ar1_cauchi", "--n", "100"]) == 2
    assert "Did you mean" in capsys.readouterr().err


def test_theta(ar1_file, tmp_path):
    out = tmp_path / "theta.json"
    argv = ["theta", "--input", str(ar1_file), "-p", "0.98", "--K", "1", "--format", "json"]
    assert main(argv + ["--out", str(out)]) == 0
    report = json.loads(out.read_text())
    assert 0 < report["estimate"]["theta_hat"] < 1
    assert report["N"] == 160
    assert report["imt_flag"] == "ok"
    assert report["metadata"]["config"]["input"] == str(ar1_file)


def test_theta_csv_with_bootstrap(ar1_file, capsys):
    argv = ["theta", "--input", str(ar1_file), "--bootstrap", "100", "--seed", "2"]
    assert main(argv) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[1].split(",")[:3] == ["p", "threshold", "K"]
    assert len(lines) == 3


def test_malformed_input(tmp_path, capsys):
    path = tmp_path / "bad.csv"
    path.write_text("value\n1.0\n2.0\noops\n")
    assert main(["theta", "--input", str(path)]) == 3
    assert "line 4:" in capsys.readouterr().err


def test_threshold_above_maximum(tmp_path):
    path = tmp_path / "short.csv"
    path.write_text("value\n" + "\n".join(str(v) for v in range(100)) + "\n")
    assert main(["theta", "--input", str(path), "-p", "0.999"]) == 3


def test_two_input_sources(ar1_file):
    argv = ["theta", "--input", str(ar1_file), "--process", "ar1", "--n", "100"]
    assert main(argv) == 2


def test_imt_grid(ar1_file, tmp_path):
    out = tmp_path / "grid.csv"
    assert main(["imt-grid", "--input", str(ar1_file), "--out", str(out)]) == 0
    rows = _data_rows(out)
    assert len(rows) == 120
    header = out.read_text().splitlines()[1]
    assert header == "window_center,p,K,N,theta,se,T,pvalue,reliable,flag"
    assert all(row.startswith("none,") for row in rows)


def test_imt_grid_json_recommendation(capsys):
    argv = ["imt-grid", "--process", "ar1", "--n", "8000", "--seed", "3"]
    argv += ["--p-grid", "0.95:0.97:0.01", "--K-grid", "1:3", "--format", "json"]
    assert main(argv) == 0
    report = json.loads(capsys.readouterr().out)
    assert len(report["cells"]) == 9
    assert set(report["recommendation"]) >= {"p", "K", "T", "N", "found", "message"}


def test_sliding(tmp_path):
    series = tmp_path / "dated.csv"
    dates = np.arange(np.datetime64("2000-01-01"), np.datetime64("2006-01-03"))
    values = np.random.default_rng(0).standard_exponential(len(dates))
    series.write_text(
        "date,value\n" + "".join(f"{d},{v:.17g}\n" for d, v in zip(dates, values))
    )
    out = tmp_path / "sliding.csv"
    argv = ["sliding", "--input", str(series), "--window-years", "2", "--step-years", "2"]
    argv += ["--p-grid", "0.9:0.92:0.01", "--K-grid", "1:2", "--out", str(out)]
    assert main(argv) == 0
    rows = _data_rows(out)
    assert len(rows) == 3 * 3 * 2
    assert out.read_text().splitlines()[1].endswith(",flag,fdr_rejected")


def test_sliding_needs_a_full_window(tmp_path):
    argv = ["sliding", "--process", "ar1", "--n", "500", "--window-years", "1000"]
    assert main(argv) == 3


def test_gpd_report_and_diagnostics(tmp_path):
    out = tmp_path / "fit.json"
    argv = ["gpd", "--process", "exact_gpd", "--n", "3000", "--seed", "4", "-p", "0.9"]
    argv += ["--obs-per-year", "100", "--return-period", "10", "--return-level", "200"]
    argv += ["--bootstrap", "20", "--out", str(out)]
    assert main(argv) == 0
    report = json.loads(out.read_text())
    assert report["fit"]["converged"]
    assert len(report["return_levels"]) == 1
    assert report["return_periods"][0]["level"] == 200
    for name in ("mrl", "shape", "scale", "qq", "return_levels"):
        table = tmp_path / f"fit.{name}.csv"
        assert table.exists()
        assert report["diagnostics"][name] == table.name


def test_gpd_return_period_below_threshold():
    argv = ["gpd", "--process", "exact_gpd", "--n", "3000", "--seed", "4"]
    assert main(argv + ["--obs-per-year", "100", "--return-level", "-1"]) == 2


def test_bench(capsys):
    argv = ["bench", "exact_mixture", "--reps", "10", "--n", "3000", "--p-grid", "0.97"]
    assert main(argv) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[1] == "process,estimator,quantile,K,n,reps,median_rel_bias,rmse,seed"
    assert len(lines) == 4


def test_bench_burn_in_changes_the_table(capsys):
    argv = ["bench", "ar1", "--reps", "10", "--n", "3000", "--p-grid", "0.95"]
    tables = []
    for burn_in in ("0", "5000"):
        assert main(argv + ["--burn-in", burn_in]) == 0
        tables.append(capsys.readouterr().out.splitlines())
    assert json.loads(tables[0][0][len(CONFIG_PREFIX) :])["config"]["burn_in"] == 0
    assert tables[0][2:] != tables[1][2:]


def test_bench_unknown_estimator():
    assert main(["bench", "ar1", "--estimators", "runs", "--reps", "10"]) == 2


def test_replay_reproduces_output(ar1_file, tmp_path):
    first = tmp_path / "grid.csv"
    argv = ["imt-grid", "--input", str(ar1_file), "--p-grid", "0.96:0.98:0.01"]
    assert main(argv + ["--K-grid", "1:4", "--out", str(first)]) == 0
    second = tmp_path / "replayed.csv"
    assert main(["replay", str(first), "--out", str(second)]) == 0
    assert second.read_bytes() == first.read_bytes()


def test_replay_of_json_output(tmp_path):
    first = tmp_path / "theta.json"
    argv = ["theta", "--process", "ar2", "--n", "5000", "--seed", "9", "--format", "json"]
    assert main(argv + ["--out", str(first)]) == 0
    second = tmp_path / "replayed.json"
    assert main(["replay", str(first), "--out", str(second)]) == 0
    assert second.read_bytes() == first.read_bytes()


def test_embedded_config_is_resolved(ar1_file, tmp_path):
    out = tmp_path / "grid.csv"
    assert main(["imt-grid", "--input", str(ar1_file), "--out", str(out)]) == 0
    config = RunConfig.from_dict(read_config(out))
    assert config.p_grid == DEFAULT_P_GRID
    assert config.K_grid == DEFAULT_K_GRID
    assert config.j_convention == "squared"


def test_literal_convention_flag(ar1_file, tmp_path):
    out = tmp_path / "grid.csv"
    argv = ["imt-grid", "--input", str(ar1_file), "--literal-appendix-J", "--out", str(out)]
    assert main(argv) == 0
    assert read_config(out)["j_convention"] == "literal"
