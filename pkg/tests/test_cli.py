"""
Command-line runs on small matrix directories
"""

import json

import numpy as np
import pandas as pd
import pytest

from src.cli.commands import build_parser, main
from src.cli.config import RunConfig, load_json
from src.core.errors import InputError
from src.data.artifacts import Artifacts

from .helpers import scalar_riccati


def _run(*argv) -> int:
    return main([str(a) for a in argv])


@pytest.fixture
def stable_pair(write_matrices):
    return write_matrices(F=np.eye(2), A=-np.eye(2), H=[[1.0, 0.0]])


def test_reduce_writes_every_matrix(stable_pair, tmp_path, capsys):
    out = tmp_path / "out"
    assert _run("reduce", "--input-dir", stable_pair, "--output-dir", out) == 0
    for name in Artifacts.REDUCE_OUTPUTS:
        assert (out / Artifacts.matrix_file(name)).exists(), name
    assert (out / Artifacts.RUN_CONFIG).exists()
    assert "Associated LTI: dim 2" in capsys.readouterr().out


def test_malformed_matrix_exits_with_input_error(write_matrices, tmp_path, capsys):
    folder = write_matrices(F=np.eye(2), H=[[1.0, 0.0]])
    (folder / "A_matrix.txt").write_text("1,0\n,1\n")
    assert _run("reduce", "--input-dir", folder, "--output-dir", tmp_path / "out") == 2
    assert "row 2" in capsys.readouterr().err


def test_missing_input_dir_is_an_input_error(tmp_path):
    assert _run("reduce", "--output-dir", tmp_path / "out") == 2


def test_check_observability_of_ode(stable_pair, tmp_path, capsys):
    out = tmp_path / "out"
    assert _run("check-observability", "--input-dir", stable_pair, "--output-dir", out, "--ell", "1,2") == 0
    text = capsys.readouterr().out
    assert text.count("impulse-observable: yes") == 2
    assert "detectable: no" not in text
    report = json.loads((out / Artifacts.CHECK_REPORT).read_text())
    assert report["rank_check"] is True


def test_check_detectability_reports_hautus_test(stable_pair, tmp_path):
    out = tmp_path / "out"
    assert _run("check-detectability", "--input-dir", stable_pair, "--output-dir", out, "--ell", "1") == 0
    assert json.loads((out / Artifacts.CHECK_REPORT).read_text())["hautus_check"] is True


def test_empty_functional_list(stable_pair, tmp_path):
    assert _run("check-observability", "--input-dir", stable_pair, "--output-dir", tmp_path / "o", "--ell", "") == 2


def test_functionals_from_file(stable_pair, tmp_path):
    ells = tmp_path / "ells.csv"
    ells.write_text("1,1\n0,1\n")
    out = tmp_path / "out"
    assert _run("design-infinite", "--input-dir", stable_pair, "--output-dir", out, "--ell", f"@{ells}") == 0
    sigma = pd.read_csv(out / Artifacts.SIGMA_TABLE)
    assert list(sigma["functional"]) == ["ell1", "ell2"]


def test_design_finite_matches_scalar_riccati(write_matrices, tmp_path):
    folder = write_matrices(F=[[1.0]], A=[[-1.0]], H=[[1.0]], Q0=[[1.0]], Q=[[0.5]], R=[[4.0]])
    out = tmp_path / "out"
    code = _run(
        "design-finite", "--input-dir", folder, "--output-dir", out,
        "--ell", "1", "--horizon", "1", "--steps", "1000",
    )
    assert code == 0
    sigma = pd.read_csv(out / Artifacts.SIGMA_TABLE, float_precision="round_trip")
    exact, _, _ = scalar_riccati(-1.0, 1.0, 0.5, 4.0, 1.0)
    assert sigma["sigma"].iloc[0] == pytest.approx(float(exact), rel=1e-6)
    schedule = pd.read_csv(out / Artifacts.GAIN_SCHEDULE)
    assert list(schedule.columns) == ["time", "K_1_1"]
    assert len(schedule) == 1001


def test_design_finite_on_unobservable_functional_is_infeasible(write_matrices, tmp_path, capsys):
    folder = write_matrices(F=[[1.0, 0.0]], A=[[0.0, 1.0]], H=[[0.0, 0.0]])
    assert _run("design-finite", "--input-dir", folder, "--output-dir", tmp_path / "out", "--ell", "1") == 3
    assert "impulse observable" in capsys.readouterr().err


@pytest.mark.parametrize("infinite", [False, True])
def test_estimate_of_zero_output_is_zero(write_matrices, tmp_path, infinite):
    folder = write_matrices(F=[[1.0]], A=[[-1.0]], H=[[1.0]])
    signal = tmp_path / "y.csv"
    times = np.linspace(0.0, 1.0, 101)
    pd.DataFrame({"time": times, "y1": np.zeros_like(times)}).to_csv(signal, index=False)
    out = tmp_path / "out"
    argv = ["estimate", "--input-dir", folder, "--output-dir", out, "--ell", "1", "--signal", signal]
    if infinite:
        argv.append("--infinite")
    assert _run(*argv) == 0
    estimates = pd.read_csv(out / Artifacts.ESTIMATES)
    assert np.all(estimates["e1"].to_numpy() == 0.0)
    assert len(estimates) == (101 if infinite else 1)


def test_estimate_requires_signal(stable_pair, tmp_path):
    assert _run("estimate", "--input-dir", stable_pair, "--output-dir", tmp_path / "out", "--ell", "1") == 2


def test_config_file_and_flag_precedence(stable_pair, tmp_path):
    config = tmp_path / "run.json"
    config.write_text(json.dumps({"input-dir": str(stable_pair), "horizon": 2.0, "steps": 50}))
    cfg = RunConfig.assemble("design-finite", {"steps": 80, "horizon": None}, str(config))
    assert cfg.horizon == 2.0 and cfg.steps == 80
    assert cfg.input_dir == str(stable_pair)


def test_config_rejects_unknown_keys(tmp_path):
    config = tmp_path / "run.json"
    config.write_text(json.dumps({"horizn": 2.0}))
    with pytest.raises(InputError):
        RunConfig.assemble("reduce", {"input_dir": "x"}, str(config))
    assert load_json(str(config)) == {"horizn": 2.0}


def test_heat_demo_rejects_unknown_setting(tmp_path):
    config = tmp_path / "heat.json"
    config.write_text(json.dumps({"heat": {"grid": 3}}))
    assert _run("heat-demo", "--output-dir", tmp_path / "out", "--config", config) == 2


def test_heat_demo_horizon_flag(tmp_path):
    args = build_parser().parse_args(["heat-demo", "--horizon", "0.5"])
    assert args.heat_horizon == 0.5
    config = tmp_path / "heat.json"
    config.write_text(json.dumps({"heat": {"N": 20, "horizon": 3.0}}))
    cfg = RunConfig.assemble("heat-demo", {"heat_horizon": 0.5}, str(config))
    assert cfg.heat == {"N": 20, "horizon": 0.5}
    assert RunConfig.assemble("heat-demo", {"heat_horizon": None}, str(config)).heat["horizon"] == 3.0


def test_design_infinite_writes_observer_matrices(stable_pair, tmp_path):
    out = tmp_path / "out"
    assert _run("design-infinite", "--input-dir", stable_pair, "--output-dir", out, "--ell", "1") == 0
    for name in Artifacts.OBSERVER_OUTPUTS:
        assert (out / Artifacts.matrix_file(name)).exists(), name
