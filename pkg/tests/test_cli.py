"""Test switching-game CLI."""

import json
from pathlib import Path

import pandas as pd
import pytest
from typer.testing import CliRunner

from switching_game.classify import CostCondition, OrderCase
from switching_game.cli import app
from tests.conftest import CELLS, cell_spec

runner = CliRunner()


def _write_spec(tmp_path: Path, case: OrderCase, condition: CostCondition) -> Path:
    path = tmp_path / f"{case.value}_{condition.value}.json"
    path.write_text(cell_spec(case, condition).model_dump_json())
    return path


def test_help() -> None:
    result = runner.invoke(app, ["--help"])
    assert result.exit_code == 0
    for command in ("solve", "verify", "simulate", "search", "sweep"):
        assert command in result.output


def test_solve_thresholdless(tmp_path: Path) -> None:
    spec = _write_spec(tmp_path, OrderCase.EQ, CostCondition.B1)
    out = tmp_path / "out"
    result = runner.invoke(app, ["solve", "--input", str(spec), "--out", str(out)])
    assert result.exit_code == 0, result.output
    frame = pd.read_csv(out / "solution.csv")
    assert list(frame.columns) == ["x", "v11", "v12", "v21", "v22"]
    assert (frame["v11"] == frame["v22"]).all()
    assert (frame["v12"] == frame["v21"]).all()
    regions = (out / "regions.txt").read_text().splitlines()
    assert all(line.endswith("empty") for line in regions[1:])
    assert (out / "solution.json").exists()


def test_solve_two_thresholds(tmp_path: Path) -> None:
    spec = _write_spec(tmp_path, OrderCase.ROW_GT, CostCondition.B2)
    out = tmp_path / "out"
    result = runner.invoke(app, ["solve", "--input", str(spec), "--out", str(out)])
    assert result.exit_code == 0, result.output
    thresholds = dict(pd.read_csv(out / "thresholds.csv").itertuples(index=False))
    assert set(thresholds) == {"x_A", "x_B", "lambda"}
    assert thresholds["x_A"] < thresholds["x_B"]
    first_value = (out / "thresholds.csv").read_text().splitlines()[1].split(",")[1]
    assert len(first_value.split("e")[0].replace(".", "").lstrip("-")) == 17


def test_malformed_spec(tmp_path: Path) -> None:
    path = tmp_path / "bad.json"
    data = json.loads(cell_spec(OrderCase.EQ, CostCondition.B1).model_dump_json())
    data["c_12"] = 1.0
    path.write_text(json.dumps(data))
    result = runner.invoke(app, ["solve", "--input", str(path), "--out", str(tmp_path / "out")])
    assert result.exit_code == 1
    assert "c_12" in result.output


def test_invalid_assumptions(tmp_path: Path) -> None:
    path = tmp_path / "h3.json"
    path.write_text(cell_spec(OrderCase.EQ, CostCondition.B1).with_cost("c12", -0.5).model_dump_json())
    result = runner.invoke(app, ["solve", "--input", str(path), "--out", str(tmp_path / "out")])
    assert result.exit_code == 1
    assert "H3" in result.output


def test_uncovered_ordering(tmp_path: Path) -> None:
    spec = cell_spec(OrderCase.EQ, CostCondition.B1).model_copy(
        update={"drift": ((0.0, 0.3), (0.3, 0.0))}
    )
    path = tmp_path / "crossed.json"
    path.write_text(spec.model_dump_json())
    result = runner.invoke(app, ["solve", "--input", str(path), "--out", str(tmp_path / "out")])
    assert result.exit_code == 2
    assert "uncovered K ordering" in result.output


@pytest.mark.parametrize(("case", "condition"), CELLS)
def test_verify_round_trip(tmp_path: Path, case: OrderCase, condition: CostCondition) -> None:
    out = tmp_path / "out"
    spec = _write_spec(tmp_path, case, condition)
    assert runner.invoke(app, ["solve", "--input", str(spec), "--out", str(out)]).exit_code == 0
    result = runner.invoke(
        app,
        ["verify", "--input", str(spec), "--out", str(out), "--solution", str(out / "solution.json")],
    )
    assert result.exit_code == 0, result.output
    report = pd.read_csv(out / "qvi_report.csv")
    assert not (report["tag"] == "violation").any()


def test_verify_corrupted_solution(tmp_path: Path) -> None:
    spec = _write_spec(tmp_path, OrderCase.ROW_LT, CostCondition.B1)
    out = tmp_path / "out"
    runner.invoke(app, ["solve", "--input", str(spec), "--out", str(out)])
    data = json.loads((out / "solution.json").read_text())
    data["values"]["11"]["pieces"][0]["coef_mplus"] *= 1.01
    corrupted = tmp_path / "corrupted.json"
    corrupted.write_text(json.dumps(data))
    result = runner.invoke(
        app, ["verify", "--input", str(spec), "--out", str(out), "--solution", str(corrupted)]
    )
    assert result.exit_code == 3


def test_simulate_is_reproducible(tmp_path: Path) -> None:
    spec = _write_spec(tmp_path, OrderCase.ROW_LT, CostCondition.B1)
    common = ["simulate", "--input", str(spec), "--paths", "200", "--dt", "0.01", "--horizon", "20", "--seed", "4"]
    outputs = []
    for run, extra in enumerate(([], [], ["--workers", "2"])):
        out = tmp_path / f"run{run}"
        result = runner.invoke(app, [*common, "--out", str(out), *extra])
        assert result.exit_code == 0, result.output
        outputs.append((out / "estimates.csv").read_bytes())
    assert outputs[0] == outputs[1] == outputs[2]
    header = outputs[0].split(b"\n")[0]
    assert header == b"i,j,x0,mean,std_error,closed_form"


def test_simulate_traces(tmp_path: Path) -> None:
    spec = _write_spec(tmp_path, OrderCase.EQ, CostCondition.B4)
    out = tmp_path / "out"
    result = runner.invoke(
        app,
        ["simulate", "--input", str(spec), "--out", str(out), "--paths", "20", "--dt", "0.01",
         "--horizon", "20", "--traces", "3"],
    )
    assert result.exit_code == 0, result.output
    traces = pd.read_csv(out / "traces.csv")
    assert traces["path"].nunique() == 3


def test_search(tmp_path: Path) -> None:
    spec = _write_spec(tmp_path, OrderCase.ROW_LT, CostCondition.B1)
    out = tmp_path / "out"
    result = runner.invoke(
        app,
        ["search", "--input", str(spec), "--out", str(out), "--grid", "9", "--lo", "1", "--hi", "16",
         "--player-two-never"],
    )
    assert result.exit_code == 0, result.output
    best = pd.read_csv(out / "best.csv")
    assert len(best) == 1
    assert (out / "surface.csv").read_text().startswith("y21,x12_prime,x12,value\n")


def test_sweep(tmp_path: Path) -> None:
    spec = _write_spec(tmp_path, OrderCase.ROW_LT, CostCondition.B1)
    out = tmp_path / "out"
    result = runner.invoke(
        app,
        ["sweep", "--input", str(spec), "--out", str(out), "--cost", "c12", "--start", "0.1",
         "--stop", "0.5", "--num", "5"],
    )
    assert result.exit_code == 0, result.output
    assert len(pd.read_csv(out / "sweep.csv")) == 5
