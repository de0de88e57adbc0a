import json

import pytest
from click.testing import CliRunner

from tensorcert.classes.certificate import CertifyTolerances
from tensorcert.classes.solution import SolverOptions
from tensorcert.classes.tensor import AtomicMeasure
from tensorcert.cli import main
from tensorcert.nodes.certifier import certify
from tensorcert.services.example_suite import DATA_DIR
from tensorcert.services.report_service import AtomRecord, InputDescriptor, RunReport, build_report
from tensorcert.services.tensor_io import save_tensor


@pytest.fixture
def runner():
    return CliRunner(mix_stderr=False)


@pytest.fixture
def odeco_files(tmp_path, odeco_rank_two, odeco_atoms):
    atoms = AtomicMeasure(odeco_atoms.sorted().atoms[:2])
    sol = odeco_rank_two.solution()
    state = {"solution": sol, "atoms": atoms, "options": SolverOptions(), "tolerances": CertifyTolerances(),
             "certificate": certify(odeco_rank_two.tensor, 2, sol, atoms=atoms)}
    tensor_path = tmp_path / "odeco.json"
    report_path = tmp_path / "report.json"
    save_tensor(odeco_rank_two.tensor, tensor_path)
    report_path.write_text(build_report(odeco_rank_two.tensor, 2, state, source=str(tensor_path)).to_json())
    return tensor_path, report_path


def test_certify_stored_solution(runner, odeco_files):
    tensor_path, report_path = odeco_files
    result = runner.invoke(main, ["certify", str(tensor_path), "--solution", str(report_path)])
    assert result.exit_code == 0, result.stderr
    assert json.loads(result.stdout)["status"] == "QuasiOptimalAlpha"


def test_certify_atoms_only_exits_uncertified(runner, tmp_path, odeco_files, odeco_atoms):
    tensor_path, _ = odeco_files
    report = RunReport(
        input=InputDescriptor(source="odeco", n=3, rank=2, norm=1.0),
        atoms=[AtomRecord(weight=a.weight, vector=a.vector.tolist()) for a in odeco_atoms.sorted().atoms[:2]],
    )
    path = tmp_path / "atoms.json"
    path.write_text(report.to_json())
    result = runner.invoke(main, ["certify", str(tensor_path), "--solution", str(path)])
    assert result.exit_code == 2
    assert "multipliers missing" in result.stdout


def test_certify_dimension_mismatch(runner, odeco_files):
    _, report_path = odeco_files
    result = runner.invoke(main, ["certify", str(DATA_DIR / "example1.json"), "--solution", str(report_path)])
    assert result.exit_code == 1
    assert "n=3" in result.stderr


def test_approx_missing_file(runner, tmp_path):
    result = runner.invoke(main, ["approx", str(tmp_path / "nope.json"), "--rank", "1"])
    assert result.exit_code == 1
    assert "cannot read" in result.stderr


def test_approx_needs_rank(runner):
    result = runner.invoke(main, ["approx", str(DATA_DIR / "example1.json")])
    assert result.exit_code == 2


def test_approx_rank_out_of_range(runner):
    result = runner.invoke(main, ["approx", str(DATA_DIR / "example1.json"), "--rank", "3"])
    assert result.exit_code == 1
    assert "rank" in result.stderr


def test_oracle_rank_one(runner):
    result = runner.invoke(main, ["oracle", str(DATA_DIR / "example1.json")])
    assert result.exit_code == 0, result.stderr
    payload = json.loads(result.stdout)
    assert payload["method"] == "grid+polish"
    assert payload["value"] == pytest.approx(3.2560, abs=1e-3)


def test_oracle_als(runner, odeco_files):
    tensor_path, _ = odeco_files
    result = runner.invoke(main, ["oracle", str(tensor_path), "--mode", "als", "--rank", "2", "--starts", "3"])
    assert result.exit_code == 0, result.stderr
    payload = json.loads(result.stdout)
    assert payload["value"] == pytest.approx(0.5, abs=1e-5)
    assert len(payload["atoms"]) == 2


def test_examples_unknown_number(runner):
    result = runner.invoke(main, ["examples", "--which", "9"])
    assert result.exit_code == 1
    assert "unknown example" in result.stderr


@pytest.mark.slow
def test_approx_example1(runner, tmp_path):
    out = tmp_path / "report.json"
    moments = tmp_path / "y.json"
    result = runner.invoke(main, ["approx", str(DATA_DIR / "example1.json"), "-r", "1", "--format", "json",
                                  "-o", str(out), "--dump-moments", str(moments)])
    assert result.exit_code == 0, result.stderr
    report = json.loads(out.read_text())
    assert report["certificate"]["status"] == "BestRankR"
    assert report["refinement"]["weight"] == pytest.approx(3.2560, abs=1e-3)
    assert len(json.loads(moments.read_text())["y"]) == 15

    again = runner.invoke(main, ["certify", str(DATA_DIR / "example1.json"), "--solution", str(out)])
    assert again.exit_code == 0
