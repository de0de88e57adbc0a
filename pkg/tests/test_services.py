import csv
import json

import numpy as np
import pytest

from tensorcert.classes.certificate import CertificateStatus, CertifyTolerances
from tensorcert.classes.errors import InputError
from tensorcert.classes.solution import SolverOptions
from tensorcert.classes.tensor import AtomicMeasure
from tensorcert.nodes.certifier import certify
from tensorcert.nodes.odeco import odeco_certificate
from tensorcert.services.example_suite import (
    EXAMPLES,
    SWEEP_HEADER,
    CheckResult,
    ExampleOutcome,
    baseline_checks,
    perturbed,
    render_table,
    run_examples,
    write_sweep_csv,
)
from tensorcert.services.report_service import (
    AtomRecord,
    InputDescriptor,
    RunReport,
    build_report,
    certify_report,
    load_solution,
    render_text,
)
from tensorcert.services.tensor_io import dump_moments, dump_tensor, load_tensor, parse_moments, parse_tensor


def test_parse_tensor_one_based_any_order():
    A = parse_tensor({"n": 2, "entries": [{"idx": [2, 1, 1], "val": 3.0}, {"idx": [2, 2, 2], "val": -1.0}]})
    assert A.entries() == {(0, 0, 0): 0.0, (0, 0, 1): 3.0, (0, 1, 1): 0.0, (1, 1, 1): -1.0}


@pytest.mark.parametrize("payload", [
    '{"n": 2, "entries": [{"idx": [0, 1, 1], "val": 1.0}]}',
    '{"n": 2, "entries": [{"idx": [1, 1, 2], "val": 1.0}, {"idx": [2, 1, 1], "val": 2.0}]}',
    '{"n": 2, "entries": [{"idx": [1, 1, 3], "val": 1.0}]}',
    '{"n": 2, "entries": [{"idx": [1, 1], "val": 1.0}]}',
    '{"n": 0, "entries": []}',
    "not json",
])
def test_parse_tensor_rejects_bad_files(payload):
    with pytest.raises(InputError):
        parse_tensor(payload)


def test_load_missing_file(tmp_path):
    with pytest.raises(InputError, match="cannot read"):
        load_tensor(tmp_path / "missing.json")


def test_dump_keeps_nonzero_entries(example1):
    payload = json.loads(dump_tensor(example1))
    assert payload["n"] == 2
    assert [e["idx"] for e in payload["entries"]] == [[1, 1, 1], [1, 1, 2], [1, 2, 2], [2, 2, 2]]
    assert parse_tensor(payload).entries() == example1.entries()


def test_moment_file(odeco_rank_two):
    y = odeco_rank_two.y
    parsed = parse_moments(dump_moments(y))
    assert (parsed.n, parsed.k) == (3, 2)
    np.testing.assert_allclose(parsed.values, y.values)
    with pytest.raises(InputError):
        parse_moments('{"n": 3, "k": 2, "y": [1.0]}')


def test_perturbed(example1):
    np.testing.assert_allclose(perturbed(example1, 0.5).values, example1.values + 0.5)
    shifted = perturbed(example1, 0.1, {"1,2,2": -1.0, "2,2,2": 1.0})
    np.testing.assert_allclose(shifted.values, [2.0, 1.0, 0.9, 1.1])


def _state(cert, atoms):
    sol = cert.solution()
    return {
        "solution": sol,
        "atoms": atoms,
        "certificate": certify(cert.tensor, cert.r, sol, atoms=atoms),
        "options": SolverOptions(),
        "tolerances": CertifyTolerances(),
        "refinement": {"kind": "coefficients", "residual": 0.5},
        "timings": {"solve": 0.1},
    }


def test_report_round_trip(odeco_rank_two, odeco_atoms):
    atoms = AtomicMeasure(odeco_atoms.sorted().atoms[:2])
    report = build_report(odeco_rank_two.tensor, 2, _state(odeco_rank_two, atoms), source="odeco", seed=4)
    text = report.to_json()
    assert "timings" not in json.loads(text)
    assert "timings" in json.loads(report.to_json(timings=True))

    restored = RunReport.from_json(text)
    assert restored.input.n == 3
    assert restored.solution.has_multipliers
    sol, loaded_atoms, has_multipliers = load_solution(restored, odeco_rank_two.tensor)
    assert has_multipliers
    np.testing.assert_allclose(sol.U, odeco_rank_two.U)
    assert len(loaded_atoms) == 2
    certificate = certify_report(restored, odeco_rank_two.tensor)
    assert certificate.status == report.certificate.status == CertificateStatus.QUASI_OPTIMAL


def test_atoms_only_report_is_never_certified(odeco_rank_two, odeco_atoms):
    top = odeco_atoms.sorted().atoms[:2]
    report = RunReport(
        input=InputDescriptor(source="odeco", n=3, rank=2, norm=1.0),
        atoms=[AtomRecord(weight=a.weight, vector=a.vector.tolist()) for a in top],
    )
    certificate = certify_report(report, odeco_rank_two.tensor)
    assert certificate.status == CertificateStatus.UNCERTIFIED
    assert certificate.reason == "multipliers missing: gap-only evaluation"
    assert certificate.diagnostics.residual == pytest.approx(0.5, abs=1e-8)


def test_report_errors(odeco_rank_two):
    with pytest.raises(InputError, match="malformed"):
        RunReport.from_json('{"atoms": "nope"}')
    with pytest.raises(InputError, match="rank"):
        certify_report(RunReport(atoms=[AtomRecord(weight=1.0, vector=[1.0, 0.0, 0.0])]), odeco_rank_two.tensor)
    with pytest.raises(InputError, match="neither"):
        load_solution(RunReport(), odeco_rank_two.tensor)
    with pytest.raises(InputError, match="dimension"):
        load_solution(RunReport(atoms=[AtomRecord(weight=1.0, vector=[1.0, 0.0])]), odeco_rank_two.tensor)


def test_render_text(odeco_rank_two, odeco_atoms):
    atoms = AtomicMeasure(odeco_atoms.sorted().atoms[:2])
    text = render_text(build_report(odeco_rank_two.tensor, 2, _state(odeco_rank_two, atoms)))
    assert "Certificate: QuasiOptimalAlpha" in text
    assert "Atom 2:" in text
    assert "[pass] duality_gap" in text


def test_sweep_csv(tmp_path):
    rows = [{"epsilon": 1e-6, "lambda": 3.256, "x1": 0.798, "x2": 0.6025, "certified": True}]
    path = tmp_path / "sweep.csv"
    write_sweep_csv(rows, path)
    with open(path) as f:
        content = list(csv.reader(f))
    assert tuple(content[0]) == SWEEP_HEADER
    assert float(content[1][1]) == pytest.approx(3.256)


def test_render_table_and_outcome():
    outcome = ExampleOutcome(example=1, title="t", checks=[
        CheckResult(name="weight", expected=1.0, observed=1.0, passed=True),
        CheckResult(name="status", expected="BestRankR", observed="Uncertified", passed=False),
    ])
    assert not outcome.passed
    table = render_table([outcome])
    assert "PASS" in table and "FAIL" in table


def test_baseline_checks_compare_against_als(odeco_atoms):
    exact = odeco_certificate(odeco_atoms, 2, 0.0)
    checks = baseline_checks(exact.tensor, 2, certify(exact.tensor, 2, exact.solution()), starts=5, seed=3)
    assert [c.name for c in checks] == ["residual_vs_als", "solver_status"]
    assert all(c.passed for c in checks)

    shrunk = odeco_certificate(odeco_atoms, 2, 0.1)
    residual, status = baseline_checks(shrunk.tensor, 2, certify(shrunk.tensor, 2, shrunk.solution()),
                                       starts=5, seed=3)
    assert not residual.passed
    assert status.passed


def test_golden_covers_every_example(golden):
    assert {f"example{i}" for i in EXAMPLES} <= set(golden)


def test_unknown_example():
    with pytest.raises(InputError, match="unknown example"):
        run_examples([9])


@pytest.mark.slow
@pytest.mark.parametrize("number", [1, 3, 4, 5])
def test_examples_reproduce(number, tmp_path):
    outcome, = run_examples([number], starts=2, out_dir=tmp_path)
    failed = [c.name for c in outcome.checks if not c.passed]
    assert not failed, failed

