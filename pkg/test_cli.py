import json
import os

import pytest
import yaml

from conftest import v_flow
from irrigation.cli import (EXIT_MALFORMED, EXIT_NOT_CONVERGED, EXIT_OK, EXIT_VIOLATION, main,
                            verify_flow)
from irrigation.config import DEFAULT_CONFIG, load_config
from irrigation.measure_core import AtomicMeasure, PolygonalFlow
from irrigation.measure_core.serialization import load_flow, read_csv, save_flow, save_measure


@pytest.fixture
def v_path(tmp_path):
    path = str(tmp_path / "v.json")
    save_flow(v_flow(), path)
    return path


def test_construct_writes_flow_and_manifest(tmp_path):
    out = str(tmp_path / "square.json")
    assert main(["construct", "--square-to-dirac", "--levels", "2", "-o", out]) == EXIT_OK
    flow = load_flow(out)
    assert len(flow.leaves) == 16
    with open(out + ".manifest.json") as f:
        manifest = json.load(f)
    assert manifest["command"] == "construct"
    assert manifest["config"]["construct"]["levels"] == 2
    assert out in manifest["outputs"]


def test_evaluate(v_path, tmp_path):
    out = str(tmp_path / "v.energy.csv")
    assert main(["evaluate", v_path, "-o", out]) == EXIT_OK
    with open(out) as f:
        lines = f.read().strip().splitlines()
    assert len(lines) == 2


def test_malformed_input(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{\"nodes\": [")
    assert main(["evaluate", str(path)]) == EXIT_MALFORMED


def test_missing_input(tmp_path):
    assert main(["evaluate", str(tmp_path / "absent.json")]) == EXIT_MALFORMED


def test_verify_reports_kirchhoff(tmp_path):
    broken = PolygonalFlow.from_records(
        [(0, (-1, 0), 0.0), (1, (1, 0), 0.0), (2, (0, 0), 1.0), (3, (0, 0), 2.0)],
        [(0, 2, 0.5), (1, 2, 0.5), (2, 3, 0.8)])
    path = str(tmp_path / "broken.json")
    save_flow(broken, path)
    out = str(tmp_path / "broken.verify.json")
    assert main(["verify", path, "-o", out]) == EXIT_VIOLATION
    with open(out) as f:
        report = json.load(f)
    assert any("kirchhoff" in v.lower() for v in report["violations"])


def test_optimize_then_verify_minimizer(v_path, tmp_path):
    out = str(tmp_path / "v.opt.json")
    status = main(["optimize", v_path, "--fix-boundary", "--fix-root", "--max-iters", "5000",
                   "-o", out])
    assert status == EXIT_OK
    assert os.path.exists(str(tmp_path / "v.opt.trace.csv"))
    assert main(["verify", out, "--expect-minimizer"]) == EXIT_OK


def test_late_merge_is_not_a_minimizer(tmp_path):
    path = str(tmp_path / "late.json")
    save_flow(v_flow(tau=1.9), path)
    assert main(["verify", path]) == EXIT_OK
    assert main(["verify", path, "--expect-minimizer"]) == EXIT_VIOLATION


def test_not_converged_exit_code(v_path, tmp_path):
    config = tmp_path / "short.yaml"
    config.write_text(yaml.safe_dump({"optimizer": {"max_iters": 1}}))
    status = main(["optimize", v_path, "--fix-boundary", "--fix-root", "--config", str(config),
                   "-o", str(tmp_path / "short.json")])
    assert status == EXIT_NOT_CONVERGED


def test_conflicting_constraints_are_rejected(v_path):
    assert main(["optimize", v_path, "--fix-boundary", "--mass-simplex"]) == EXIT_MALFORMED


def test_verify_flow_report_sections():
    report = verify_flow(v_flow(eps=0.05), load_config())
    assert report["violations"] == []
    assert {"validation", "bb_gaps", "energy", "equipartition", "first_variation",
            "shrink"} <= set(report)
    assert [entry["node_id"] for entry in report["shrink"]] == [2]


def test_shipped_config_matches_defaults():
    path = os.path.join(os.path.dirname(os.path.abspath(__file__)), "config.yaml")
    assert load_config(path) == DEFAULT_CONFIG


def test_construct_from_measures_and_export_plan(tmp_path):
    source, target = str(tmp_path / "source.json"), str(tmp_path / "target.json")
    save_measure(AtomicMeasure.from_arrays(
        [[-0.25, -0.25], [0.25, -0.25], [-0.25, 0.25], [0.25, 0.25]], [0.25] * 4), source)
    save_measure(AtomicMeasure.dirac(), target)
    out = str(tmp_path / "built.json")
    assert main(["construct", "--source", source, "--target", target, "--levels", "1",
                 "-o", out]) == EXIT_OK
    assert len(load_flow(out).leaves) == 4

    plan = str(tmp_path / "built.plan.csv")
    report = str(tmp_path / "built.verify.json")
    assert main(["verify", out, "--export-plan", plan, "-o", report]) == EXIT_OK
    rows = read_csv(plan)
    assert len(rows) == 4
    assert {r["target"] for r in rows} == {"0"}
    assert sum(float(r["mass"]) for r in rows) == pytest.approx(1.0, abs=1e-12)
    with open(report + ".manifest.json") as f:
        assert plan in json.load(f)["outputs"]


def test_broken_config_is_malformed(v_path, tmp_path):
    config = tmp_path / "broken.yaml"
    config.write_text("optimizer: [1, 2\n")
    assert main(["evaluate", v_path, "--config", str(config)]) == EXIT_MALFORMED
