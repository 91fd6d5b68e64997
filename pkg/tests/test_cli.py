import json

import numpy as np
import pytest

from mspc.cli import (
    cmd_compare,
    cmd_identify,
    cmd_pipeline,
    cmd_simulate,
    cmd_solve,
    cmd_validate,
    main,
    parse_config,
)
from mspc.errors import DeltaTooSmall
from mspc.system import load_trajectory


def quick_config(**overrides):
    doc = {
        "system": {
            "inline": {
                "A": [[0.85, 0.25], [-0.12, 0.78]],
                "B": [[0.3], [1.0]],
                "E": [[1.0, 0.0], [0.0, 1.0]],
                "sigma_w": [[0.02, 0.0], [0.0, 0.02]],
                "sigma_eps": [[0.0001, 0.0], [0.0, 0.0001]],
            }
        },
        "identification": {"T": 120, "delta": 0.95, "covariance": "oracle"},
        "ocp": {
            "horizon": 4,
            "Q": [[1.0, 0.0], [0.0, 1.0]],
            "R": [[0.2]],
            "h_x": [[0.5, 0.0]],
            "u_min": [-2.0],
            "u_max": [2.0],
            "p": 0.9,
            "x0_mean": [1.2, 0.3],
            "sigma_x0": [[0.01, 0.0], [0.0, 0.01]],
        },
        "validation": {"n_samples": 2000, "master_seed": 7, "margin": 0.01},
        "compare": {
            "n_scenarios": 4,
            "T_sweep": [80, 160],
            "sweep_seeds": 2,
            "p_sweep": [0.8, 0.9],
            "sweep_samples": 2000,
        },
        "master_seed": 11,
        "output_dir": "out",
    }
    doc.update(overrides)
    return doc


def write_config(tmp_path, doc, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc, indent=2))
    return path


def test_config_rejects_delta_below_p(tmp_path):
    doc = quick_config()
    doc["identification"]["delta"] = 0.85  # below p = 0.9
    with pytest.raises(DeltaTooSmall):
        parse_config(doc)
    path = write_config(tmp_path, doc)
    assert main(["pipeline", "--config", str(path), "--out", str(tmp_path / "o")]) == 2


def test_simulate_deterministic_and_shapes(tmp_path):
    doc = quick_config()
    doc["identification"]["T"] = 100
    cfg = parse_config(doc)
    out1, out2 = tmp_path / "a", tmp_path / "b"
    cmd_simulate(cfg, out1)
    cmd_simulate(cfg, out2)
    b1 = (out1 / "trajectory.csv").read_bytes()
    b2 = (out2 / "trajectory.csv").read_bytes()
    assert b1 == b2
    lines = b1.decode().strip().splitlines()
    assert len(lines) == 102  # header + 101 rows for T = 100
    traj = load_trajectory(out1 / "trajectory.csv")
    assert traj.T == 100 and traj.n == 2


def test_identify_writes_estimates(tmp_path):
    cfg = parse_config(quick_config())
    result = cmd_identify(cfg, tmp_path)
    assert result["k_max"] == 4
    docs = json.loads((tmp_path / "estimates.json").read_text())
    assert [d["k"] for d in docs] == [1, 2, 3, 4]
    assert docs[0]["dof"] == 2 * 2 + 2 * 1  # n^2 + n k m at k = 1


def test_pipeline_passes_and_echoes_config(tmp_path):
    doc = quick_config()
    cfg = parse_config(doc)
    report, ok = cmd_pipeline(cfg, tmp_path)
    assert ok
    assert report["passed"]
    assert report["config"] == doc
    assert report["certification"]["certified"]
    for fname in (
        "report.json", "timings.json", "trajectory.csv", "estimates.json",
        "tightening.csv", "program_robust.json", "solution_robust.json",
        "violations_parametric.csv", "violations_true.csv", "system.json",
    ):
        assert (tmp_path / fname).exists(), fname
    on_disk = json.loads((tmp_path / "report.json").read_text())
    assert on_disk["config"] == doc


def test_pipeline_byte_identical_reruns(tmp_path):
    cfg = parse_config(quick_config())
    out1, out2 = tmp_path / "r1", tmp_path / "r2"
    cmd_pipeline(cfg, out1)
    cmd_pipeline(cfg, out2)
    assert (out1 / "report.json").read_bytes() == (out2 / "report.json").read_bytes()
    assert (out1 / "violations_parametric.csv").read_bytes() == (
        out2 / "violations_parametric.csv"
    ).read_bytes()


def test_pipeline_perfect_information_reduction(tmp_path):
    doc = quick_config()
    doc["identification"]["force_zero_cov"] = True
    doc["identification"]["delta"] = 1.0
    cfg = parse_config(doc)
    report, ok = cmd_pipeline(cfg, tmp_path)
    assert ok
    robust_cost = report["robust_solution"]["objective"]
    nominal_cost = report["nominal_on_estimated_model"]["objective"]
    assert abs(robust_cost - nominal_cost) <= 1e-9 * max(1.0, abs(nominal_cost))


def test_delta_one_without_zero_cov_rejected():
    doc = quick_config()
    doc["identification"]["delta"] = 1.0
    with pytest.raises(Exception):
        parse_config(doc)


def test_solve_and_validate_chain(tmp_path):
    cfg = parse_config(quick_config())
    result = cmd_solve(cfg, tmp_path)
    assert result["statespace"]["status"] == "Optimal"
    assert result["multistep"]["status"] == "Optimal"
    assert abs(result["statespace"]["objective"] - result["multistep"]["objective"]) <= 1e-6
    doc, ok = cmd_validate(cfg, tmp_path, solution_path=tmp_path / "solution_statespace.json")
    assert ok
    assert doc["certified"]


def test_validate_solves_nominal_when_no_solution(tmp_path):
    cfg = parse_config(quick_config())
    doc, ok = cmd_validate(cfg, tmp_path)
    assert ok and doc["mode"] == "noise_only"


def test_compare_outputs(tmp_path):
    cfg = parse_config(quick_config())
    doc, ok = cmd_compare(cfg, tmp_path)
    assert ok
    assert doc["equivalence"]["passed"]
    lines = (tmp_path / "tightening_vs_k.csv").read_text().strip().splitlines()
    n_rows = len(json.loads(json.dumps(cfg.raw))["ocp"]["h_x"])
    assert len(lines) == 1 + cfg.ocp_spec.horizon * n_rows
    cost_lines = (tmp_path / "cost_vs_T.csv").read_text().strip().splitlines()
    assert len(cost_lines) == 1 + 2 * 2  # T_sweep x sweep_seeds
    assert (tmp_path / "violation_vs_p.csv").exists()
    assert doc["scenario_baseline"]["status"] == "Optimal"


def test_main_pipeline_exit_code(tmp_path):
    path = write_config(tmp_path, quick_config())
    code = main(["pipeline", "--config", str(path), "--out", str(tmp_path / "out"),
                 "--samples", "2000"])
    assert code == 0


def test_compare_param_terms_shrink_with_more_data(tmp_path):
    doc = quick_config()
    doc["compare"]["T_sweep"] = [60, 400]
    doc["compare"]["sweep_seeds"] = 3
    cfg = parse_config(doc)
    doc_out, _ = cmd_compare(cfg, tmp_path)
    rows = doc_out["cost_vs_T"]
    med = {}
    for t_len in (60, 400):
        med[t_len] = float(np.median([
            r["mean_param_scale"] for r in rows if r["T"] == t_len
        ]))
    assert med[400] < med[60]


def test_pipeline_stage_failure_keeps_partial_artifacts(tmp_path):
    doc = quick_config()
    doc["identification"]["T"] = 5  # far too short: identification must fail
    cfg = parse_config(doc)
    report, ok = cmd_pipeline(cfg, tmp_path)
    assert not ok
    assert not report["passed"]
    assert report["stages"]["identify"]["ok"] is False
    assert "error" in report["stages"]["identify"]
    # Earlier artifacts are retained, the report itself is written.
    assert (tmp_path / "trajectory.csv").exists()
    assert (tmp_path / "system.json").exists()
    assert (tmp_path / "report.json").exists()
    assert not (tmp_path / "solution_robust.json").exists()


def test_pipeline_fir_structure_end_to_end(tmp_path):
    doc = quick_config()
    # FIR-true plant: the one-step map has no state feedback.
    doc["system"]["inline"] = {
        "A": [[0.0, 0.0], [0.0, 0.0]],
        "B": [[0.6], [1.0]],
        "E": [[1.0, 0.0], [0.0, 1.0]],
        "sigma_w": [[0.01, 0.0], [0.0, 0.01]],
        "sigma_eps": [[0.0004, 0.0], [0.0, 0.0004]],
    }
    doc["identification"]["structure"] = "fir"
    doc["ocp"]["x0_mean"] = [0.8, 0.2]
    doc["ocp"]["h_x"] = [[0.6, 0.0]]
    cfg = parse_config(doc)
    report, ok = cmd_pipeline(cfg, tmp_path)
    assert ok, report["stages"]
    assert report["certification"]["certified"]
    ests = json.loads((tmp_path / "estimates.json").read_text())
    assert all(d["structure"] == "fir" for d in ests)
    assert ests[0]["dof"] == 2  # n * k * m at k = 1
