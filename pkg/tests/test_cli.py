import json
import os

import numpy as np
import pytest

from perfpred.cli import main
from perfpred.pipeline import CVPlan, run_cv
from perfpred.registry import join_scores, load_registry, load_scores
from perfpred.synthdata import GenSpec, gen_registry, write_registry, write_scores


@pytest.fixture(scope="module")
def synth_files(tmp_path_factory):
    root = tmp_path_factory.mktemp("synthio")
    spec = GenSpec(n_models=24, task_id="taskA", missing_rate=0.15,
                   noise_sigma=0.01, feature_effects={"pct_code": 0.003})
    registry, scores, task, _ = gen_registry(spec, seed=12)
    reg_path = root / "registry.json"
    scores_path = root / "scores.csv"
    write_registry(registry, reg_path)
    write_scores(scores, task, scores_path)
    return str(reg_path), str(scores_path)


def test_validate_ok(synth_files, tmp_path, capsys):
    reg, scores = synth_files
    code = main(["validate", "--registry", reg, "--scores", scores,
                 "--out", str(tmp_path)])
    assert code == 0
    assert "no violations" in capsys.readouterr().out
    report = json.loads((tmp_path / "validate.json").read_text())
    assert report["ok"] is True and report["violations"] == []


def test_validate_reports_all_violations(synth_files, tmp_path, capsys):
    _, scores = synth_files
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps([
        {"model_id": "x", "arch": {"activation": "tanh"},
         "data": {"total_tokens_billions": 100.0}},
        {"model_id": "y", "arch": {"total_params": 1e9}, "data": {}},
    ]))
    code = main(["validate", "--registry", str(bad), "--scores", scores,
                 "--out", str(tmp_path)])
    assert code == 1
    out = capsys.readouterr().out
    assert out.count("VIOLATION") >= 3  # both records broken, every problem listed
    report = json.loads((tmp_path / "validate.json").read_text())
    assert not report["ok"] and len(report["violations"]) >= 3


def test_missing_file_is_io_error(tmp_path):
    code = main(["validate", "--registry", str(tmp_path / "absent.json"),
                 "--scores", str(tmp_path / "absent.csv"), "--out", str(tmp_path)])
    assert code == 2


def test_unknown_task_is_failure(synth_files, tmp_path):
    reg, scores = synth_files
    code = main(["encode", "--registry", reg, "--scores", scores,
                 "--task", "nope", "--out", str(tmp_path)])
    assert code == 1


def test_encode_writes_matrix(synth_files, tmp_path):
    reg, scores = synth_files
    code = main(["encode", "--registry", reg, "--scores", scores,
                 "--task", "taskA", "--out", str(tmp_path),
                 "--features", "total_params,activation,pct_code"])
    assert code == 0
    lines = (tmp_path / "features-taskA.csv").read_text().strip().split("\n")
    assert len(lines) == 25  # header + 24 models
    header = lines[0].split(",")
    assert header[0] == "model_id"
    assert "total_params[A]" in header and "activation=gelu[A]" in header
    assert "pct_code[D]" in header


def test_fit_scaling_writes_parameters(synth_files, tmp_path):
    reg, scores = synth_files
    code = main(["fit-scaling", "--registry", reg, "--scores", scores,
                 "--task", "taskA", "--out", str(tmp_path)])
    assert code == 0
    payload = json.loads((tmp_path / "scaling-taskA.json").read_text())
    assert payload["n_models"] == 24
    assert set(payload["power_law"]) == {"Nc", "Dc", "alphaN", "alphaD", "r_squared"}
    assert payload["power_law"]["Nc"] > 0


def test_cv_differential_against_api(synth_files, tmp_path):
    reg, scores_path = synth_files
    code = main(["cv", "--registry", reg, "--scores", scores_path,
                 "--task", "taskA", "--kind", "median", "--seed", "3",
                 "--out", str(tmp_path)])
    assert code == 0
    payload = json.loads((tmp_path / "cv-taskA-median-3.json").read_text())

    registry = load_registry(reg)
    score_rows, tasks = load_scores(scores_path)
    ds = join_scores(registry, score_rows, tasks["taskA"])
    want = run_cv(ds, [], "median", CVPlan(seed=3)).to_dict()
    assert payload == want


def test_cv_output_byte_identical_across_runs(synth_files, tmp_path):
    reg, scores = synth_files
    outputs = []
    for run in range(2):
        out = tmp_path / f"run{run}"
        code = main(["cv", "--registry", reg, "--scores", scores,
                     "--task", "taskA", "--kind", "log_linear",
                     "--out", str(out)])
        assert code == 0
        outputs.append((out / "cv-taskA-log_linear-0.json").read_bytes())
    assert outputs[0] == outputs[1]


def test_cv_reuses_cache(synth_files, tmp_path):
    reg, scores = synth_files
    for _ in range(2):
        assert main(["cv", "--registry", reg, "--scores", scores,
                     "--task", "taskA", "--kind", "median",
                     "--out", str(tmp_path)]) == 0
    cache_files = os.listdir(tmp_path / "cache")
    assert len(cache_files) == 1


def test_compare_small_run(synth_files, tmp_path):
    reg, scores = synth_files
    code = main(["compare", "--registry", reg, "--scores", scores,
                 "--task", "taskA", "--seeds", "2", "--out", str(tmp_path),
                 "--features", "total_params,total_tokens_billions,pct_code"])
    assert code == 0
    payload = json.loads((tmp_path / "compare-taskA.json").read_text())
    assert payload["seeds"] == [0, 1]
    assert len(payload["scaling_mae"]["per_seed"]) == 2
    assert payload["paired_t"]["df"] == 1


def test_plot_data_heatmap_row_count(synth_files, tmp_path):
    reg, scores = synth_files
    code = main(["plot-data", "--registry", reg, "--scores", scores,
                 "--task", "taskA", "--kind", "scaling_heatmap",
                 "--grid", "20", "--out", str(tmp_path)])
    assert code == 0
    lines = (tmp_path / "heatmap-taskA.csv").read_text().strip().split("\n")
    assert len(lines) == 1 + 20 * 20 + 24
    assert sum(1 for l in lines if l.startswith("model,")) == 24


def test_plot_data_dependence_and_errors(synth_files, tmp_path):
    reg, scores = synth_files
    code = main(["plot-data", "--registry", reg, "--scores", scores,
                 "--task", "taskA", "--kind", "shap_dependence",
                 "--feature", "pct_code",
                 "--features", "total_params,total_tokens_billions,pct_code",
                 "--out", str(tmp_path)])
    assert code == 0
    text = (tmp_path / "dependence-taskA-pct_code.csv").read_text()
    assert text.startswith("# missing_rows=")

    code = main(["plot-data", "--registry", reg, "--scores", scores,
                 "--task", "taskA", "--kind", "shap_dependence",
                 "--feature", "no_such_feature",
                 "--features", "total_params,total_tokens_billions",
                 "--out", str(tmp_path)])
    assert code == 1

    code = main(["plot-data", "--registry", reg, "--scores", scores,
                 "--task", "taskA", "--kind", "shap_dependence",
                 "--out", str(tmp_path)])
    assert code == 1  # --feature is required for dependence data


def test_shap_export(synth_files, tmp_path):
    reg, scores = synth_files
    code = main(["shap", "--registry", reg, "--scores", scores,
                 "--task", "taskA", "--out", str(tmp_path),
                 "--features", "total_params,total_tokens_billions,activation"])
    assert code == 0
    matrix = (tmp_path / "shap-taskA.csv").read_text().strip().split("\n")
    # 24 models x (2 numeric + 4 activation levels) + header
    assert len(matrix) == 1 + 24 * 6
    ranking = (tmp_path / "shap-ranking-taskA.csv").read_text().strip().split("\n")
    assert ranking[0] == "feature,mean_abs_phi"
    assert len(ranking) == 4  # aggregated: two scale features + activation


def test_bias_audit_runs(synth_files, tmp_path):
    reg, scores = synth_files
    code = main(["bias-audit", "--registry", reg, "--scores", scores,
                 "--out", str(tmp_path)])
    assert code == 0
    assert (tmp_path / "bias-audit.md").exists()
    payload = json.loads((tmp_path / "bias-audit.json").read_text())
    for row in payload:
        assert row["weight_policy"] == "n_items_binomial_or_uniform"
        assert row["method_chosen"] in ("PET", "PEESE")


def test_report_single_task(synth_files, tmp_path):
    reg, scores = synth_files
    code = main(["report", "--registry", reg, "--scores", scores,
                 "--seeds", "2", "--out", str(tmp_path),
                 "--features", "total_params,total_tokens_billions,pct_code"])
    assert code == 0
    text = (tmp_path / "report.md").read_text()
    assert "taskA" in text
    assert "Scaling Laws MAE" in text
