import json
import os

import numpy as np
import pytest

from posealign.cli import EXIT_IO, EXIT_OK, EXIT_USAGE, main


@pytest.fixture(scope="module")
def data_dir(tmp_path_factory):
    out = str(tmp_path_factory.mktemp("cli") / "data")
    rc = main([
        "gen-data", "--out", out, "--seed", "7",
        "--n-examples", "0", "--n-videos", "4", "--frames-per-video", "12",
    ])
    assert rc == EXIT_OK
    return out


@pytest.fixture(scope="module")
def model_path(data_dir, tmp_path_factory):
    path = str(tmp_path_factory.mktemp("cli-model") / "model.bin")
    rc = main([
        "train", "--data", data_dir, "--out", path,
        "--k", "exemplar", "--tau", "0.2", "--epochs", "6",
        "--feature-dim", "32", "--seed", "0",
    ])
    assert rc == EXIT_OK
    assert os.path.exists(path)
    return path


def test_gen_data_deterministic(tmp_path, capsys):
    a, b = str(tmp_path / "a"), str(tmp_path / "b")
    args = ["--seed", "3", "--n-examples", "5"]
    assert main(["gen-data", "--out", a] + args) == EXIT_OK
    assert main(["gen-data", "--out", b] + args) == EXIT_OK
    capsys.readouterr()
    for name in sorted(os.listdir(os.path.join(a, "images"))):
        with open(os.path.join(a, "images", name), "rb") as fa, open(
            os.path.join(b, "images", name), "rb"
        ) as fb:
            assert fa.read() == fb.read()
    with open(os.path.join(a, "manifest.jsonl")) as fa, open(
        os.path.join(b, "manifest.jsonl")
    ) as fb:
        assert fa.read() == fb.read()


def test_unknown_subcommand_is_usage_error(capsys):
    assert main(["frobnicate"]) == EXIT_USAGE
    err = capsys.readouterr().err.strip()
    payload = json.loads(err.splitlines()[-1])
    assert payload["error"] == "usage"


def test_missing_dataset_is_io_error(tmp_path, capsys):
    rc = main(["train", "--data", str(tmp_path / "nope"), "--out", str(tmp_path / "m.bin")])
    assert rc == EXIT_IO
    err = capsys.readouterr().err.strip()
    payload = json.loads(err.splitlines()[-1])
    assert payload["error"] == "io"
    assert "nope" in payload["message"]


def test_cluster_reports_memberships(data_dir, tmp_path, capsys):
    out = str(tmp_path / "clusters.json")
    rc = main(["cluster", "--data", data_dir, "--k", "10", "--tau", "0.3", "--out", out])
    assert rc == EXIT_OK
    summary = json.loads(open(out).read())
    assert summary["k"] == 10
    assert sum(summary["histogram"]) == 48
    line = capsys.readouterr().out.strip().splitlines()[-1]
    assert json.loads(line)["k"] == 10


def test_eval_plain_and_policy_reports(data_dir, model_path, tmp_path, capsys):
    rc = main(["eval", "--data", data_dir, "--model", model_path])
    assert rc == EXIT_OK
    out = capsys.readouterr().out
    assert "mean error" in out

    report = str(tmp_path / "t3.csv")
    rc = main([
        "eval", "--data", data_dir, "--model", model_path,
        "--policy", "1pt", "--occlude", "0.3", "--report", report,
    ])
    assert rc == EXIT_OK
    out = capsys.readouterr().out
    assert out.count("FR[") == 3
    rows = open(report).read().splitlines()
    assert len(rows) == 4  # header + three policies


def test_model_path_env_var(data_dir, model_path, capsys, monkeypatch):
    monkeypatch.setenv("POSEALIGN_MODEL", model_path)
    assert main(["eval", "--data", data_dir]) == EXIT_OK
    capsys.readouterr()
    monkeypatch.delenv("POSEALIGN_MODEL")
    assert main(["eval", "--data", data_dir]) == EXIT_USAGE


def test_config_file_merging_and_unknown_keys(data_dir, tmp_path, capsys):
    cfg = tmp_path / "bench.json"
    cfg.write_text(json.dumps({"dim": 16, "k_grid": "5,50", "repeats": 5,
                               "flops_multiple": 10.0}))
    rc = main(["bench", "--config", str(cfg)])
    assert rc == EXIT_OK
    out = capsys.readouterr().out
    assert "K=      5" in out or "K=     5" in out

    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"dim": 16, "wat": 1}))
    rc = main(["bench", "--config", str(bad)])
    assert rc == EXIT_USAGE
    payload = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert "wat" in payload["message"]


def test_smooth_writes_pts_and_report(data_dir, model_path, tmp_path, capsys):
    out = str(tmp_path / "smoothed")
    rc = main(["smooth", "--data", data_dir, "--model", model_path, "--out", out])
    assert rc == EXIT_OK
    capsys.readouterr()
    report = json.loads(open(os.path.join(out, "report.json")).read())
    assert len(report) == 4
    pts_files = [f for f in os.listdir(out) if f.endswith(".pts")]
    assert len(pts_files) == 48

    from posealign.pts import parse_pts

    parsed = parse_pts(open(os.path.join(out, pts_files[0])).read())
    assert parsed.shape[1] == 2


def test_bench_emits_table(tmp_path, capsys):
    out = str(tmp_path / "bench.csv")
    rc = main(["bench", "--dim", "16", "--k-grid", "5,50", "--repeats", "5",
               "--flops-multiple", "10", "--out", out])
    assert rc == EXIT_OK
    capsys.readouterr()
    rows = open(out).read().splitlines()
    assert rows[0].startswith("k,param_scalars")
    assert len(rows) == 3
