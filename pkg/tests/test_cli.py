import json

import numpy as np
import pytest

from spdddpm import cli, data
from spdddpm.spd import random_spd


@pytest.fixture
def workdir(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    return tmp_path


def run(*argv):
    return cli.main(list(argv))


def test_gen_toy(workdir, capsys):
    assert run("gen-toy", "--dim", "3", "--sigma", "0.1", "--count", "500", "--out", "toy.jsonl") == 0
    assert len((workdir / "toy.jsonl").read_text().splitlines()) == 500
    assert (workdir / "center.json").exists()
    assert f"seed {cli.DEFAULT_SEED}" in capsys.readouterr().out


def test_pipeline(workdir):
    assert run("gen-toy", "--dim", "2", "--count", "60") == 0
    assert run("train", "--data", "toy.jsonl", "--T", "5", "--epochs", "1") == 0
    assert (workdir / "checkpoint.json").exists()
    assert (workdir / "loss.csv").read_text().startswith("epoch,step,loss")
    assert run("sample", "--n", "7") == 0
    assert len((workdir / "samples.jsonl").read_text().splitlines()) == 7
    assert run("eval", "--ref", "center.json") == 0
    assert (workdir / "metrics.csv").read_text().startswith("metric,value\nmean_affine_distance,")


def test_same_seed_same_checkpoint(workdir):
    run("gen-toy", "--dim", "2", "--count", "40")
    run("train", "--data", "toy.jsonl", "--T", "5", "--epochs", "1", "--checkpoint", "a.json")
    run("train", "--data", "toy.jsonl", "--T", "5", "--epochs", "1", "--checkpoint", "b.json")
    assert (workdir / "a.json").read_bytes() == (workdir / "b.json").read_bytes()


def test_conditional_predict(workdir, rng):
    recs = [data.MatrixRecord(x, [float(i % 2), 3.0]) for i, x in enumerate(random_spd(2, rng, size=40))]
    data.save_dataset(recs, workdir / "cond.jsonl")
    assert run("train", "--data", "cond.jsonl", "--T", "4", "--epochs", "1", "--standardize") == 0
    extra = json.loads((workdir / "checkpoint.json").read_text())["extra"]
    assert extra["predictor_stds"][1] == 0.0
    assert run("predict", "--y", "1,3", "--n-samples", "4", "--heat-csv", "heat.csv") == 0
    M = data.load_center(workdir / "prediction.json")
    np.testing.assert_allclose(data.read_heat_csv(workdir / "heat.csv"), M)
    assert run("predict", "--y", "1", "--n-samples", "4") == cli.EXIT_USAGE


def test_config_file_and_flag_precedence(workdir):
    (workdir / "cfg.toml").write_text('seed = 3\n[gen-toy]\ndim = 2\ncount = 11\nout = "a.jsonl"\n')
    assert run("gen-toy", "--config", "cfg.toml", "--count", "5") == 0
    assert len((workdir / "a.jsonl").read_text().splitlines()) == 5
    assert data.load_dataset(workdir / "a.jsonl")[0].matrix.shape == (2, 2)


def test_unknown_config_key_names_field(workdir, capsys):
    (workdir / "cfg.toml").write_text("[gen-toy]\nbogus = 1\n")
    assert run("gen-toy", "--config", "cfg.toml") == cli.EXIT_USAGE
    assert "bogus" in capsys.readouterr().err


def test_bad_config_type(workdir, capsys):
    (workdir / "cfg.toml").write_text('[gen-toy]\ndim = "three"\n')
    assert run("gen-toy", "--config", "cfg.toml") == cli.EXIT_USAGE
    assert "dim" in capsys.readouterr().err


def test_invalid_value_does_not_touch_files(workdir, capsys):
    assert run("gen-toy", "--sigma", "-1", "--out", "x.jsonl") == cli.EXIT_USAGE
    assert "sigma" in capsys.readouterr().err
    assert not (workdir / "x.jsonl").exists()
    assert not (workdir / "center.json").exists()


def test_missing_required(workdir, capsys):
    assert run("train") == cli.EXIT_USAGE
    assert "data" in capsys.readouterr().err


def test_usage_error_exit_code(workdir):
    with pytest.raises(SystemExit) as info:
        run("no-such-mode")
    assert info.value.code == cli.EXIT_USAGE


def test_data_errors(workdir):
    assert run("train", "--data", "missing.jsonl") == cli.EXIT_DATA
    (workdir / "bad.jsonl").write_text('{"matrix": [[1, 2], [2, 1]]}\n')
    assert run("train", "--data", "bad.jsonl") == cli.EXIT_DATA


def test_threads_env(workdir, monkeypatch):
    monkeypatch.setenv("SPDDDPM_THREADS", "zero")
    assert run("prop-check") == cli.EXIT_USAGE
    monkeypatch.setenv("SPDDDPM_THREADS", "1")
    assert run("prop-check") == 0


def test_prop_check(workdir, capsys):
    assert run("prop-check", "--seed", "0") == 0
    out = capsys.readouterr().out
    assert "[FAIL]" not in out and "passed" in out


def test_grad_check(workdir, capsys):
    assert run("grad-check", "--dim", "4", "--seed", "7") == 0
    last = capsys.readouterr().out.strip().splitlines()[-1]
    assert float(last.split("max error")[1]) < 1e-4
