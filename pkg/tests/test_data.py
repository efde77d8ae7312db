import logging

import numpy as np
import pytest

from spdddpm import data
from spdddpm.errors import EmptySampleSet, InconsistentDimensions, NoPredictors, NotPositiveDefinite, ParseError
from spdddpm.spd import random_spd


def test_toy_generation(rng):
    spec = data.ToySpec(random_spd(3, rng), sigma=0.1, count=25)
    recs = data.generate_toy(spec, rng)
    assert len(recs) == 25 and recs[0].matrix.shape == (3, 3)
    assert data.generate_toy(data.ToySpec(np.eye(2), count=0), rng) == []


def test_dataset_roundtrip_is_exact(tmp_path, rng):
    recs = [data.MatrixRecord(x, rng.normal(size=2)) for x in random_spd(3, rng, size=5)]
    path = tmp_path / "d.jsonl"
    data.save_dataset(recs, path)
    assert data.load_dataset(path) == recs


def test_parse_error_reports_line(tmp_path):
    path = tmp_path / "bad.jsonl"
    path.write_text('{"matrix": [[1, 0], [0, 1]]}\n{"matrix": [[1, 2], [2, 1]]}\n')
    with pytest.raises(ParseError) as info:
        data.load_dataset(path)
    assert info.value.line_no == 2


def test_malformed_json(tmp_path):
    path = tmp_path / "bad.jsonl"
    path.write_text("{not json\n")
    with pytest.raises(ParseError):
        data.load_dataset(path)


def test_mixed_dimensions(tmp_path):
    path = tmp_path / "mix.jsonl"
    path.write_text('{"matrix": [[1, 0], [0, 1]]}\n{"matrix": [[1]]}\n')
    with pytest.raises(InconsistentDimensions):
        data.load_dataset(path)


def test_mixed_predictor_lengths(tmp_path):
    path = tmp_path / "mix.jsonl"
    path.write_text('{"matrix": [[1]], "predictors": [1]}\n{"matrix": [[1]], "predictors": [1, 2]}\n')
    with pytest.raises(InconsistentDimensions):
        data.load_dataset(path)


def test_diagonal_loading_on_load(tmp_path):
    path = tmp_path / "flow.jsonl"
    path.write_text('{"matrix": [[1, 1], [1, 1]]}\n')
    with pytest.raises(ParseError):
        data.load_dataset(path)
    rec = data.load_dataset(path, diagonal_loading=1e-3)[0]
    assert np.linalg.eigvalsh(rec.matrix)[0] == pytest.approx(1e-3)


def test_ingest_flow_matrix():
    W = np.array([[0.0, 3.0], [3.0, 0.0]])
    with pytest.raises(NotPositiveDefinite):
        data.ingest_flow_matrix(W)
    rec = data.ingest_flow_matrix(np.array([[2.0, 1.0], [1.0, 2.0]]), [1.0])
    assert rec.matrix[0, 0] == pytest.approx(2.001)


def test_standardize_roundtrip_and_zero_variance(caplog):
    recs = [data.MatrixRecord(np.eye(2), [float(i), 5.0]) for i in range(4)]
    with caplog.at_level(logging.WARNING):
        z, means, stds = data.standardize_predictors(recs)
    assert "zero-variance" in caplog.text
    P = np.stack([r.predictors for r in z])
    np.testing.assert_allclose(P[:, 0].mean(), 0.0, atol=1e-15)
    np.testing.assert_allclose(P[:, 0].std(), 1.0)
    np.testing.assert_array_equal(P[:, 1], 0.0)
    back = data.unstandardize_predictors(z, means, stds)
    np.testing.assert_allclose(np.stack([r.predictors for r in back]), np.stack([r.predictors for r in recs]))


def test_standardize_needs_predictors():
    with pytest.raises(NoPredictors):
        data.standardize_predictors([data.MatrixRecord(np.eye(2))])


def test_eval_mean_distance():
    S = [np.diag([np.e, 1.0]), np.diag([1.0, np.e**2])]
    rep = data.eval_mean_distance(S, np.eye(2))
    assert rep.mean_affine_distance == pytest.approx(1.5)
    assert rep.mean == rep.mean_affine_distance
    np.testing.assert_allclose(rep.per_sample, [1.0, 2.0])
    with pytest.raises(EmptySampleSet):
        data.eval_mean_distance([], np.eye(2))


def test_metrics_csv(tmp_path):
    rep = data.eval_mean_distance([np.diag([np.e, 1.0])], np.eye(2))
    path = tmp_path / "m.csv"
    data.write_metrics_csv(rep, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "metric,value"
    assert lines[1] == "mean_affine_distance,1.0"
    assert lines[-1] == "n_samples,1"


def test_heat_csv(tmp_path):
    path = tmp_path / "h.csv"
    data.export_heat_csv(np.eye(2), path)
    assert path.read_text() == "1,0\n0,1\n"
    X = np.array([[2.5, 0.1], [0.1, 1.0]])
    data.export_heat_csv(X, path)
    np.testing.assert_array_equal(data.read_heat_csv(path), X)


def test_center_io(tmp_path, rng):
    X = random_spd(3, rng)
    path = tmp_path / "c.json"
    data.save_center(X, path)
    np.testing.assert_array_equal(data.load_center(path), X)
