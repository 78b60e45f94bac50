"""
Tests for stochastic inference, aggregation and confidence
"""
import math

import numpy as np
import pytest

from tgt.core.config import BinSpec, InferenceSettings
from tgt.core.exceptions import PipelineError
from tgt.models import TGT
from tgt.services import inference
from tgt.services.inference import PredictionSampleSet


@pytest.fixture
def models(make_config):
    distance_model = TGT(make_config(), np.random.default_rng(1))
    task_model = TGT(make_config(), np.random.default_rng(2))
    task_model.set_target_stats(10.0, 2.0)
    return distance_model, task_model


def test_aggregates():
    samples = PredictionSampleSet(0, [1.0, 2.0, 9.0])
    assert samples.mean == 4.0
    assert samples.median == 2.0
    assert samples.aggregate("median") == 2.0
    assert samples.confidence == pytest.approx(1.0 / np.std([1.0, 2.0, 9.0]))
    with pytest.raises(PipelineError):
        samples.aggregate("max")


def test_single_sample():
    samples = PredictionSampleSet(0, [3.5])
    assert samples.mean == samples.median == samples.mode == 3.5
    assert samples.confidence is None
    assert math.isnan(inference.normalize_confidence([samples])[0])


def test_identical_samples_have_infinite_confidence():
    samples = PredictionSampleSet(0, [2.0, 2.0, 2.0])
    assert samples.confidence == math.inf
    assert inference.normalize_confidence([samples])[0] == 1.0


def test_mode_finds_the_dominant_cluster(rng):
    samples = np.concatenate([rng.normal(0.0, 0.1, 700), rng.normal(5.0, 0.1, 300)])
    sample_set = PredictionSampleSet(0, samples)
    assert abs(sample_set.mode) < abs(sample_set.mean)
    assert abs(sample_set.mode) < 0.3


def test_empty_sample_set():
    with pytest.raises(PipelineError):
        PredictionSampleSet(0, [])


def build_sets():
    return [
        PredictionSampleSet(0, [1.0, 1.0], target=1.0),
        PredictionSampleSet(1, [0.0, 2.0], target=1.0),
        PredictionSampleSet(2, [0.0, 4.0], target=1.0),
        PredictionSampleSet(3, [0.0, 8.0], target=1.0),
    ]


def test_normalized_confidence():
    normalized = inference.normalize_confidence(build_sets())
    np.testing.assert_allclose(normalized, [1.0, 1.0, 1.0 / 3.0, 0.0])


def test_confidence_curve_counts():
    rows = inference.confidence_curve(build_sets(), [0.0, 0.5], ewt_threshold=0.1)
    assert [r["count"] for r in rows] == [4, 2]
    assert rows[0]["fraction"] == 1.0
    assert rows[1]["mae"] == 0.0
    assert rows[1]["ewt"] == 100.0


def test_variance_slope():
    counts = [1, 2, 4, 8, 16]
    spreads = [2.0 * k**-0.5 for k in counts]
    assert inference.variance_slope(counts, spreads) == pytest.approx(-0.5, abs=1e-12)
    assert math.isnan(inference.variance_slope([1, 2], [0.0, 0.0]))


def test_threads_reproduce_sequential_run(models, graphs):
    distance_model, task_model = models
    sequential = inference.run_inference(distance_model, task_model, graphs[:2], 3, 7, workers=1)
    threaded = inference.run_inference(distance_model, task_model, graphs[:2], 3, 7, workers=3)
    for a, b in zip(sequential, threaded):
        assert a.graph_id == b.graph_id
        assert np.array_equal(a.samples, b.samples)
        assert a.target == b.target


def test_passes_differ_between_samples(models, graph):
    distance_model, task_model = models
    samples = inference.stochastic_inference(distance_model, task_model, graph, 4, base_seed=1)
    assert samples.k == 4
    assert len(np.unique(samples.samples)) > 1


def test_edge_task_is_rejected(make_config, graph, models):
    distance_model, _ = models
    edge_model = TGT(make_config(task="edge"))
    with pytest.raises(PipelineError):
        inference.predict_once(distance_model, edge_model, graph, np.random.default_rng(0))


def test_mismatched_bins_are_rejected(make_config, graph, models):
    distance_model, _ = models
    task_model = TGT(make_config(bins=BinSpec(num_bins=8)))
    with pytest.raises(PipelineError):
        inference.run_inference(distance_model, task_model, [graph], 2, 0)


def test_sample_count_curve(models, graphs):
    distance_model, task_model = models
    report = inference.sample_count_curve(
        distance_model, task_model, graphs[:2], [1, 2, 4], repeats=2, base_seed=0
    )
    assert [row["k"] for row in report.rows] == [1, 2, 4]
    assert all(row["aggregate_std"] >= 0.0 for row in report.rows)


def test_reports_are_written(tmp_path):
    settings = InferenceSettings(confidence_thresholds=[0.0, 0.5])
    paths = inference.write_inference_reports(build_sets(), settings, tmp_path)
    predictions = paths["predictions"].read_text().splitlines()
    assert predictions[0] == ",".join(inference.PREDICTION_COLUMNS)
    assert len(predictions) == 5
    curve = paths["confidence_curve"].read_text().splitlines()
    assert curve[0] == ",".join(inference.CONFIDENCE_COLUMNS)
    assert len(curve) == 3
