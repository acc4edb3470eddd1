import itertools

import numpy as np
import pytest

import taec


def test_receptive_field():
    assert taec.receptive_field(5, 3) == 63


def test_hungarian_matches_enumeration():
    rng = np.random.default_rng(0)
    cost = rng.integers(0, 50, size=(5, 5)).astype(float)
    perm = taec.hungarian(cost)
    best = min(sum(cost[i, p[i]] for i in range(5)) for p in itertools.permutations(range(5)))
    assert sum(cost[i, perm[i]] for i in range(5)) == best


def test_viterbi_follows_order():
    grid = np.log(np.array([[0.9, 0.1], [0.8, 0.2], [0.1, 0.9], [0.2, 0.8]]))
    labels, score = taec.viterbi_decode(grid, [0, 1])
    assert labels == [0, 0, 1, 1]
    assert score == pytest.approx(np.log(0.9 * 0.8 * 0.9 * 0.8))


def test_metrics_worked_example():
    assert taec.mof([[0, 1, 1, 1]], [[0, 0, 1, 1]]) == 75.0
    assert taec.ciou([[0, 1, 1, 1]], [[0, 0, 1, 1]]) == pytest.approx(58.333, abs=1e-3)
    report = taec.evaluate([[1, 1, 0, 0]], [[0, 0, 1, 1]])
    assert report["mof"] == 100.0
    assert report["per_video"][0]["video_id"] == "video_0"


def test_clustering_and_assignment():
    videos = taec.generate_synthetic(videos=3, actions=3, dim=8, separation=8.0, noise=0.3, seed=4)
    assert len(videos) == 3
    assert videos[0]["features"].shape[1] == 8
    centroids = []
    for v in videos:
        labels, cents, times = taec.within_video_clustering(v["features"], 3, seed=1)
        assert len(labels) == v["features"].shape[0]
        assert cents.shape == (3, 8)
        centroids.append(cents)
    members, cost = taec.assign_clusters(centroids)
    _, optimum = taec.assign_clusters(centroids, "brute_force")
    assert cost >= optimum - 1e-9
    assert sorted(m[0] for m in members) == [0, 1, 2]


def test_errors_are_typed(tmp_path):
    with pytest.raises(taec.DataError):
        taec.load_dataset(tmp_path / "missing.txt")
    with pytest.raises(ValueError):
        taec.hungarian(np.zeros((2, 3)))
    with pytest.raises(taec.UndefinedMetric):
        taec.mof([[0]], [[-1]])


def test_pipeline_end_to_end(tmp_path):
    videos = taec.generate_synthetic(videos=4, actions=3, dim=6, min_length=8, max_length=12, seed=2)
    manifest = taec.save_dataset(videos, tmp_path / "data")
    assert len(taec.load_dataset(manifest)) == 4
    result = taec.run_pipeline(manifest, tmp_path / "out", epochs=2, seed=3, plots=False)
    assert len(result["loss_history"]) == 2
    assert len(result["segments"]) == 4
    assert 0.0 <= result["report"]["mof"] <= 100.0
    assert (tmp_path / "out" / "report.txt").exists()
