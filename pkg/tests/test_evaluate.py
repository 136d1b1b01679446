"""Classifier, accuracy, confusion, and benchmark harness tests."""
import numpy as np
import numpy.testing as npt
import pytest

from ktlearn.errors import (DimensionMismatch, EmptyInput, EmptyTrainingSet,
                            LengthMismatch)
from ktlearn.evaluate import (EvalResult, TimingReport, accuracy, bench_fit,
                              config_digest, confusion_matrix, eval_records,
                              evaluate_features, knn_classify, timing_records)
from ktlearn.kernels import KernelSpec
from ktlearn.transform import TlConfig


def _brute_knn(train, labels, test, k):
    preds = np.empty(test.shape[1], dtype=np.int64)
    for j in range(test.shape[1]):
        d = np.sum((train - test[:, j:j + 1]) ** 2, axis=0)
        order = np.argsort(d, kind="stable")[:k]
        votes = np.bincount(labels[order])
        preds[j] = votes.argmax()
    return preds


@pytest.mark.parametrize("k", [1, 3, 5])
def test_knn_matches_brute_force(k):
    rng = np.random.default_rng(31)
    train = rng.normal(size=(4, 40))
    labels = rng.integers(0, 3, size=40)
    test = rng.normal(size=(4, 15))
    npt.assert_array_equal(knn_classify(train, labels, test, k=k),
                           _brute_knn(train, labels, test, k))


def test_knn_distance_ties_pick_the_earliest_training_sample():
    train = np.array([[1.0, 1.0, 5.0]])  # samples 0 and 1 coincide
    labels = np.array([2, 1, 0])
    test = np.array([[1.0]])
    assert knn_classify(train, labels, test, k=1)[0] == 2


def test_knn_vote_ties_pick_the_smallest_class():
    # two neighbours at equal distance with one vote each
    train = np.array([[0.0, 2.0]])
    labels = np.array([3, 1])
    test = np.array([[1.0]])
    assert knn_classify(train, labels, test, k=2)[0] == 1


def test_knn_input_validation():
    train = np.ones((3, 5))
    labels = np.zeros(5, dtype=np.int64)
    test = np.ones((3, 2))
    with pytest.raises(EmptyTrainingSet):
        knn_classify(np.ones((3, 0)), np.zeros(0, dtype=np.int64), test)
    with pytest.raises(DimensionMismatch):
        knn_classify(train, labels, np.ones((4, 2)))
    with pytest.raises(LengthMismatch):
        knn_classify(train, np.zeros(4, dtype=np.int64), test)
    with pytest.raises(ValueError):
        knn_classify(train, labels, test, k=0)
    with pytest.raises(ValueError):
        knn_classify(train, labels, test, k=6)


def test_accuracy_counts_exact_matches():
    assert accuracy(np.array([1, 2, 3, 4]),
                    np.array([1, 0, 3, 0])) == pytest.approx(0.5)
    with pytest.raises(LengthMismatch):
        accuracy(np.array([1]), np.array([1, 2]))
    with pytest.raises(EmptyInput):
        accuracy(np.array([]), np.array([]))


def test_confusion_matrix_counts_pairs():
    truth = np.array([0, 0, 1, 2, 2, 2])
    preds = np.array([0, 1, 1, 2, 0, 2])
    conf = confusion_matrix(truth, preds)
    npt.assert_array_equal(conf, [[1, 1, 0], [0, 1, 0], [1, 0, 2]])


def test_evaluate_features_combines_the_pieces():
    rng = np.random.default_rng(37)
    train = rng.normal(size=(3, 30))
    labels = rng.integers(0, 2, size=30)
    result = evaluate_features(train, labels, train, labels, k=1)
    assert isinstance(result, EvalResult)
    assert result.accuracy == 1.0  # every sample is its own neighbour
    assert result.n_test == 30
    assert result.confusion.trace() == 30


def test_config_digest_is_stable_and_sensitive():
    cfg = TlConfig(threshold=0.5, lam=1.0, max_iters=10, rel_tol=0.0)
    spec = KernelSpec()
    d1 = config_digest("ktl", cfg, spec, None, 1.0, 100)
    assert d1 == config_digest("ktl", cfg, spec, None, 1.0, 100)
    assert len(d1) == 16
    assert int(d1, 16) >= 0  # hex
    assert d1 != config_digest("tl", cfg, None, None, 1.0, 100)
    assert d1 != config_digest("ktl", cfg, spec, None, 1.0, 101)
    assert d1 != config_digest("ktl", cfg, spec, 5, 1.0, 100)


def test_bench_fit_times_each_method():
    rng = np.random.default_rng(41)
    x = rng.normal(size=(5, 30))
    x /= np.linalg.norm(x, axis=0)
    cfg = TlConfig(threshold=0.8, lam=1.0, max_iters=5, rel_tol=0.0)
    rep = bench_fit("tl", x, cfg)
    assert isinstance(rep, TimingReport)
    assert rep.method == "tl"
    assert rep.fit_seconds > 0
    assert rep.encode_seconds_per_1k > 0
    assert rep.n_train == 30
    rep_k = bench_fit("ktl", x, cfg, kernel=KernelSpec())
    assert rep_k.fit_seconds > 0
    rep_e = bench_fit("ektl", x, cfg, kernel=KernelSpec(), rank=4)
    assert rep_e.fit_seconds > 0
    assert rep_e.config_digest != rep_k.config_digest


def test_bench_fit_validation():
    x = np.ones((3, 4))
    cfg = TlConfig(threshold=0.5)
    with pytest.raises(ValueError):
        bench_fit("svm", x, cfg)
    with pytest.raises(ValueError):
        bench_fit("ktl", x, cfg)  # kernel missing


def test_record_rendering():
    result = EvalResult(accuracy=0.9375, n_test=16,
                        predictions=np.zeros(16, dtype=np.int64),
                        confusion=np.eye(2, dtype=np.int64))
    lines = eval_records(result, k=3)
    assert lines[0] == "accuracy\t0.937500"
    assert "n_test\t16" in lines
    assert "k\t3" in lines
    rep = TimingReport(method="tl", fit_seconds=1.25,
                       encode_seconds_per_1k=0.5, n_train=100,
                       config_digest="abcd" * 4)
    lines = timing_records(rep)
    assert lines[0] == "tl.fit_seconds\t1.250000"
    assert all(line.split("\t")[0].startswith("tl.") for line in lines)
