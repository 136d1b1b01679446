"""Nearest-neighbour evaluation and fit benchmarking.

Feature matrices follow the package convention: one sample per column.
Classification is plain k-nearest-neighbour with Euclidean distance and
majority vote; every tie is broken deterministically (equal distances by
training index, equal votes by class id) so repeated runs agree bit for
bit.
"""
from __future__ import annotations

import hashlib
import time
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from .errors import (DimensionMismatch, EmptyInput, EmptyTrainingSet,
                     LengthMismatch)
from .kernels import KernelSpec
from .ktl import fit_ktl, ktl_encode
from .ektl import fit_ektl
from .transform import TlConfig, fit_transform, tl_encode

METHOD_TL = "tl"
METHOD_KTL = "ktl"
METHOD_EKTL = "ektl"

METHODS = (METHOD_TL, METHOD_KTL, METHOD_EKTL)


def knn_classify(train_feats: np.ndarray, train_labels: np.ndarray,
                 test_feats: np.ndarray, k: int = 1) -> np.ndarray:
    """Label test columns by majority vote among the k nearest training columns.

    Distance ties keep the smaller training index (the sort is stable);
    vote ties keep the smaller class id.

    Args:
        train_feats: d x N training feature matrix.
        train_labels: length-N integer labels.
        test_feats: d x M test feature matrix.
        k: neighbourhood size, 1 <= k <= N.

    Returns:
        Length-M int64 prediction vector.
    """
    train = np.asarray(train_feats, dtype=np.float64)
    test = np.asarray(test_feats, dtype=np.float64)
    labels = np.asarray(train_labels, dtype=np.int64)
    if train.ndim != 2 or test.ndim != 2:
        raise DimensionMismatch("feature matrices must be 2-D")
    if train.shape[1] == 0:
        raise EmptyTrainingSet("no training samples to vote with")
    if train.shape[0] != test.shape[0]:
        raise DimensionMismatch(
            f"train features are {train.shape[0]}-dimensional, test {test.shape[0]}")
    if labels.shape != (train.shape[1],):
        raise LengthMismatch(
            f"{labels.shape[0]} labels for {train.shape[1]} training samples")
    if not 1 <= k <= train.shape[1]:
        raise ValueError(f"k must lie in [1, {train.shape[1]}], got {k}")
    dist = cdist(test.T, train.T, metric="sqeuclidean")
    nearest = np.argsort(dist, axis=1, kind="stable")[:, :k]
    preds = np.empty(test.shape[1], dtype=np.int64)
    for i in range(test.shape[1]):
        preds[i] = np.argmax(np.bincount(labels[nearest[i]]))
    return preds


def accuracy(predictions: np.ndarray, truth: np.ndarray) -> float:
    """Exact-match fraction.

    Raises:
        LengthMismatch: the two vectors differ in length.
        EmptyInput: both are empty.
    """
    p = np.asarray(predictions).ravel()
    t = np.asarray(truth).ravel()
    if p.shape[0] != t.shape[0]:
        raise LengthMismatch(f"{p.shape[0]} predictions vs {t.shape[0]} truths")
    if p.shape[0] == 0:
        raise EmptyInput("accuracy over zero samples is undefined")
    return float(np.count_nonzero(p == t)) / p.shape[0]


def confusion_matrix(truth: np.ndarray, predictions: np.ndarray) -> np.ndarray:
    """Square count matrix indexed [true, predicted]."""
    t = np.asarray(truth, dtype=np.int64).ravel()
    p = np.asarray(predictions, dtype=np.int64).ravel()
    if t.shape != p.shape:
        raise LengthMismatch(f"{p.shape[0]} predictions vs {t.shape[0]} truths")
    if t.min(initial=0) < 0 or p.min(initial=0) < 0:
        raise ValueError("class ids must be nonnegative")
    size = int(max(t.max(initial=-1), p.max(initial=-1))) + 1
    out = np.zeros((size, size), dtype=np.int64)
    np.add.at(out, (t, p), 1)
    return out


@dataclass
class EvalResult:
    """Predictions plus the summary statistics derived from them."""

    accuracy: float
    n_test: int
    predictions: np.ndarray
    confusion: np.ndarray


def evaluate_features(train_feats: np.ndarray, train_labels: np.ndarray,
                      test_feats: np.ndarray, test_labels: np.ndarray,
                      k: int = 1) -> EvalResult:
    """Run the k-NN classifier and bundle accuracy, predictions, confusion."""
    preds = knn_classify(train_feats, train_labels, test_feats, k=k)
    truth = np.asarray(test_labels, dtype=np.int64).ravel()
    conf = confusion_matrix(truth, preds)
    n_test = preds.shape[0]
    return EvalResult(accuracy=float(np.trace(conf)) / n_test, n_test=n_test,
                      predictions=preds, confusion=conf)


@dataclass
class TimingReport:
    """Wall-clock cost of one fit, ingestion excluded.

    ``fit_seconds`` wraps only the fit call; the data is already in
    memory when the clock starts.  ``config_digest`` identifies the exact
    configuration so reports from different runs can be matched up.
    """

    method: str
    fit_seconds: float
    encode_seconds_per_1k: float
    n_train: int
    config_digest: str


def config_digest(method: str, config: TlConfig, kernel: KernelSpec | None,
                  rank: int | None, epsilon: float, n_train: int) -> str:
    """Stable short digest of everything that shaped a timed fit."""
    canon = "|".join([
        method,
        f"t={config.threshold!r}", f"lam={config.lam!r}",
        f"iters={config.max_iters}", f"tol={config.rel_tol!r}",
        f"init={config.init}", f"seed={config.seed}",
        f"kernel={kernel}" if kernel is not None else "kernel=none",
        f"rank={rank}", f"eps={epsilon!r}", f"n={n_train}",
    ])
    return hashlib.sha256(canon.encode()).hexdigest()[:16]


def bench_fit(method: str, samples: np.ndarray, config: TlConfig,
              kernel: KernelSpec | None = None, rank: int | None = None,
              epsilon: float = 1.0, sample_cap: int | None = None,
              eig_method: str = "dense") -> TimingReport:
    """Time one fit and one training-set encode for the named method.

    Args:
        method: "tl", "ktl", or "ektl".
        samples: n x N training matrix, already loaded.
        config: alternation knobs.
        kernel: required for the kernel methods.
        rank: reduced rank for "ektl"; defaults to min(n, N).
        epsilon: ADMM coupling weight for "ektl".
        sample_cap: optional override of the direct path's Gram cap.
        eig_method: eigensolver for "ektl", "dense" or "lanczos".

    Returns:
        TimingReport; ``encode_seconds_per_1k`` is normalized to the cost
        of encoding 1000 samples.
    """
    x = np.asarray(samples, dtype=np.float64)
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}, expected one of {METHODS}")
    if method != METHOD_TL and kernel is None:
        raise ValueError(f"method {method!r} needs a kernel")
    n_train = x.shape[1]
    if method == METHOD_TL:
        t0 = time.perf_counter()
        model, _, _ = fit_transform(x, config)
        fit_seconds = time.perf_counter() - t0
        t0 = time.perf_counter()
        tl_encode(model, x)
        encode_seconds = time.perf_counter() - t0
        rank_used = None
    elif method == METHOD_KTL:
        t0 = time.perf_counter()
        if sample_cap is None:
            model, _, _ = fit_ktl(x, kernel, config)
        else:
            model, _, _ = fit_ktl(x, kernel, config, sample_cap=sample_cap)
        fit_seconds = time.perf_counter() - t0
        t0 = time.perf_counter()
        ktl_encode(model, x)
        encode_seconds = time.perf_counter() - t0
        rank_used = None
    else:
        rank_used = min(x.shape) if rank is None else rank
        t0 = time.perf_counter()
        model, _, _ = fit_ektl(x, kernel, rank_used, config, epsilon=epsilon,
                               eig_method=eig_method)
        fit_seconds = time.perf_counter() - t0
        t0 = time.perf_counter()
        ktl_encode(model, x)
        encode_seconds = time.perf_counter() - t0
    per_1k = encode_seconds / (n_train / 1000.0) if n_train else 0.0
    return TimingReport(method=method, fit_seconds=fit_seconds,
                        encode_seconds_per_1k=per_1k, n_train=n_train,
                        config_digest=config_digest(method, config, kernel,
                                                    rank_used, epsilon, n_train))


def eval_records(result: EvalResult, k: int) -> list[str]:
    """Line-delimited rendering of an EvalResult, one metric per line."""
    return [
        f"accuracy\t{result.accuracy:.6f}",
        f"n_test\t{result.n_test}",
        f"k\t{k}",
    ]


def timing_records(report: TimingReport) -> list[str]:
    """Line-delimited rendering of a TimingReport, one metric per line."""
    return [
        f"{report.method}.fit_seconds\t{report.fit_seconds:.6f}",
        f"{report.method}.encode_seconds_per_1k\t{report.encode_seconds_per_1k:.6f}",
        f"{report.method}.n_train\t{report.n_train}",
        f"{report.method}.config_digest\t{report.config_digest}",
    ]
