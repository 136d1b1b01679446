"""Direct kernelized transform learning.

Learns a square transform B over the kernel Gram matrix K(X, X), so the
code of a sample is a thresholded row-combination of its kernel values
against the training set.  This path materializes the full N x N Gram
matrix and is therefore capped at a configurable sample count; past the
cap, use the reduced-rank path in :mod:`ktlearn.ektl`.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, SampleCapExceeded
from .kernels import KernelSpec, cross_gram, data_fingerprint, gram
from .transform import FitReport, TlConfig, fit_transform, hard_threshold

DEFAULT_SAMPLE_CAP = 5000


@dataclass
class KtlModel:
    """A fitted kernel transform, direct or reduced-rank.

    Exactly one parameterization is populated: ``b_full`` (N x N, direct
    path) or ``b_reduced`` with ``basis`` (r x r plus the N x r
    eigenvector block, reduced path).  ``train_samples`` is retained
    because encoding needs kernel values against the training set.
    """

    kernel: KernelSpec
    train_samples: np.ndarray
    threshold: float
    lam: float
    b_full: np.ndarray | None = None
    b_reduced: np.ndarray | None = None
    basis: np.ndarray | None = None

    def __post_init__(self):
        self.train_samples = np.asarray(self.train_samples, dtype=np.float64)
        if self.train_samples.ndim != 2:
            raise DimensionMismatch(
                f"train_samples must be 2-D, got shape {self.train_samples.shape}")
        if self.threshold < 0:
            raise ValueError(f"threshold must be nonnegative, got {self.threshold}")
        if not self.lam > 0:
            raise ValueError(f"lam must be positive, got {self.lam}")
        direct = self.b_full is not None
        reduced = self.b_reduced is not None and self.basis is not None
        if direct == reduced:
            raise ValueError("exactly one of b_full or (b_reduced, basis) must be set")
        n = self.train_samples.shape[1]
        if direct:
            self.b_full = np.asarray(self.b_full, dtype=np.float64)
            if self.b_full.shape != (n, n):
                raise DimensionMismatch(
                    f"b_full must be {n}x{n}, got {self.b_full.shape}")
        else:
            self.b_reduced = np.asarray(self.b_reduced, dtype=np.float64)
            self.basis = np.asarray(self.basis, dtype=np.float64)
            r = self.b_reduced.shape[0]
            if self.b_reduced.shape != (r, r):
                raise DimensionMismatch(
                    f"b_reduced must be square, got {self.b_reduced.shape}")
            if self.basis.shape != (n, r):
                raise DimensionMismatch(
                    f"basis must be {n}x{r}, got {self.basis.shape}")

    @property
    def rank(self) -> int:
        """Code dimension produced by :func:`ktl_encode`."""
        if self.b_full is not None:
            return self.b_full.shape[0]
        return self.b_reduced.shape[0]

    def train_fingerprint(self) -> str:
        """Digest of the retained training samples."""
        return data_fingerprint(self.train_samples)


def fit_ktl(samples: np.ndarray, kernel: KernelSpec, config: TlConfig,
            sample_cap: int = DEFAULT_SAMPLE_CAP
            ) -> tuple[KtlModel, np.ndarray, FitReport]:
    """Fit the direct kernel transform.

    This is transform learning applied verbatim to the Gram matrix: the
    returned ``b_full`` and codes are exactly what
    ``fit_transform(gram(samples, kernel).values, config)`` produces.

    Args:
        samples: n x N training matrix.
        kernel: kernel to apply.
        config: alternation knobs shared with the plain fit.
        sample_cap: refuse to materialize a Gram matrix larger than this.

    Raises:
        SampleCapExceeded: N is past the cap; the message points at the
            reduced-rank path.
    """
    x = np.asarray(samples, dtype=np.float64)
    if x.ndim != 2:
        raise DimensionMismatch(f"samples must be 2-D, got shape {x.shape}")
    n = x.shape[1]
    if n > sample_cap:
        raise SampleCapExceeded(
            f"{n} samples would materialize a {n}x{n} Gram matrix (cap {sample_cap}); "
            f"use the memory-efficient path instead (fit_ektl / --method ektl)")
    k = gram(x, kernel)
    model_t, codes, report = fit_transform(k.values, config)
    model = KtlModel(kernel=kernel, train_samples=x.copy(),
                     threshold=config.threshold, lam=config.lam,
                     b_full=model_t.matrix)
    return model, codes, report


def ktl_encode(model: KtlModel, samples: np.ndarray) -> np.ndarray:
    """Sparse-code new samples through their kernel values.

    Computes k = K(train, samples) column by column, then
    hard_threshold(B k, t).  On the reduced path the product is grouped
    as b_reduced @ (basis.T @ k), costing O(N r + r^2) per sample; the
    r x N matrix b_reduced @ basis.T is never formed.

    Accepts a single vector or a column-major batch; the output keeps the
    input's rank.
    """
    x = np.asarray(samples, dtype=np.float64)
    if x.ndim not in (1, 2):
        raise DimensionMismatch(f"samples must be 1-D or 2-D, got shape {x.shape}")
    if x.shape[0] != model.train_samples.shape[0]:
        raise DimensionMismatch(
            f"model expects {model.train_samples.shape[0]}-dimensional samples, "
            f"got {x.shape[0]}")
    kvals = cross_gram(model.train_samples, x, model.kernel)
    if model.b_full is not None:
        raw = model.b_full @ kvals
    else:
        raw = model.b_reduced @ (model.basis.T @ kvals)
    return hard_threshold(raw, model.threshold)
