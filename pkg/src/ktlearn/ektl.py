"""Memory-efficient kernelized transform learning.

Replaces the N x N Gram matrix with its best rank-r PSD approximation
K ~ U diag(w) U^T and learns a square r x r transform in the reduced
frame: the model's prediction for the training set is B' (w * U^T), an
r x N matrix, so after the one-time eigendecomposition no N x N array
is ever touched.  The code step cannot use a plain hard threshold here
(the codes it thresholds are tied to the reduced frame through U), so it
runs a short ADMM splitting with a sparse proxy variable instead.
"""
from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
import scipy.sparse.linalg

from .errors import DimensionMismatch, NonFiniteObjective, RankExceedsN
from .kernels import GramMatrix, KernelSpec, gram
from .ktl import KtlModel
from .transform import (FitReport, TlConfig, hard_threshold, initial_transform,
                        regularized_cholesky, relative_change, tl_objective,
                        transform_update)

EIG_DENSE = "dense"
EIG_LANCZOS = "lanczos"


@dataclass
class EigFactors:
    """Top eigenpairs of a Gram matrix, eigenvalues descending.

    ``basis`` is N x r with orthonormal columns; ``eigvals`` is length r,
    nonnegative (small negative values from floating point are clamped).
    """

    basis: np.ndarray
    eigvals: np.ndarray

    def __post_init__(self):
        self.basis = np.asarray(self.basis, dtype=np.float64)
        self.eigvals = np.asarray(self.eigvals, dtype=np.float64)
        if self.basis.ndim != 2 or self.eigvals.ndim != 1:
            raise DimensionMismatch("basis must be 2-D and eigvals 1-D")
        if self.basis.shape[1] != self.eigvals.shape[0]:
            raise DimensionMismatch(
                f"{self.basis.shape[1]} eigenvectors but {self.eigvals.shape[0]} eigenvalues")

    @property
    def rank(self) -> int:
        return self.eigvals.shape[0]


def truncated_eig(k: GramMatrix | np.ndarray, r: int,
                  method: str = EIG_DENSE) -> EigFactors:
    """Top-r eigenpairs of a symmetric PSD matrix.

    The dense method takes the full symmetric eigendecomposition and keeps
    the top block; the lanczos method uses an iterative solver and is
    worthwhile when r << N.  Eigenvector signs are fixed so each column's
    largest-magnitude entry is positive, and at r = N the basis is further
    oriented to determinant +1, so a full-rank factorization composes with
    a positively-oriented transform.

    Args:
        k: GramMatrix or a symmetric N x N array.
        r: number of eigenpairs, 1 <= r <= N.
        method: "dense" or "lanczos".

    Raises:
        RankExceedsN: r is outside [1, N].
    """
    values = k.values if isinstance(k, GramMatrix) else np.asarray(k, dtype=np.float64)
    if values.ndim != 2 or values.shape[0] != values.shape[1]:
        raise DimensionMismatch(f"matrix must be square, got shape {values.shape}")
    n = values.shape[0]
    if r < 1 or r > n:
        raise RankExceedsN(f"rank {r} outside [1, {n}]")
    if method == EIG_LANCZOS and r < n:
        v0 = np.full(n, 1.0 / np.sqrt(n))
        w, u = scipy.sparse.linalg.eigsh(values, k=r, which="LA", v0=v0)
        order = np.argsort(w)[::-1]
        w = w[order]
        u = u[:, order]
    elif method in (EIG_DENSE, EIG_LANCZOS):
        w, u = np.linalg.eigh(values)
        w = w[::-1][:r].copy()
        u = u[:, ::-1][:, :r].copy()
    else:
        raise ValueError(f"unknown eigensolver method {method!r}")
    np.maximum(w, 0.0, out=w)
    # sign convention: largest-magnitude entry of each eigenvector positive
    anchor = np.abs(u).argmax(axis=0)
    flips = np.sign(u[anchor, np.arange(r)])
    u = u * np.where(flips == 0, 1.0, flips)
    if r == n and np.linalg.det(u) < 0:
        u[:, -1] = -u[:, -1]
    return EigFactors(basis=u, eigvals=w)


@dataclass
class AdmmState:
    """Splitting variables for the reduced-frame code step.

    All three matrices are r x N: ``codes_reduced`` is the least-squares
    variable, ``proxy`` the sparse copy it is pushed toward, ``dual`` the
    scaled multiplier tracking their gap.
    """

    codes_reduced: np.ndarray
    proxy: np.ndarray
    dual: np.ndarray
    epsilon: float = 1.0
    inner_iters: int = 10

    def __post_init__(self):
        self.codes_reduced = np.asarray(self.codes_reduced, dtype=np.float64)
        self.proxy = np.asarray(self.proxy, dtype=np.float64)
        self.dual = np.asarray(self.dual, dtype=np.float64)
        if not (self.codes_reduced.shape == self.proxy.shape == self.dual.shape):
            raise DimensionMismatch("codes_reduced, proxy, and dual must share a shape")
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if self.inner_iters < 1:
            raise ValueError(f"inner_iters must be at least 1, got {self.inner_iters}")

    @classmethod
    def cold(cls, r: int, n: int, epsilon: float = 1.0,
             inner_iters: int = 10) -> "AdmmState":
        """All-zero state for a fresh fit."""
        return cls(codes_reduced=np.zeros((r, n)), proxy=np.zeros((r, n)),
                   dual=np.zeros((r, n)), epsilon=epsilon, inner_iters=inner_iters)


def reduced_prediction(b_reduced: np.ndarray, eig: EigFactors) -> np.ndarray:
    """The model's reconstruction target B' (w * U^T), an r x N matrix."""
    return b_reduced @ (eig.eigvals[:, np.newaxis] * eig.basis.T)


def admm_code_update(b_reduced: np.ndarray, eig: EigFactors, state: AdmmState,
                     threshold: float) -> AdmmState:
    """One code step: ``inner_iters`` sweeps of the three-part splitting.

    Per sweep, with A = B' (w * U^T) fixed and eps the coupling weight:

        codes   <- (A + eps * (proxy - dual)) / (1 + eps)
        proxy   <- hard_threshold(codes + dual, threshold / sqrt(eps))
        dual    <- dual + codes - proxy

    The first line is the exact least-squares minimizer of
    ||A - Z'||_F^2 + eps * ||proxy - Z' - dual||_F^2; the second is the
    exact l0 proximal map under the coupling weight, which rescales the
    keep/kill level to threshold / sqrt(eps); the third is standard
    scaled multiplier ascent.

    Returns:
        A new AdmmState; the input state is not modified.
    """
    a = reduced_prediction(b_reduced, eig)
    if a.shape != state.codes_reduced.shape:
        raise DimensionMismatch(
            f"prediction shape {a.shape} does not match state {state.codes_reduced.shape}")
    eps = state.epsilon
    level = threshold / np.sqrt(eps)
    codes = state.codes_reduced
    proxy = state.proxy
    dual = state.dual
    for _ in range(state.inner_iters):
        codes = (a + eps * (proxy - dual)) / (1.0 + eps)
        proxy = hard_threshold(codes + dual, level)
        dual = dual + codes - proxy
    return AdmmState(codes_reduced=codes, proxy=proxy, dual=dual,
                     epsilon=eps, inner_iters=state.inner_iters)


def _initial_reduced(eig: EigFactors, config: TlConfig) -> np.ndarray:
    """Starting B' for the reduced alternation.

    Below full rank the configured init is taken in the reduced frame
    directly.  At r = N the reduced model can represent any full
    transform, so the init is mapped through the basis (B0 @ U) and the
    effective transform B' U^T starts exactly at the configured B0.
    """
    r = eig.rank
    n = eig.basis.shape[0]
    if r == n:
        return initial_transform(n, config) @ eig.basis
    return initial_transform(r, config)


def _reduced_alternation(eig: EigFactors, config: TlConfig, epsilon: float,
                         inner_iters: int
                         ) -> tuple[np.ndarray, AdmmState, list[float], int, bool]:
    """Alternation loop shared by fit_ektl and the allocation tests."""
    data_eff = eig.eigvals[:, np.newaxis] * eig.basis.T
    b_reduced = _initial_reduced(eig, config)
    ell = regularized_cholesky(data_eff, config.lam)
    state = AdmmState.cold(eig.rank, eig.basis.shape[0], epsilon=epsilon,
                           inner_iters=inner_iters)
    trace: list[float] = []
    converged = False
    iterations = 0
    for iterations in range(1, config.max_iters + 1):
        state = admm_code_update(b_reduced, eig, state, config.threshold)
        b_reduced = transform_update(data_eff, state.codes_reduced, config.lam,
                                     chol=ell)
        value = tl_objective(b_reduced, data_eff, state.proxy, config.lam,
                             config.threshold)
        if np.isnan(value):
            raise NonFiniteObjective(f"objective became NaN at sweep {iterations}")
        trace.append(value)
        if len(trace) >= 2 and relative_change(trace[-2], trace[-1]) < config.rel_tol:
            converged = True
            break
    # refresh so the returned codes pair with the final transform
    state = admm_code_update(b_reduced, eig, state, config.threshold)
    return b_reduced, state, trace, iterations, converged


def fit_ektl(samples: np.ndarray, kernel: KernelSpec, r: int, config: TlConfig,
             epsilon: float = 1.0, inner_iters: int = 10,
             eig_method: str = EIG_DENSE
             ) -> tuple[KtlModel, np.ndarray, FitReport]:
    """Fit the reduced-rank kernel transform.

    Assembles the Gram matrix once, truncates it to its top-r eigenpairs,
    and alternates the closed-form transform update against the ADMM code
    step, all in the r-dimensional frame.  The returned codes are the
    sparse proxy after a final refresh against the final transform.

    Args:
        samples: n x N training matrix.
        kernel: kernel to apply.
        r: reduced rank, 1 <= r <= N.
        config: alternation knobs shared with the plain fit.
        epsilon: ADMM coupling weight.
        inner_iters: splitting sweeps per code step.
        eig_method: "dense" or "lanczos".

    Returns:
        (model, codes, report) with r x N codes.
    """
    x = np.asarray(samples, dtype=np.float64)
    if x.ndim != 2:
        raise DimensionMismatch(f"samples must be 2-D, got shape {x.shape}")
    start = time.perf_counter()
    eig = truncated_eig(gram(x, kernel), r, method=eig_method)
    b_reduced, state, trace, iterations, converged = _reduced_alternation(
        eig, config, epsilon, inner_iters)
    codes = state.proxy
    report = FitReport(objective_trace=np.asarray(trace),
                       iterations_run=iterations,
                       converged=converged,
                       wall_time_seconds=time.perf_counter() - start,
                       code_density=np.count_nonzero(codes) / codes.size
                       if codes.size else 0.0)
    model = KtlModel(kernel=kernel, train_samples=x.copy(),
                     threshold=config.threshold, lam=config.lam,
                     b_reduced=b_reduced, basis=eig.basis)
    return model, codes, report
