"""Square sparsifying transform learning.

Fits T and sparse codes Z to data X by alternating minimization of

    || T X - Z ||_F^2  +  lam * (||T||_F^2 - log det T)  +  t^2 * ||Z||_0

where t is the user-facing hard threshold (the l0 weight is its square).
Both alternation steps are exact minimizers: the code step is an
elementwise hard threshold and the transform step has a closed form
built from a Cholesky factor and one SVD.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular

from .errors import (CholeskyFailure, DimensionMismatch, NonFiniteObjective,
                     SingularTransform)

INIT_IDENTITY = "identity"
INIT_RANDOM_ORTHOGONAL = "random_orthogonal"

_INITS = (INIT_IDENTITY, INIT_RANDOM_ORTHOGONAL)


@dataclass(frozen=True)
class TlConfig:
    """Knobs for one alternating fit.

    Attributes:
        threshold: hard-threshold level t >= 0; the l0 weight is t**2.
        lam: regularization weight on ||T||_F^2 - log det T, must be > 0.
        max_iters: cap on alternation sweeps.
        rel_tol: stop once the objective's relative change drops below this.
        init: "identity" or "random_orthogonal".
        seed: RNG seed for the random-orthogonal init.
    """

    threshold: float
    lam: float = 1.0
    max_iters: int = 50
    rel_tol: float = 1e-6
    init: str = INIT_IDENTITY
    seed: int = 0

    def __post_init__(self):
        if self.threshold < 0:
            raise ValueError(f"threshold must be nonnegative, got {self.threshold}")
        if not self.lam > 0:
            raise ValueError(f"lam must be positive, got {self.lam}")
        if self.max_iters < 1:
            raise ValueError(f"max_iters must be at least 1, got {self.max_iters}")
        if self.rel_tol < 0:
            raise ValueError(f"rel_tol must be nonnegative, got {self.rel_tol}")
        if self.init not in _INITS:
            raise ValueError(f"init must be one of {_INITS}, got {self.init!r}")


@dataclass
class TransformModel:
    """A fitted encode map: code = hard_threshold(matrix @ x, threshold).

    Fits always produce a square nonsingular matrix; a rectangular matrix
    only appears when a projection was composed in for encode-only use.
    """

    matrix: np.ndarray
    threshold: float
    lam: float

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=np.float64)
        if self.matrix.ndim != 2:
            raise DimensionMismatch(
                f"transform must be 2-D, got shape {self.matrix.shape}")
        if self.threshold < 0:
            raise ValueError(f"threshold must be nonnegative, got {self.threshold}")
        if not self.lam > 0:
            raise ValueError(f"lam must be positive, got {self.lam}")


@dataclass
class FitReport:
    """What happened during one fit.

    ``objective_trace`` holds the objective after each full sweep and is
    non-increasing (within floating-point slack) whenever both alternation
    steps are exact, i.e. for the plain and direct-kernel fits.
    """

    objective_trace: np.ndarray
    iterations_run: int
    converged: bool
    wall_time_seconds: float
    code_density: float


def hard_threshold(values: np.ndarray, threshold: float) -> np.ndarray:
    """Zero every entry with magnitude strictly below ``threshold``.

    Entries exactly at the threshold survive.  This is the exact l0
    proximal map: per scalar v it minimizes (v - z)^2 + threshold^2 * [z != 0]
    over z in {0, v}.
    """
    if threshold < 0:
        raise ValueError(f"threshold must be nonnegative, got {threshold}")
    v = np.asarray(values, dtype=np.float64)
    return np.where(np.abs(v) >= threshold, v, 0.0)


def seeded_orthogonal(m: int, seed: int) -> np.ndarray:
    """Deterministic random orthogonal matrix with determinant +1."""
    rng = np.random.default_rng(seed)
    q, r = np.linalg.qr(rng.standard_normal((m, m)))
    signs = np.sign(np.diag(r))
    q = q * np.where(signs == 0, 1.0, signs)
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


def regularized_cholesky(data: np.ndarray, lam: float) -> np.ndarray:
    """Lower Cholesky factor of ``data @ data.T + lam * I``.

    Raises:
        CholeskyFailure: the factorization failed, which signals a
            non-positive ``lam`` or NaN contamination in the data.
    """
    if not lam > 0:
        raise CholeskyFailure(f"regularization weight must be positive, got {lam}")
    scatter = data @ data.T
    scatter[np.diag_indices_from(scatter)] += lam
    if not np.isfinite(scatter).all():
        raise CholeskyFailure("scatter matrix contains NaN or infinity")
    try:
        return np.linalg.cholesky(scatter)
    except np.linalg.LinAlgError as exc:
        raise CholeskyFailure(f"scatter matrix is not positive definite: {exc}") from None


def transform_update(data: np.ndarray, codes: np.ndarray, lam: float,
                     chol: np.ndarray | None = None) -> np.ndarray:
    """Closed-form transform step for fixed codes.

    Factors X X^T + lam I = L L^T, takes the full SVD
    L^-1 X Z^T = Q S R^T, and returns

        T = 0.5 * R (S + (S^2 + 2 lam I)^(1/2)) Q^T L^-1,

    the stationary point of the smooth objective piece.  A zero product
    matrix is given Q = R = I to pin down its degenerate SVD.

    When det(Q) det(R) = -1 the formula as printed has negative
    determinant and the log-det objective would be infinite there, so the
    smallest singular direction takes the negative root of its scalar
    stationarity equation instead, 0.5 * (s - sqrt(s^2 + 2 lam)).  That
    point is the exact minimizer over positively-oriented transforms:
    flipping any direction costs more the larger its singular value, so
    the cheapest odd flip is one flip on the smallest.

    Args:
        data: m x N sample matrix X.
        codes: m x N code matrix Z.
        lam: positive regularization weight.
        chol: optional precomputed Cholesky factor of X X^T + lam I.

    Returns:
        The m x m updated transform.
    """
    x = np.asarray(data, dtype=np.float64)
    z = np.asarray(codes, dtype=np.float64)
    if x.ndim != 2 or z.shape != x.shape:
        raise DimensionMismatch(
            f"data shape {x.shape} and code shape {z.shape} must match")
    m = x.shape[0]
    ell = regularized_cholesky(x, lam) if chol is None else chol
    product = solve_triangular(ell, x @ z.T, lower=True)
    if product.any():
        q, s, rt = np.linalg.svd(product)
        orientation = np.linalg.slogdet(q)[0] * np.linalg.slogdet(rt)[0]
    else:
        q = np.eye(m)
        s = np.zeros(m)
        rt = np.eye(m)
        orientation = 1.0
    mid = 0.5 * (s + np.sqrt(s * s + 2.0 * lam))
    if orientation < 0:
        mid[-1] = 0.5 * (s[-1] - np.sqrt(s[-1] ** 2 + 2.0 * lam))
    w = (rt.T * mid) @ q.T
    return solve_triangular(ell, w.T, lower=True, trans="T").T


def tl_objective(t_mat: np.ndarray, data: np.ndarray, codes: np.ndarray,
                 lam: float, threshold: float) -> float:
    """Full objective value at (T, Z).

    Returns +inf when det T <= 0; the determinant is taken through a
    sign-robust log-determinant so very large transforms do not overflow.
    """
    t_mat = np.asarray(t_mat, dtype=np.float64)
    x = np.asarray(data, dtype=np.float64)
    z = np.asarray(codes, dtype=np.float64)
    if t_mat.ndim != 2 or t_mat.shape[0] != t_mat.shape[1]:
        raise DimensionMismatch(f"transform must be square, got {t_mat.shape}")
    if x.ndim != 2 or x.shape[0] != t_mat.shape[1] or z.shape != (t_mat.shape[0], x.shape[1]):
        raise DimensionMismatch(
            f"incompatible shapes: T {t_mat.shape}, X {x.shape}, Z {z.shape}")
    sign, logdet = np.linalg.slogdet(t_mat)
    if sign <= 0:
        return float("inf")
    resid = t_mat @ x - z
    value = (float(np.sum(resid * resid))
             + lam * (float(np.sum(t_mat * t_mat)) - logdet)
             + threshold ** 2 * np.count_nonzero(z))
    return float(value)


def tl_gradient_T(t_mat: np.ndarray, data: np.ndarray, codes: np.ndarray,
                  lam: float) -> np.ndarray:
    """Gradient of the smooth objective piece with respect to T.

        2 (T X - Z) X^T + 2 lam T - lam T^-T

    Raises:
        SingularTransform: T is not invertible.
    """
    t_mat = np.asarray(t_mat, dtype=np.float64)
    x = np.asarray(data, dtype=np.float64)
    z = np.asarray(codes, dtype=np.float64)
    try:
        inv_t = np.linalg.inv(t_mat)
    except np.linalg.LinAlgError:
        raise SingularTransform("gradient requested at a singular transform") from None
    return 2.0 * (t_mat @ x - z) @ x.T + 2.0 * lam * t_mat - lam * inv_t.T


def relative_change(previous: float, current: float) -> float:
    """|current - previous| scaled by |previous| (floored away from zero)."""
    return abs(current - previous) / max(abs(previous), 1e-300)


def initial_transform(m: int, config: TlConfig) -> np.ndarray:
    if config.init == INIT_IDENTITY:
        return np.eye(m)
    return seeded_orthogonal(m, config.seed)


def fit_transform(data: np.ndarray, config: TlConfig
                  ) -> tuple[TransformModel, np.ndarray, FitReport]:
    """Alternating fit of a square transform and sparse codes.

    Sweeps Z <- hard_threshold(T X, t) then T <- transform_update(X, Z, lam)
    until the objective's relative change drops below ``config.rel_tol``
    or ``config.max_iters`` sweeps have run.  After the loop the codes are
    refreshed once against the final transform, so the returned codes are
    exactly what encoding the training data with the returned model gives.

    Returns:
        (model, codes, report) with codes shaped like ``data``.
    """
    x = np.asarray(data, dtype=np.float64)
    if x.ndim != 2:
        raise DimensionMismatch(f"data must be 2-D, got shape {x.shape}")
    start = time.perf_counter()
    t_mat = initial_transform(x.shape[0], config)
    ell = regularized_cholesky(x, config.lam)
    trace: list[float] = []
    converged = False
    iterations = 0
    for iterations in range(1, config.max_iters + 1):
        z = hard_threshold(t_mat @ x, config.threshold)
        t_mat = transform_update(x, z, config.lam, chol=ell)
        value = tl_objective(t_mat, x, z, config.lam, config.threshold)
        if np.isnan(value):
            raise NonFiniteObjective(f"objective became NaN at sweep {iterations}")
        trace.append(value)
        if len(trace) >= 2 and relative_change(trace[-2], trace[-1]) < config.rel_tol:
            converged = True
            break
    z = hard_threshold(t_mat @ x, config.threshold)
    report = FitReport(objective_trace=np.asarray(trace),
                       iterations_run=iterations,
                       converged=converged,
                       wall_time_seconds=time.perf_counter() - start,
                       code_density=np.count_nonzero(z) / z.size if z.size else 0.0)
    model = TransformModel(matrix=t_mat, threshold=config.threshold, lam=config.lam)
    return model, z, report


def tl_encode(model: TransformModel, samples: np.ndarray) -> np.ndarray:
    """Sparse-code new samples: hard_threshold(matrix @ samples, threshold).

    Accepts a single vector or a column-major batch; the output keeps the
    input's rank.
    """
    x = np.asarray(samples, dtype=np.float64)
    if x.ndim not in (1, 2):
        raise DimensionMismatch(f"samples must be 1-D or 2-D, got shape {x.shape}")
    rows = x.shape[0]
    if rows != model.matrix.shape[1]:
        raise DimensionMismatch(
            f"model expects {model.matrix.shape[1]}-dimensional samples, got {rows}")
    return hard_threshold(model.matrix @ x, model.threshold)
