"""Kernel functions and Gram matrix assembly.

Three families are supported: linear ``<x, y>``, polynomial
``(gain * <x, y> + coef0) ** degree``, and rbf ``exp(-gamma * ||x - y||^2)``.
Gram matrices are assembled in column tiles to bound peak memory, then
symmetrized, and carry a fingerprint of the sample matrix they came from
so a model can be checked against the data it was trained on.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch

LINEAR = "linear"
POLYNOMIAL = "polynomial"
RBF = "rbf"

_FAMILIES = (LINEAR, POLYNOMIAL, RBF)

# A Gram matrix is accepted as PSD when its smallest eigenvalue is no
# lower than -PSD_TOL_FACTOR times its trace.
PSD_TOL_FACTOR = 1e-8

DEFAULT_TILE = 1024


@dataclass(frozen=True)
class KernelSpec:
    """Immutable description of one kernel function.

    Attributes:
        family: one of "linear", "polynomial", "rbf".
        degree: polynomial exponent (polynomial family only).
        gain: multiplier on the inner product (polynomial family only).
        coef0: additive constant inside the power (polynomial family only).
        gamma: width of the rbf exponential (rbf family only).
    """

    family: str = POLYNOMIAL
    degree: int = 4
    gain: float = 1.0
    coef0: float = 1.0
    gamma: float = 1.0

    def __post_init__(self):
        if self.family not in _FAMILIES:
            raise ValueError(f"unknown kernel family {self.family!r}")
        if self.family == POLYNOMIAL:
            if int(self.degree) != self.degree or self.degree < 1:
                raise ValueError(f"degree must be a positive integer, got {self.degree}")
        if self.family == RBF and not self.gamma > 0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")

    def __str__(self) -> str:
        if self.family == LINEAR:
            return "linear"
        if self.family == POLYNOMIAL:
            return f"poly:{int(self.degree)}:{self.gain:g}:{self.coef0:g}"
        return f"rbf:{self.gamma:g}"


def parse_kernel_spec(text: str) -> KernelSpec:
    """Parse the CLI kernel grammar.

    Accepted forms: ``linear``, ``poly[:degree[:gain[:coef0]]]``
    (``polynomial`` works too), and ``rbf[:gamma]``.
    """
    parts = text.strip().split(":")
    family = parts[0].lower()
    args = parts[1:]
    try:
        if family == "linear":
            if args:
                raise ValueError("linear kernel takes no parameters")
            return KernelSpec(family=LINEAR)
        if family in ("poly", "polynomial"):
            if len(args) > 3:
                raise ValueError("too many polynomial parameters")
            degree = int(args[0]) if len(args) > 0 else 4
            gain = float(args[1]) if len(args) > 1 else 1.0
            coef0 = float(args[2]) if len(args) > 2 else 1.0
            return KernelSpec(family=POLYNOMIAL, degree=degree, gain=gain, coef0=coef0)
        if family == "rbf":
            if len(args) > 1:
                raise ValueError("too many rbf parameters")
            gamma = float(args[0]) if args else 1.0
            return KernelSpec(family=RBF, gamma=gamma)
    except ValueError as exc:
        raise ValueError(f"bad kernel spec {text!r}: {exc}") from None
    raise ValueError(f"bad kernel spec {text!r}: unknown family {family!r}")


@dataclass(frozen=True)
class GramMatrix:
    """Symmetrized kernel matrix plus the kernel parameters and data fingerprint behind it."""

    values: np.ndarray
    spec: KernelSpec
    fingerprint: str

    @property
    def n(self) -> int:
        return self.values.shape[0]


def data_fingerprint(samples: np.ndarray) -> str:
    """Hex digest identifying a float64 sample matrix by shape and bytes."""
    arr = np.ascontiguousarray(samples, dtype=np.float64)
    digest = hashlib.sha256()
    digest.update(repr(arr.shape).encode())
    digest.update(arr.tobytes())
    return digest.hexdigest()


def kernel_value(x: np.ndarray, y: np.ndarray, spec: KernelSpec) -> float:
    """Evaluate the kernel on a single pair of vectors.

    Raises:
        DimensionMismatch: the two vectors differ in length.
    """
    x = np.asarray(x, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    if x.shape[0] != y.shape[0]:
        raise DimensionMismatch(
            f"vectors of length {x.shape[0]} and {y.shape[0]} cannot be paired")
    if spec.family == LINEAR:
        return float(x @ y)
    if spec.family == POLYNOMIAL:
        return float((spec.gain * (x @ y) + spec.coef0) ** int(spec.degree))
    diff = x - y
    return float(np.exp(-spec.gamma * (diff @ diff)))


def _kernel_block(x: np.ndarray, y: np.ndarray, spec: KernelSpec,
                  self_offset: int | None = None) -> np.ndarray:
    """Kernel values between all columns of x and all columns of y.

    ``self_offset`` marks y as the columns ``x[:, self_offset:...]`` so the
    rbf branch can pin the squared distance of each self-pair to exactly 0.
    """
    inner = x.T @ y
    if spec.family == LINEAR:
        return inner
    if spec.family == POLYNOMIAL:
        return (spec.gain * inner + spec.coef0) ** int(spec.degree)
    sq = (np.einsum("ij,ij->j", x, x)[:, np.newaxis]
          + np.einsum("ij,ij->j", y, y)[np.newaxis, :]
          - 2.0 * inner)
    np.maximum(sq, 0.0, out=sq)
    if self_offset is not None:
        cols = np.arange(y.shape[1])
        sq[self_offset + cols, cols] = 0.0
    return np.exp(-spec.gamma * sq)


def gram(samples: np.ndarray, spec: KernelSpec, tile: int = DEFAULT_TILE) -> GramMatrix:
    """Assemble the N x N kernel matrix of a sample matrix against itself.

    The matrix is built one column tile at a time (``tile`` columns per
    pass) and symmetrized as (K + K^T) / 2 before it is returned.

    Args:
        samples: n x N matrix, one sample per column.
        spec: kernel to evaluate.
        tile: number of columns assembled per pass.

    Returns:
        GramMatrix with symmetric float64 values.
    """
    x = np.asarray(samples, dtype=np.float64)
    if x.ndim != 2:
        raise DimensionMismatch(f"samples must be 2-D, got shape {x.shape}")
    if tile < 1:
        raise ValueError(f"tile must be positive, got {tile}")
    n = x.shape[1]
    k = np.empty((n, n), dtype=np.float64)
    for j0 in range(0, n, tile):
        j1 = min(j0 + tile, n)
        k[:, j0:j1] = _kernel_block(x, x[:, j0:j1], spec, self_offset=j0)
    k = 0.5 * (k + k.T)
    return GramMatrix(values=k, spec=spec, fingerprint=data_fingerprint(x))


def cross_gram(train: np.ndarray, test: np.ndarray, spec: KernelSpec,
               tile: int = DEFAULT_TILE) -> np.ndarray:
    """Kernel values between training columns and test columns.

    Args:
        train: n x N training matrix.
        test: n x M test matrix, or a single length-n vector.

    Returns:
        N x M matrix (N-vector when ``test`` was 1-D) of kernel values,
        not symmetrized.
    """
    x = np.asarray(train, dtype=np.float64)
    y = np.asarray(test, dtype=np.float64)
    squeeze = y.ndim == 1
    if squeeze:
        y = y[:, np.newaxis]
    if x.ndim != 2 or y.ndim != 2:
        raise DimensionMismatch("train and test must be 2-D sample matrices")
    if x.shape[0] != y.shape[0]:
        raise DimensionMismatch(
            f"train has {x.shape[0]} features, test has {y.shape[0]}")
    m = y.shape[1]
    out = np.empty((x.shape[1], m), dtype=np.float64)
    for j0 in range(0, m, tile):
        j1 = min(j0 + tile, m)
        out[:, j0:j1] = _kernel_block(x, y[:, j0:j1], spec)
    return out[:, 0] if squeeze else out


def min_eigenvalue(k: GramMatrix | np.ndarray) -> float:
    """Smallest eigenvalue of a symmetric matrix (for PSD checks)."""
    values = k.values if isinstance(k, GramMatrix) else np.asarray(k)
    return float(np.linalg.eigvalsh(values)[0])
