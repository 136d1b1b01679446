"""Binary model persistence.

One file format covers all three fit methods.  Layout, in order:

    magic       4 bytes         b"KTLM"
    version     u32 LE          currently 1
    method      1 byte          1 = plain, 2 = direct kernel, 3 = reduced kernel
    kernel      29 bytes        family byte (0 none, 1 linear, 2 polynomial,
                                3 rbf), degree u32 LE, gain/coef0/gamma f64 LE
    threshold   f64 LE
    lam         f64 LE
    matrices    repeated blocks: rows u64 LE, cols u64 LE, then rows*cols
                f64 LE values in row-major order

The matrix blocks are: the transform (plain), b_full then train_samples
(direct kernel), or b_reduced then the eigenvector basis then
train_samples (reduced kernel).  Serialization is deterministic, so a
save/load/save round trip is byte-identical.
"""
from __future__ import annotations

import struct

import numpy as np

from .errors import BadMagic, CorruptLength, VersionUnsupported
from .kernels import LINEAR, POLYNOMIAL, RBF, KernelSpec
from .ktl import KtlModel
from .transform import TransformModel

MAGIC = b"KTLM"
VERSION = 1

METHOD_TAG_TL = 1
METHOD_TAG_KTL = 2
METHOD_TAG_EKTL = 3

_FAMILY_TAGS = {None: 0, LINEAR: 1, POLYNOMIAL: 2, RBF: 3}
_TAG_FAMILIES = {v: k for k, v in _FAMILY_TAGS.items()}


def _pack_kernel(spec: KernelSpec | None) -> bytes:
    if spec is None:
        return struct.pack("<BIddd", 0, 0, 0.0, 0.0, 0.0)
    return struct.pack("<BIddd", _FAMILY_TAGS[spec.family], int(spec.degree),
                       spec.gain, spec.coef0, spec.gamma)


def _pack_matrix(arr: np.ndarray) -> bytes:
    mat = np.ascontiguousarray(arr, dtype="<f8")
    rows, cols = mat.shape
    return struct.pack("<QQ", rows, cols) + mat.tobytes(order="C")


class _Reader:
    """Cursor over a byte payload that fails loudly on short reads."""

    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, count: int, what: str) -> bytes:
        end = self.pos + count
        if end > len(self.data):
            raise CorruptLength(
                f"file ended inside {what}: wanted {count} bytes at offset "
                f"{self.pos}, only {len(self.data) - self.pos} remain")
        chunk = self.data[self.pos:end]
        self.pos = end
        return chunk

    def matrix(self, what: str) -> np.ndarray:
        rows, cols = struct.unpack("<QQ", self.take(16, f"{what} header"))
        count = rows * cols
        body = self.take(8 * count, f"{what} values")
        return np.frombuffer(body, dtype="<f8").reshape(rows, cols).copy()

    def done(self):
        if self.pos != len(self.data):
            raise CorruptLength(
                f"{len(self.data) - self.pos} trailing bytes after the last block")


def serialize_model(model: TransformModel | KtlModel) -> bytes:
    """Render a fitted model to its byte representation."""
    parts = [MAGIC, struct.pack("<I", VERSION)]
    if isinstance(model, TransformModel):
        parts.append(struct.pack("<B", METHOD_TAG_TL))
        parts.append(_pack_kernel(None))
        parts.append(struct.pack("<dd", model.threshold, model.lam))
        parts.append(_pack_matrix(model.matrix))
    elif isinstance(model, KtlModel):
        tag = METHOD_TAG_KTL if model.b_full is not None else METHOD_TAG_EKTL
        parts.append(struct.pack("<B", tag))
        parts.append(_pack_kernel(model.kernel))
        parts.append(struct.pack("<dd", model.threshold, model.lam))
        if model.b_full is not None:
            parts.append(_pack_matrix(model.b_full))
        else:
            parts.append(_pack_matrix(model.b_reduced))
            parts.append(_pack_matrix(model.basis))
        parts.append(_pack_matrix(model.train_samples))
    else:
        raise TypeError(f"cannot serialize {type(model).__name__}")
    return b"".join(parts)


def deserialize_model(data: bytes) -> TransformModel | KtlModel:
    """Parse bytes produced by :func:`serialize_model`.

    Raises:
        BadMagic: the payload does not start with the expected magic.
        VersionUnsupported: the version field is not one this reader knows.
        CorruptLength: a block is truncated or trailing bytes remain.
    """
    if data[:4] != MAGIC:
        raise BadMagic("not a model file: bad magic bytes")
    reader = _Reader(data)
    reader.take(4, "magic")
    (version,) = struct.unpack("<I", reader.take(4, "version"))
    if version != VERSION:
        raise VersionUnsupported(f"model file version {version}, reader supports {VERSION}")
    (method_tag,) = struct.unpack("<B", reader.take(1, "method tag"))
    family_tag, degree, gain, coef0, gamma = struct.unpack(
        "<BIddd", reader.take(29, "kernel block"))
    if family_tag not in _TAG_FAMILIES:
        raise CorruptLength(f"unknown kernel family tag {family_tag}")
    family = _TAG_FAMILIES[family_tag]
    threshold, lam = struct.unpack("<dd", reader.take(16, "threshold/lam"))

    if method_tag == METHOD_TAG_TL:
        matrix = reader.matrix("transform")
        reader.done()
        return TransformModel(matrix=matrix, threshold=threshold, lam=lam)

    if family is None:
        raise CorruptLength("kernel method stored without a kernel family")
    spec = KernelSpec(family=family,
                      degree=degree if family == POLYNOMIAL else 4,
                      gain=gain if family == POLYNOMIAL else 1.0,
                      coef0=coef0 if family == POLYNOMIAL else 1.0,
                      gamma=gamma if family == RBF else 1.0)
    if method_tag == METHOD_TAG_KTL:
        b_full = reader.matrix("b_full")
        train = reader.matrix("train_samples")
        reader.done()
        return KtlModel(kernel=spec, train_samples=train, threshold=threshold,
                        lam=lam, b_full=b_full)
    if method_tag == METHOD_TAG_EKTL:
        b_reduced = reader.matrix("b_reduced")
        basis = reader.matrix("basis")
        train = reader.matrix("train_samples")
        reader.done()
        return KtlModel(kernel=spec, train_samples=train, threshold=threshold,
                        lam=lam, b_reduced=b_reduced, basis=basis)
    raise CorruptLength(f"unknown method tag {method_tag}")


def save_model(model: TransformModel | KtlModel, path) -> None:
    """Write a model to disk."""
    payload = serialize_model(model)
    with open(path, "wb") as fh:
        fh.write(payload)


def load_model(path) -> TransformModel | KtlModel:
    """Read a model written by :func:`save_model`."""
    with open(path, "rb") as fh:
        return deserialize_model(fh.read())
