"""Dataset ingestion, preprocessing, and synthetic data generation.

Samples are kept column-major throughout the package: a dataset with N
samples of dimension n is an ``n x N`` float64 matrix, one sample per
column.  File formats that store one sample per row (CSV, IDX images)
are transposed on the way in.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import BadChannelLayout, DimensionMismatch, TruncatedPayload, UnknownMagic

IDX_IMAGE_MAGIC = 0x00000803
IDX_LABEL_MAGIC = 0x00000801

MEAN_SUBTRACT = "mean_subtract"
GCN = "gcn"
RGB_TO_LUMA = "rgb_to_luma"

_KNOWN_STEPS = (RGB_TO_LUMA, MEAN_SUBTRACT, GCN)

# BT.601 luma weights for planar R, G, B rows.
_LUMA_WEIGHTS = (0.299, 0.587, 0.114)


@dataclass
class Dataset:
    """A sample matrix plus optional integer labels.

    Attributes:
        samples: n x N float64 matrix, one sample per column.
        labels: length-N int vector, or None for unlabeled data.
        source: short human-readable provenance string.
    """

    samples: np.ndarray
    labels: np.ndarray | None = None
    source: str = ""

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 2:
            raise DimensionMismatch(
                f"samples must be 2-D, got shape {self.samples.shape}")
        if not np.isfinite(self.samples).all():
            raise ValueError("samples contain NaN or infinity")
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=np.int64)
            if self.labels.ndim != 1 or self.labels.shape[0] != self.samples.shape[1]:
                raise DimensionMismatch(
                    f"labels length {self.labels.shape} does not match "
                    f"{self.samples.shape[1]} samples")

    @property
    def n_features(self) -> int:
        return self.samples.shape[0]

    @property
    def n_samples(self) -> int:
        return self.samples.shape[1]


@dataclass(frozen=True)
class PreprocessConfig:
    """Ordered preprocessing steps applied column-wise.

    ``rgb_to_luma`` collapses planar RGB rows to one luma plane and must
    come first when present, since the later steps change pixel values.
    """

    steps: tuple[str, ...] = ()
    gcn_floor: float = 1e-8

    def __post_init__(self):
        if self.gcn_floor <= 0:
            raise ValueError(f"gcn_floor must be positive, got {self.gcn_floor}")
        for s in self.steps:
            if s not in _KNOWN_STEPS:
                raise ValueError(f"unknown preprocessing step {s!r}")
        if RGB_TO_LUMA in self.steps and self.steps[0] != RGB_TO_LUMA:
            raise ValueError("rgb_to_luma must be the first step")


def load_idx(payload: bytes) -> Dataset | np.ndarray:
    """Parse an IDX byte payload.

    Supports the two classic layouts: unsigned-byte rank-3 image files
    (magic 0x00000803) and unsigned-byte rank-1 label files (magic
    0x00000801).  Image pixels are scaled to [0, 1] by dividing by 255
    and each image is flattened row-major into one column.

    Args:
        payload: full file contents.

    Returns:
        A Dataset for image payloads, or a plain int64 label vector for
        label payloads.

    Raises:
        UnknownMagic: the leading magic word is not one of the two above.
        TruncatedPayload: declared dimensions disagree with the byte count.
    """
    if len(payload) < 4:
        raise TruncatedPayload(f"payload holds {len(payload)} bytes, no magic word")
    (magic,) = struct.unpack(">i", payload[:4])
    if magic == IDX_IMAGE_MAGIC:
        rank = 3
    elif magic == IDX_LABEL_MAGIC:
        rank = 1
    else:
        raise UnknownMagic(f"unsupported IDX magic 0x{magic & 0xFFFFFFFF:08x}")

    header_len = 4 + 4 * rank
    if len(payload) < header_len:
        raise TruncatedPayload("payload ends inside the dimension header")
    dims = struct.unpack(f">{rank}i", payload[4:header_len])
    if any(d < 0 for d in dims):
        raise TruncatedPayload(f"negative dimension in header: {dims}")
    expected = int(np.prod(dims, dtype=np.int64)) if dims else 0
    body = len(payload) - header_len
    if body < expected:
        raise TruncatedPayload(
            f"declared dimensions {dims} need {expected} bytes, payload has {body}")
    if body > expected:
        raise TruncatedPayload(
            f"declared dimensions {dims} need {expected} bytes, "
            f"payload carries {body - expected} extra")

    raw = np.frombuffer(payload, dtype=np.uint8, offset=header_len)
    if magic == IDX_LABEL_MAGIC:
        return raw.astype(np.int64)
    count, rows, cols = dims
    # row-major flatten of each image becomes one column
    samples = raw.reshape(count, rows * cols).T.astype(np.float64) / 255.0
    return Dataset(samples=samples, source=f"idx({count}x{rows}x{cols})")


def load_idx_file(path) -> Dataset | np.ndarray:
    """Read ``path`` fully and hand the bytes to :func:`load_idx`."""
    with open(path, "rb") as fh:
        return load_idx(fh.read())


def dump_idx_images(samples: np.ndarray, rows: int, cols: int) -> bytes:
    """Serialize an n x N sample matrix back to IDX image bytes.

    Values are expected in [0, 1] and are mapped to unsigned bytes by
    rounding ``value * 255``; this inverts :func:`load_idx` exactly for
    data that came from an IDX file.
    """
    samples = np.asarray(samples, dtype=np.float64)
    if samples.shape[0] != rows * cols:
        raise DimensionMismatch(
            f"{rows}x{cols} images need {rows * cols} rows, got {samples.shape[0]}")
    count = samples.shape[1]
    header = struct.pack(">iiii", IDX_IMAGE_MAGIC, count, rows, cols)
    pixels = np.rint(samples.T * 255.0).clip(0, 255).astype(np.uint8)
    return header + pixels.tobytes()


def dump_idx_labels(labels: np.ndarray) -> bytes:
    """Serialize an int vector to IDX label bytes."""
    labels = np.asarray(labels)
    if labels.ndim != 1:
        raise DimensionMismatch(f"labels must be 1-D, got shape {labels.shape}")
    if labels.min(initial=0) < 0 or labels.max(initial=0) > 255:
        raise ValueError("IDX labels must fit in an unsigned byte")
    header = struct.pack(">ii", IDX_LABEL_MAGIC, labels.shape[0])
    return header + labels.astype(np.uint8).tobytes()


def load_csv(path, has_labels: bool = False, skip_header: bool = False) -> Dataset:
    """Load a delimited text file with one sample per row.

    Args:
        path: file path or open text handle.
        has_labels: when True the last column holds integer class labels.
        skip_header: drop the first line before parsing.

    Returns:
        Dataset with samples transposed to column-major.
    """
    table = np.loadtxt(path, delimiter=",", skiprows=1 if skip_header else 0,
                       dtype=np.float64, ndmin=2)
    if has_labels:
        if table.shape[1] < 2:
            raise DimensionMismatch("label column requested but file has one column")
        labels = table[:, -1]
        if not np.array_equal(labels, np.rint(labels)):
            raise ValueError("label column contains non-integer values")
        return Dataset(samples=table[:, :-1].T, labels=labels.astype(np.int64),
                       source=f"csv({path})")
    return Dataset(samples=table.T, source=f"csv({path})")


def rgb_to_luma(data: np.ndarray) -> np.ndarray:
    """Collapse planar R, G, B row blocks to a single luma plane.

    The first n/3 rows are red, the next n/3 green, the last n/3 blue.
    """
    data = np.asarray(data, dtype=np.float64)
    n = data.shape[0]
    if n % 3 != 0:
        raise BadChannelLayout(
            f"{n} rows cannot be split into three equal channel planes")
    plane = n // 3
    wr, wg, wb = _LUMA_WEIGHTS
    return wr * data[:plane] + wg * data[plane:2 * plane] + wb * data[2 * plane:]


def preprocess(data, config: PreprocessConfig):
    """Apply the configured steps, in order, to each sample column.

    Accepts either a Dataset (labels and source carried through) or a
    bare column-major matrix, and returns the same kind it was given.
    """
    if isinstance(data, Dataset):
        out = preprocess(data.samples, config)
        return Dataset(samples=out, labels=data.labels, source=data.source)
    out = np.asarray(data, dtype=np.float64).copy()
    for step in config.steps:
        if step == RGB_TO_LUMA:
            out = rgb_to_luma(out)
        elif step == MEAN_SUBTRACT:
            out = out - out.mean(axis=0, keepdims=True)
        elif step == GCN:
            norms = np.linalg.norm(out, axis=0, keepdims=True)
            out = out / np.maximum(norms, config.gcn_floor)
    return out


@dataclass
class SynthGroundTruth:
    """Synthetic dataset together with the transform/code pair that made it."""

    dataset: Dataset
    transform: np.ndarray
    codes: np.ndarray


def synth_dataset(n: int, n_samples: int, code_density: float,
                  noise_sigma: float = 0.0, seed: int = 0) -> SynthGroundTruth:
    """Sample data that is exactly sparse under a known square transform.

    Draws T0 = Q @ D with Q orthogonal (QR of a Gaussian matrix, signs
    fixed) and D diagonal with condition number 10, then iid normal codes
    Z0 masked to the requested density, and returns X = T0^-1 Z0 plus
    optional Gaussian noise.  Everything is a pure function of the seed.

    Args:
        n: sample dimension.
        n_samples: number of columns N.
        code_density: probability an entry of Z0 is kept nonzero.
        noise_sigma: standard deviation of additive noise on X.
        seed: RNG seed.

    Returns:
        SynthGroundTruth holding the Dataset and the (T0, Z0) pair.
    """
    if not 0.0 <= code_density <= 1.0:
        raise ValueError(f"code_density must lie in [0, 1], got {code_density}")
    rng = np.random.default_rng(seed)
    q, r = np.linalg.qr(rng.standard_normal((n, n)))
    q = q * np.sign(np.diag(r))  # fix the QR sign ambiguity
    d = np.logspace(0.0, 1.0, n)  # singular values 1..10, condition 10
    t0 = q * d[np.newaxis, :]
    z0 = rng.standard_normal((n, n_samples))
    z0 *= rng.random((n, n_samples)) < code_density
    x = np.linalg.solve(t0, z0)
    if noise_sigma > 0:
        x = x + noise_sigma * rng.standard_normal((n, n_samples))
    ds = Dataset(samples=x,
                 source=f"synth(n={n},N={n_samples},density={code_density},"
                        f"sigma={noise_sigma},seed={seed})")
    return SynthGroundTruth(dataset=ds, transform=t0, codes=z0)
