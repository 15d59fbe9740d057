"""MNIST ingestion, PCA feature extraction and per-encoding normalization."""

from __future__ import annotations

import gzip
import math
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import List, Sequence, Tuple, Union

import numpy as np

from .encoders import EncodedInput, EncodingMethod
from .errors import ConfigError, DataError, ParseError
from .jacobi import jacobi_eigh

IMAGE_MAGIC = 2051
LABEL_MAGIC = 2049
IMAGE_SIDE = 28
NUM_PIXELS = IMAGE_SIDE * IMAGE_SIDE
NUM_FEATURES = 4
BASIS_LEVELS = 3

SPLITS = {
    "train": ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
    "t10k": ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
}


def parse_idx(data: bytes) -> np.ndarray:
    """Decode an unsigned-byte IDX payload.

    Images (magic 2051) come back as float arrays of shape (n, rows*cols)
    scaled to [0, 1]; labels (magic 2049) as int64 of shape (n,).
    """
    if len(data) < 8:
        raise ParseError("truncated IDX header", len(data))
    (magic,) = struct.unpack(">I", data[:4])
    if magic not in (IMAGE_MAGIC, LABEL_MAGIC):
        raise ParseError(f"bad IDX magic {magic}", 0)
    ndim = magic & 0xFF
    header_len = 4 + 4 * ndim
    if len(data) < header_len:
        raise ParseError("truncated IDX dimension header", len(data))
    dims = struct.unpack(f">{ndim}I", data[4:header_len])
    count = int(np.prod(dims, dtype=np.int64))
    if len(data) < header_len + count:
        raise ParseError(f"payload truncated: expected {count} bytes", len(data))
    if len(data) > header_len + count:
        raise ParseError("trailing bytes after IDX payload", header_len + count)
    raw = np.frombuffer(data, dtype=np.uint8, count=count, offset=header_len)
    if magic == LABEL_MAGIC:
        return raw.astype(np.int64)
    return raw.reshape(dims[0], -1).astype(np.float64) / 255.0


def encode_idx(array: np.ndarray, kind: str) -> bytes:
    """Inverse of ``parse_idx`` for uint8 data (images as (n, 28, 28) or (n, 784))."""
    arr = np.asarray(array)
    if kind == "labels":
        return struct.pack(">II", LABEL_MAGIC, arr.shape[0]) + arr.astype(np.uint8).tobytes()
    arr = arr.reshape(arr.shape[0], IMAGE_SIDE, IMAGE_SIDE)
    return struct.pack(">IIII", IMAGE_MAGIC, *arr.shape) + arr.astype(np.uint8).tobytes()


def read_idx_file(path: Union[str, Path]) -> np.ndarray:
    path = Path(path)
    data = path.read_bytes()
    if data[:2] == b"\x1f\x8b":
        data = gzip.decompress(data)
    try:
        return parse_idx(data)
    except ParseError as exc:
        raise ParseError(f"{path.name}: {exc.args[0]}", exc.offset) from None


def _find(directory: Path, stem: str):
    for name in (stem, stem + ".gz"):
        if (directory / name).is_file():
            return directory / name
    return None


def load_mnist(directory: Union[str, Path], splits: Sequence[str] = ("train", "t10k")) -> Tuple[np.ndarray, np.ndarray]:
    """All images and labels from the IDX pairs present in ``directory``."""
    directory = Path(directory)
    if not directory.is_dir():
        raise ConfigError(f"MNIST directory {directory} does not exist")
    images, labels = [], []
    for split in splits:
        img_path, lbl_path = (_find(directory, stem) for stem in SPLITS[split])
        if img_path is None and lbl_path is None:
            continue
        if img_path is None or lbl_path is None:
            raise DataError(f"{directory}: incomplete {split} pair")
        x, y = read_idx_file(img_path), read_idx_file(lbl_path)
        if x.ndim != 2 or y.ndim != 1:
            raise DataError(f"{split}: image/label files swapped or malformed")
        if x.shape[0] != y.shape[0]:
            raise DataError(f"{split}: {x.shape[0]} images but {y.shape[0]} labels")
        if x.shape[1] != NUM_PIXELS:
            raise DataError(f"{split}: expected {NUM_PIXELS} pixels per image, got {x.shape[1]}")
        images.append(x)
        labels.append(y)
    if not images:
        raise ConfigError(f"no MNIST IDX files found in {directory}")
    return np.concatenate(images), np.concatenate(labels)


def select_digits(images: np.ndarray, labels: np.ndarray, digits=(3, 6)):
    mask = np.isin(labels, digits)
    return images[mask], labels[mask]


def balanced_split(labels: np.ndarray, n_train: int, n_test: int, rng: np.random.Generator,
                   classes=(3, 6)) -> Tuple[np.ndarray, np.ndarray]:
    """Seeded class-balanced train/test index draw without replacement.

    Odd sizes give the extra sample to the first class.
    """
    train_idx, test_idx = [], []
    for i, cls in enumerate(classes):
        pool = np.flatnonzero(labels == cls)
        k_train = n_train // len(classes) + (i < n_train % len(classes))
        k_test = n_test // len(classes) + (i < n_test % len(classes))
        if k_train + k_test > pool.size:
            raise DataError(
                f"class {cls}: need {k_train + k_test} images, only {pool.size} available"
            )
        pick = rng.permutation(pool)
        train_idx.append(pick[:k_train])
        test_idx.append(pick[k_train:k_train + k_test])
    return np.sort(np.concatenate(train_idx)), np.sort(np.concatenate(test_idx))


@dataclass
class PcaModel:
    mean: np.ndarray
    components: np.ndarray  # (k, num_pixels), rows orthonormal
    eigenvalues: np.ndarray
    total_variance: float
    feature_min: np.ndarray
    feature_max: np.ndarray

    @property
    def explained_variance_ratio(self) -> float:
        return float(self.eigenvalues.sum() / self.total_variance)


def fit_pca(images: np.ndarray, k: int = NUM_FEATURES, solver: str = "jacobi") -> PcaModel:
    """Top-``k`` principal components of the training images.

    Constant pixels are dropped before the eigenproblem; they carry no
    variance and contribute zero entries to every component. When there
    are fewer images than varying pixels the Gram matrix is decomposed
    instead of the covariance.
    """
    x = np.asarray(images, dtype=np.float64)
    if x.ndim != 2:
        raise DataError(f"expected (n, pixels) images, got shape {x.shape}")
    n = x.shape[0]
    if n <= k:
        raise DataError(f"need more than {k} images to fit {k} components, got {n}")
    mean = x.mean(axis=0)
    xc = x - mean
    active = np.flatnonzero(np.ptp(x, axis=0) > 0)
    if active.size < k:
        raise DataError(f"only {active.size} pixels vary; cannot extract {k} components")
    xa = xc[:, active]
    eigh = _solver(solver)
    if n - 1 < active.size:
        gram = xa @ xa.T / (n - 1)
        w, u = eigh(gram)
        w, u = w[:k], u[:, :k]
        if w[-1] <= 1e-12 * max(w[0], 1e-300):
            raise DataError(f"covariance rank < {k}")
        vecs = xa.T @ u / np.sqrt(w * (n - 1))
    else:
        cov = xa.T @ xa / (n - 1)
        w, vecs = eigh(cov)
        w, vecs = w[:k], vecs[:, :k]
        if w[-1] <= 1e-12 * max(w[0], 1e-300):
            raise DataError(f"covariance rank < {k}")
    comps = np.zeros((k, x.shape[1]))
    comps[:, active] = vecs.T
    # sign convention: largest-magnitude entry positive
    for row in comps:
        if row[np.argmax(np.abs(row))] < 0:
            row *= -1
    total = float(np.sum(xa * xa) / (n - 1))
    feats = xc @ comps.T
    return PcaModel(mean, comps, w.copy(), total, feats.min(axis=0), feats.max(axis=0))


def _solver(name: str):
    if name == "jacobi":
        return jacobi_eigh
    if name == "numpy":
        def lapack(m):
            w, v = np.linalg.eigh(m)
            return w[::-1], v[:, ::-1]
        return lapack
    raise ConfigError(f"unknown PCA solver {name!r}")


def project(model: PcaModel, image: np.ndarray) -> np.ndarray:
    return (np.asarray(image, dtype=np.float64) - model.mean) @ model.components.T


def reconstruct(model: PcaModel, features: np.ndarray) -> np.ndarray:
    return model.mean + np.asarray(features, dtype=np.float64) @ model.components


def normalize_for(method, features: Sequence[float], model: PcaModel,
                  rotation_range: float = math.pi) -> EncodedInput:
    """Map PCA features to an encoder payload using training-set ranges.

    Rotation: min-max scale to [0, rotation_range] with clamping.
    Amplitude: subtract the training minimum (the encoder normalizes).
    Basis: min-max scale the first component, floor(3 * s) capped at 2.
    """
    method = EncodingMethod.parse(method)
    f = np.asarray(features, dtype=np.float64)
    lo, hi = model.feature_min, model.feature_max
    span = hi - lo
    if np.any(span <= 0):
        raise DataError("a PCA feature has zero range on the training set")
    if method is EncodingMethod.ROTATION:
        angles = np.clip((f - lo) / span, 0.0, 1.0) * rotation_range
        # 2*pi and 0 prepare the same state up to global phase
        angles = np.where(angles >= 2 * math.pi, angles - 2 * math.pi, angles)
        return EncodedInput(method, tuple(angles))
    if method is EncodingMethod.AMPLITUDE:
        shifted = f - lo
        if np.linalg.norm(shifted) <= 1e-12:
            # every feature sits at its training minimum: no direction to encode
            shifted = np.ones_like(shifted)
        return EncodedInput(method, tuple(shifted))
    scaled = min(max((f[0] - lo[0]) / span[0], 0.0), 1.0)
    return EncodedInput(method, min(int(math.floor(scaled * BASIS_LEVELS)), BASIS_LEVELS - 1))


def make_synthetic_dataset(seed: int, n: int) -> Tuple[np.ndarray, np.ndarray]:
    """Two separable Gaussian blobs living in a 4-dim affine subspace of pixel space.

    Directions are disjoint 196-pixel blocks with random signs, so pixels
    stay inside [0, 1] without clipping. Labels alternate 3, 6, 3, ...
    The first direction separates the classes with a margin of 1.
    """
    if n < 8:
        raise ConfigError(f"synthetic dataset needs n >= 8, got {n}")
    rng = np.random.default_rng(seed)
    block = NUM_PIXELS // NUM_FEATURES
    dirs = np.zeros((NUM_FEATURES, NUM_PIXELS))
    perm = rng.permutation(NUM_PIXELS)
    for k in range(NUM_FEATURES):
        idx = perm[k * block:(k + 1) * block]
        dirs[k, idx] = rng.choice([-1.0, 1.0], size=block) / math.sqrt(block)
    labels = np.where(np.arange(n) % 2 == 0, 3, 6)
    # truncated normal noise keeps each class on its side of the margin
    noise = np.clip(rng.normal(0.0, 0.4, size=(n, NUM_FEATURES)), -1.0, 1.0)
    scale = np.array([1.0, 2.0, 1.5, 1.0])
    coefs = noise * scale
    coefs[:, 0] = noise[:, 0] + np.where(labels == 3, 1.5, -1.5)
    images = 0.5 + coefs @ dirs
    return images, labels


def prepare_inputs(method, images: np.ndarray, model: PcaModel, rotation_range: float = math.pi) -> List[EncodedInput]:
    feats = project(model, images)
    return [normalize_for(method, f, model, rotation_range) for f in feats]
