"""Dataset loading and preparation.

Three binary tasks are supported:

- ``parkinsons``: UCI Parkinson's voice measurements (``parkinsons.data``,
  comma separated with a header row; ``name`` dropped, label ``status``).
- ``wbcd``: UCI Wisconsin diagnostic breast cancer (``wdbc.data``, no
  header; column 0 is the ID, column 1 the diagnosis, ``M`` positive).
  When the file is absent the copy bundled with scikit-learn is used.
- ``mnist``: even (0) versus odd (1) digits from the IDX files, on a
  random subset of pixel positions shared by every image.

Files are looked up under the directory named by ``NLCMS_ELM_DATA_ROOT``
unless an explicit root is passed.
"""

import csv
import gzip
import math
import os
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

import numpy as np

from .errors import DataParseError, FormatError, InvalidArgumentError, SchemaError

DATA_ROOT_ENV = "NLCMS_ELM_DATA_ROOT"

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801


@dataclass
class RawTable:
    """Unscaled features with class labels in {0, 1}."""

    features: np.ndarray
    labels: np.ndarray
    name: str = ""
    feature_names: List[str] = field(default_factory=list)

    @property
    def n_samples(self):
        return self.features.shape[0]

    @property
    def n_features(self):
        return self.features.shape[1]


@dataclass(frozen=True)
class ScalingParams:
    minimum: np.ndarray
    maximum: np.ndarray


@dataclass
class LabeledDataset:
    """Features scaled to [0, 1] plus a disjoint train/test split.

    ``labels`` are class labels in {0, 1}; the regression targets are
    derived from them through a :class:`~nlcms_elm.elm.TargetEncoding`.
    """

    features: np.ndarray
    labels: np.ndarray
    name: str
    train_idx: np.ndarray
    test_idx: np.ndarray
    scaling: Optional[ScalingParams] = None

    def __post_init__(self):
        n = self.features.shape[0]
        if self.labels.shape != (n,):
            raise InvalidArgumentError("one label per sample is required")
        if not np.all((self.labels == 0) | (self.labels == 1)):
            raise InvalidArgumentError("labels must be 0 or 1")
        if n and not (np.all(self.features >= 0.0) and np.all(self.features <= 1.0)):
            raise InvalidArgumentError("features must be scaled to [0, 1]")
        both = np.concatenate([self.train_idx, self.test_idx])
        if both.size != n or np.unique(both).size != n:
            raise InvalidArgumentError("train and test indices must partition the samples")

    @property
    def n_samples(self):
        return self.features.shape[0]

    @property
    def n_features(self):
        return self.features.shape[1]

    @property
    def X_train(self):
        return self.features[self.train_idx]

    @property
    def y_train(self):
        return self.labels[self.train_idx]

    @property
    def X_test(self):
        return self.features[self.test_idx]

    @property
    def y_test(self):
        return self.labels[self.test_idx]


# --------------------------------------------------------------------------
# delimited text


def load_csv(
    path,
    label_column: Union[str, int],
    positive_label: str,
    drop_columns: Sequence[Union[str, int]] = (),
    header: bool = True,
    name: str = "",
):
    """Read a comma-separated table into features and binary labels.

    The label column is compared as a stripped string against
    ``positive_label``; every remaining (non-dropped) column must be
    numeric. Columns may be referenced by header name or integer index.
    """
    path = Path(path)
    with open(path, newline="") as fh:
        rows = [row for row in csv.reader(fh) if row and any(cell.strip() for cell in row)]
    if header:
        if not rows:
            raise SchemaError(f"{path}: empty file")
        names = [c.strip() for c in rows[0]]
        body = rows[1:]
    else:
        width = len(rows[0]) if rows else 0
        names = [str(i) for i in range(width)]
        body = rows

    def resolve(col):
        if isinstance(col, int):
            if not 0 <= col < len(names):
                raise SchemaError(f"{path}: column index {col} out of range")
            return col
        if col not in names:
            raise SchemaError(f"{path}: missing column {col!r}")
        return names.index(col)

    label_idx = resolve(label_column)
    dropped = {resolve(c) for c in drop_columns} | {label_idx}
    keep = [i for i in range(len(names)) if i not in dropped]

    features = np.empty((len(body), len(keep)))
    labels = np.empty(len(body), dtype=int)
    first_data_row = 2 if header else 1
    for r, row in enumerate(body):
        if len(row) != len(names):
            raise DataParseError(
                f"{path}: expected {len(names)} fields, found {len(row)}", row=r + first_data_row
            )
        labels[r] = int(row[label_idx].strip() == positive_label)
        for j, c in enumerate(keep):
            try:
                features[r, j] = float(row[c])
            except ValueError:
                raise DataParseError(
                    f"{path}: non-numeric value {row[c]!r}", row=r + first_data_row, column=names[c]
                ) from None
    return RawTable(features=features, labels=labels, name=name or path.stem,
                    feature_names=[names[i] for i in keep])


# --------------------------------------------------------------------------
# IDX (MNIST)


def _open_maybe_gzip(path):
    path = Path(path)
    with open(path, "rb") as fh:
        head = fh.read(2)
    if head == b"\x1f\x8b":
        return gzip.open(path, "rb")
    return open(path, "rb")


def read_idx(path, expected_magic):
    """Parse an unsigned-byte IDX file (optionally gzipped) into an array."""
    with _open_maybe_gzip(path) as fh:
        data = fh.read()
    if len(data) < 4:
        raise FormatError(f"{path}: truncated header")
    (magic,) = struct.unpack(">I", data[:4])
    if magic != expected_magic:
        raise FormatError(f"{path}: bad magic number 0x{magic:08x}, expected 0x{expected_magic:08x}")
    ndim = magic & 0xFF
    header_len = 4 + 4 * ndim
    if len(data) < header_len:
        raise FormatError(f"{path}: truncated dimension header")
    dims = struct.unpack(f">{ndim}I", data[4:header_len])
    count = math.prod(dims)
    if len(data) - header_len < count:
        raise FormatError(f"{path}: truncated payload ({len(data) - header_len} of {count} bytes)")
    return np.frombuffer(data, dtype=np.uint8, count=count, offset=header_len).reshape(dims)


def write_idx(path, array):
    """Write a uint8 array as IDX; used to build fixtures and subsets."""
    array = np.ascontiguousarray(array, dtype=np.uint8)
    magic = 0x00000800 | array.ndim
    opener = gzip.open if str(path).endswith(".gz") else open
    with opener(path, "wb") as fh:
        fh.write(struct.pack(f">I{array.ndim}I", magic, *array.shape))
        fh.write(array.tobytes())


def load_mnist_binary(images_path, labels_path, n_pixels, rng, max_samples=None):
    """Even/odd MNIST with ``n_pixels`` randomly chosen pixel positions.

    One pixel selection is drawn from ``rng`` and shared by all images;
    values are divided by 255 and odd digits get label 1. ``images_path``
    and ``labels_path`` may be lists to pool several files. With
    ``max_samples`` only the first that many pooled samples are kept.
    """
    if isinstance(images_path, (str, os.PathLike)):
        images_path, labels_path = [images_path], [labels_path]
    images, digits = [], []
    for ip, lp in zip(images_path, labels_path):
        imgs = read_idx(ip, IDX_IMAGES_MAGIC)
        labs = read_idx(lp, IDX_LABELS_MAGIC)
        if imgs.ndim != 3 or labs.ndim != 1 or imgs.shape[0] != labs.shape[0]:
            raise FormatError(f"{ip}/{lp}: image and label files do not match")
        images.append(imgs.reshape(imgs.shape[0], -1))
        digits.append(labs)
    images = np.concatenate(images)
    digits = np.concatenate(digits)
    if max_samples is not None:
        images, digits = images[:max_samples], digits[:max_samples]

    n_total = images.shape[1]
    if not 1 <= n_pixels <= n_total:
        raise InvalidArgumentError(f"n_pixels must be in [1, {n_total}]")
    pixels = np.sort(rng.choice(n_total, size=n_pixels, replace=False))
    features = images[:, pixels].astype(float) / 255.0
    return RawTable(
        features=features,
        labels=(digits % 2).astype(int),
        name="mnist",
        feature_names=[f"px{p}" for p in pixels],
    )


# --------------------------------------------------------------------------
# scaling and splitting


def fit_scale(train_features):
    X = np.asarray(train_features, dtype=float)
    if X.ndim != 2 or X.shape[0] == 0:
        raise InvalidArgumentError("cannot fit scaling on an empty training set")
    return ScalingParams(minimum=X.min(axis=0), maximum=X.max(axis=0))


def apply_scale(features, params):
    """Min-max scale with training statistics; constant features map to 0."""
    X = np.asarray(features, dtype=float)
    span = params.maximum - params.minimum
    safe = np.where(span > 0, span, 1.0)
    scaled = np.where(span > 0, (X - params.minimum) / safe, 0.0)
    return np.clip(scaled, 0.0, 1.0)


def split(n, test_fraction=0.3, rng=None):
    """Random permutation; the first ``ceil((1 - f) n)`` indices train."""
    if n < 2:
        raise InvalidArgumentError("need at least two samples to split")
    if not 0 < test_fraction < 1:
        raise InvalidArgumentError("test_fraction must lie in (0, 1)")
    perm = rng.permutation(n)
    # rounding guards ceil against 0.7 * 10 = 7.000000000000001
    n_train = math.ceil(round((1.0 - test_fraction) * n, 9))
    n_train = min(max(n_train, 1), n - 1)
    return perm[:n_train], perm[n_train:]


def prepare(raw: RawTable, rng, test_fraction=0.3):
    """Split ``raw`` and scale it with statistics from the training rows only."""
    train_idx, test_idx = split(raw.n_samples, test_fraction, rng)
    params = fit_scale(raw.features[train_idx])
    return LabeledDataset(
        features=apply_scale(raw.features, params),
        labels=np.asarray(raw.labels, dtype=int),
        name=raw.name,
        train_idx=train_idx,
        test_idx=test_idx,
        scaling=params,
    )


# --------------------------------------------------------------------------
# registry


@dataclass(frozen=True)
class CsvSchema:
    filename: str
    label_column: Union[str, int]
    positive_label: str
    drop_columns: tuple
    header: bool


CSV_DATASETS: Dict[str, CsvSchema] = {
    "parkinsons": CsvSchema("parkinsons.data", "status", "1", ("name",), True),
    "wbcd": CsvSchema("wdbc.data", 1, "M", (0,), False),
}

MNIST_FILES = {
    "train": ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
    "test": ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
}

DATASET_NAMES = ("parkinsons", "wbcd", "mnist")


def data_root(root=None):
    root = root or os.environ.get(DATA_ROOT_ENV)
    return Path(root) if root else None


def _find(root, filename):
    """``filename`` (or its ``.gz`` sibling) under ``root``, else None."""
    if root is None:
        return None
    for candidate in (root / filename, root / (filename + ".gz")):
        if candidate.is_file():
            return candidate
    return None


def _bundled_wbcd_available():
    try:
        import sklearn.datasets  # noqa: F401
    except ImportError:
        return False
    return True


def load_bundled_wbcd():
    """The WDBC table shipped with scikit-learn (same 569 x 30 data)."""
    from sklearn.datasets import load_breast_cancer

    bunch = load_breast_cancer()
    # scikit-learn encodes malignant as 0
    labels = (bunch.target == 0).astype(int)
    return RawTable(features=np.asarray(bunch.data, dtype=float), labels=labels,
                    name="wbcd", feature_names=list(bunch.feature_names))


def check_available(name, root=None, mnist_pool=("train",)):
    """Raise ``FileNotFoundError`` if dataset ``name`` cannot be loaded."""
    root = data_root(root)
    if name in CSV_DATASETS:
        if _find(root, CSV_DATASETS[name].filename) is not None:
            return
        if name == "wbcd" and _bundled_wbcd_available():
            return
        raise FileNotFoundError(
            f"dataset {name!r}: {CSV_DATASETS[name].filename} not found under "
            f"{root or '$' + DATA_ROOT_ENV + ' (unset)'}"
        )
    if name == "mnist":
        for part in mnist_pool:
            for filename in MNIST_FILES[part]:
                if _find(root, filename) is None:
                    raise FileNotFoundError(
                        f"dataset 'mnist': {filename} not found under "
                        f"{root or '$' + DATA_ROOT_ENV + ' (unset)'}"
                    )
        return
    raise InvalidArgumentError(f"unknown dataset {name!r}; expected one of {DATASET_NAMES}")


def load_dataset(name, root=None, rng=None, mnist_pixels=100, mnist_max_samples=10_000,
                 mnist_pool=("train",)):
    """Load a registered dataset as a :class:`RawTable` (unscaled)."""
    check_available(name, root, mnist_pool)
    root = data_root(root)
    if name in CSV_DATASETS:
        schema = CSV_DATASETS[name]
        path = _find(root, schema.filename)
        if path is None:
            return load_bundled_wbcd()
        if path.suffix == ".gz":
            raise InvalidArgumentError(f"{path}: compressed CSV files are not supported")
        return load_csv(path, schema.label_column, schema.positive_label,
                        schema.drop_columns, schema.header, name=name)
    if rng is None:
        raise InvalidArgumentError("MNIST loading needs a generator for the pixel selection")
    images = [_find(root, MNIST_FILES[p][0]) for p in mnist_pool]
    labels = [_find(root, MNIST_FILES[p][1]) for p in mnist_pool]
    return load_mnist_binary(images, labels, mnist_pixels, rng, max_samples=mnist_max_samples)
