"""Seeded sweep runner and CSV output.

Every record (dataset, variant, N_r, K, SNR, seed) draws its randomness
from substreams of one master ``SeedSequence``, keyed by purpose and by
only those sweep coordinates the quantity depends on:

    data split, MNIST pixels   (dataset, seed)
    H, bias                    (dataset, seed, N_r, K)
    cascade, PGD init          (dataset, seed, N_r, K)
    inference noise            (dataset, seed, N_r, K, SNR, variant)

so both variants see the same system, and running any subset of the
sweep reproduces the corresponding rows of the full sweep.
"""

import csv
import dataclasses
import io
import logging
import math
import os
import time
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
import yaml

from .activation import ActivationMode, bias_reference_norm, sample_bias
from .cascade import PgdOptions, PhaseRange
from .channels import (
    ChannelRealization,
    RiceanParams,
    sample_cascade_channels,
    sample_rayleigh,
    sample_ricean,
)
from .data import DATASET_NAMES, MNIST_FILES, check_available, load_dataset, prepare
from .elm import TargetEncoding
from .errors import InvalidArgumentError, NlcmsError
from .pipeline import TrainConfig, Variant, evaluate, train

logger = logging.getLogger(__name__)

RAYLEIGH = "rayleigh"

# substream purposes
_DATA, _CHANNEL, _BIAS, _CASCADE, _PGD, _NOISE, _ANGLES = range(7)


@dataclass(frozen=True)
class ExperimentConfig:
    datasets: Tuple[str, ...] = ("wbcd",)
    data_root: Optional[str] = None
    variants: Tuple[Variant, ...] = (Variant.IDEAL, Variant.OTA)
    n_r: Tuple[int, ...] = (16, 64, 256, 1024)
    n_layers: int = 5
    layer_size: int = 4096
    pathloss_db: float = -50.0
    intra_pathloss_db: float = -10.0
    snr_db: Tuple[float, ...] = (15.0,)
    ridge: float = 1e-6
    pgd: PgdOptions = field(default_factory=PgdOptions)
    # "rayleigh" or a K-factor (linear, may be inf)
    ricean_k: Tuple[object, ...] = (RAYLEIGH,)
    # fixed (aod, aoa) in radians; None draws them uniformly per system
    ricean_angles: Optional[Tuple[float, float]] = None
    encoding: TargetEncoding = TargetEncoding.ZERO_ONE
    seeds: Tuple[int, ...] = tuple(range(10))
    master_seed: int = 0
    test_fraction: float = 0.3
    mnist_pixels: int = 100
    mnist_max_samples: Optional[int] = 10_000
    mnist_pool: Tuple[str, ...] = ("train",)
    activation: ActivationMode = ActivationMode.APPROXIMATE
    inference_activation: Optional[ActivationMode] = None
    bias_reference: str = "entrywise"
    ideal_noise: bool = False
    workers: int = 1
    timing: bool = True

    def __post_init__(self):
        # YAML 1.1 reads "1e-6" as a string, so numeric fields are coerced
        for name in ("pathloss_db", "intra_pathloss_db", "ridge", "test_fraction"):
            object.__setattr__(self, name, _number(name, getattr(self, name), float))
        for name in ("n_layers", "layer_size", "master_seed", "mnist_pixels", "workers"):
            object.__setattr__(self, name, _number(name, getattr(self, name), int))
        if self.mnist_max_samples is not None:
            object.__setattr__(self, "mnist_max_samples", _number("mnist_max_samples", self.mnist_max_samples, int))
        for name in ("datasets", "variants", "n_r", "snr_db", "ricean_k", "seeds"):
            value = getattr(self, name)
            if isinstance(value, (str, int, float)):
                value = (value,)
            if len(value) == 0:
                raise InvalidArgumentError(f"{name} must be a non-empty list")
            object.__setattr__(self, name, tuple(value))
        pool = (self.mnist_pool,) if isinstance(self.mnist_pool, str) else tuple(self.mnist_pool)
        if not pool or any(part not in MNIST_FILES for part in pool):
            raise InvalidArgumentError(f"mnist_pool must list parts from {sorted(MNIST_FILES)}")
        object.__setattr__(self, "mnist_pool", pool)
        if self.data_root is not None:
            object.__setattr__(self, "data_root", str(self.data_root))
        for d in self.datasets:
            if d not in DATASET_NAMES:
                raise InvalidArgumentError(f"unknown dataset {d!r}; expected one of {DATASET_NAMES}")
        object.__setattr__(self, "variants", tuple(Variant(v) for v in self.variants))
        object.__setattr__(self, "n_r", tuple(int(n) for n in self.n_r))
        object.__setattr__(self, "snr_db", tuple(_number("snr_db", s, float) for s in self.snr_db))
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        object.__setattr__(self, "ricean_k", tuple(_parse_k(k) for k in self.ricean_k))
        object.__setattr__(self, "encoding", TargetEncoding(self.encoding))
        object.__setattr__(self, "activation", ActivationMode(self.activation))
        if self.inference_activation is not None:
            object.__setattr__(self, "inference_activation", ActivationMode(self.inference_activation))
        if isinstance(self.pgd, dict):
            object.__setattr__(self, "pgd", PgdOptions(**self.pgd))
        if self.ricean_angles is not None:
            aod, aoa = self.ricean_angles
            object.__setattr__(self, "ricean_angles", (float(aod), float(aoa)))
        if any(n < 1 for n in self.n_r) or self.layer_size < 1:
            raise InvalidArgumentError("n_r and layer_size must be >= 1")
        if self.n_layers < 0:
            raise InvalidArgumentError("n_layers must be >= 0")
        if not self.ridge > 0:
            raise InvalidArgumentError("ridge must be > 0")
        if self.bias_reference not in ("entrywise", "frobenius"):
            raise InvalidArgumentError("bias_reference must be 'entrywise' or 'frobenius'")
        if self.workers < 1:
            raise InvalidArgumentError("workers must be >= 1")
        if not 0 <= self.master_seed < 2**64:
            raise InvalidArgumentError("master_seed must be an unsigned 64-bit integer")

    # ---------------------------------------------------------------- I/O

    @classmethod
    def from_mapping(cls, mapping):
        """Build a config from a flat mapping; ``pgd.*`` keys may be dotted or nested."""
        mapping = dict(mapping or {})
        pgd = dict(mapping.pop("pgd", None) or {})
        for key in list(mapping):
            if key.startswith("pgd."):
                pgd[key[4:]] = mapping.pop(key)
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(mapping) - known)
        pgd_known = {f.name for f in dataclasses.fields(PgdOptions)}
        unknown += sorted("pgd." + k for k in set(pgd) - pgd_known)
        if unknown:
            raise InvalidArgumentError(f"unknown config keys: {', '.join(unknown)}")
        if pgd:
            mapping["pgd"] = PgdOptions(**pgd)
        return cls(**mapping)

    @classmethod
    def from_yaml(cls, text):
        data = yaml.safe_load(text)
        if data is not None and not isinstance(data, dict):
            raise InvalidArgumentError("config file must hold a key/value mapping")
        return cls.from_mapping(data)

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls.from_yaml(fh.read())

    def to_mapping(self):
        """Flat mapping with plain YAML-friendly values (inverse of ``from_mapping``)."""
        out = {}
        for f in dataclasses.fields(self):
            value = getattr(self, f.name)
            if f.name == "pgd":
                for pf in dataclasses.fields(PgdOptions):
                    out["pgd." + pf.name] = _plain(getattr(value, pf.name))
            else:
                out[f.name] = _plain(value)
        return out

    def to_yaml(self):
        return yaml.safe_dump(self.to_mapping(), sort_keys=False)

    def with_overrides(self, overrides):
        """Apply ``key=value`` strings; values are parsed as YAML scalars or lists."""
        mapping = self.to_mapping()
        for item in overrides:
            key, sep, raw = item.partition("=")
            key = key.strip()
            if not sep or not key:
                raise InvalidArgumentError(f"override {item!r} is not of the form key=value")
            if key not in mapping:
                raise InvalidArgumentError(f"unknown config key {key!r}")
            mapping[key] = yaml.safe_load(raw)
        return ExperimentConfig.from_mapping(mapping)


def _plain(value):
    if isinstance(value, tuple):
        return [_plain(v) for v in value]
    if hasattr(value, "value") and not isinstance(value, (int, float)):
        return value.value
    if isinstance(value, float) and math.isinf(value):
        return "inf"
    return value


def _number(name, value, kind):
    if isinstance(value, bool):
        raise InvalidArgumentError(f"{name} must be numeric, got {value!r}")
    try:
        out = kind(float(value)) if kind is int else kind(value)
    except (TypeError, ValueError) as exc:
        raise InvalidArgumentError(f"{name} must be numeric, got {value!r}") from exc
    if kind is int and out != float(value):
        raise InvalidArgumentError(f"{name} must be an integer, got {value!r}")
    return out


def _parse_k(k):
    if isinstance(k, str):
        if k.strip().lower() == RAYLEIGH:
            return RAYLEIGH
        try:
            k = float(k)
        except ValueError as exc:
            raise InvalidArgumentError(f"ricean_k entry {k!r} is neither 'rayleigh' nor a number") from exc
    k = float(k)
    if math.isnan(k) or k < 0:
        raise InvalidArgumentError(f"Ricean K must be >= 0, got {k!r}")
    return k


@dataclass(frozen=True)
class ExperimentRecord:
    dataset: str
    variant: str
    n_r: int
    ricean_k: object
    snr_db: float
    seed: int
    train_accuracy: float
    test_accuracy: float
    train_ls_error: float
    pgd_final_objective: Optional[float]
    pgd_iters: Optional[int]
    wallclock_ms: Optional[float]
    error: str = ""


RECORD_FIELDS = [f.name for f in dataclasses.fields(ExperimentRecord)]


# ------------------------------------------------------------------ sweep


@dataclass(frozen=True)
class SweepPoint:
    dataset: str
    variant: Variant
    n_r: int
    ricean_k: object
    snr_db: float
    seed: int


def sweep_points(config):
    """Sweep points in output order: dataset, variant, N_r, K, SNR, seed."""
    return [
        SweepPoint(d, v, n, k, s, seed)
        for d in config.datasets
        for v in config.variants
        for n in config.n_r
        for k in config.ricean_k
        for s in config.snr_db
        for seed in config.seeds
    ]


def _code(value):
    """Stable non-negative integer for a spawn key entry."""
    if isinstance(value, str):
        return zlib.crc32(value.encode())
    if isinstance(value, float):
        # round-trippable text so 15 and 15.0 agree
        return zlib.crc32(repr(float(value)).encode())
    return int(value)


def substream(config, purpose, *coords):
    seq = np.random.SeedSequence(config.master_seed, spawn_key=(purpose, *(_code(c) for c in coords)))
    return np.random.default_rng(seq)


def _sample_front(config, point, n_t):
    k = point.ricean_k
    rng = substream(config, _CHANNEL, point.dataset, point.seed, point.n_r, k)
    if k == RAYLEIGH:
        return sample_rayleigh(point.n_r, n_t, config.pathloss_db, rng)
    if config.ricean_angles is None:
        angles = RiceanParams.random_angles(k, substream(config, _ANGLES, point.dataset, point.seed, point.n_r, k))
    else:
        angles = RiceanParams(k, aod=config.ricean_angles[0], aoa=config.ricean_angles[1])
    return sample_ricean(point.n_r, n_t, config.pathloss_db, angles, rng)


def build_system(config, point, n_t):
    """Channels and bias for one sweep point (shared by both variants)."""
    H = _sample_front(config, point, n_t)
    coords = (point.dataset, point.seed, point.n_r, point.ricean_k)
    layers, terminal = [], None
    if point.variant is Variant.OTA and config.n_layers > 0:
        layers, terminal = sample_cascade_channels(
            [config.layer_size] * config.n_layers, point.n_r, config.intra_pathloss_db,
            substream(config, _CASCADE, *coords),
        )
    channels = ChannelRealization(
        H=H, layer_channels=layers, terminal=terminal,
        pathloss_db=config.pathloss_db, intra_pathloss_db=config.intra_pathloss_db,
    )
    bias = sample_bias(point.n_r, bias_reference_norm(H, config.bias_reference), n_t,
                       substream(config, _BIAS, *coords))
    return channels, bias


def prepare_data(config, dataset, seed):
    rng = substream(config, _DATA, dataset, seed)
    raw = load_dataset(dataset, config.data_root, rng=rng, mnist_pixels=config.mnist_pixels,
                       mnist_max_samples=config.mnist_max_samples, mnist_pool=config.mnist_pool)
    return prepare(raw, rng, config.test_fraction)


def run_point(config, point, data=None):
    """Train and evaluate one sweep point; numeric failures become an error row."""
    start = time.monotonic()
    base = dict(dataset=point.dataset, variant=point.variant.value, n_r=point.n_r,
                ricean_k=point.ricean_k, snr_db=point.snr_db, seed=point.seed)
    try:
        if data is None:
            data = prepare_data(config, point.dataset, point.seed)
        channels, bias = build_system(config, point, data.n_features)
        coords = (point.dataset, point.seed, point.n_r, point.ricean_k)
        train_cfg = TrainConfig(
            variant=point.variant, ridge=config.ridge, snr_db=point.snr_db,
            activation=config.activation, inference_activation=config.inference_activation,
            encoding=config.encoding, pgd=config.pgd, ideal_noise=config.ideal_noise,
        )
        model = train(data, channels, bias, train_cfg, rng=substream(config, _PGD, *coords))
        report = evaluate(data, model, rng=substream(
            config, _NOISE, *coords, point.snr_db, point.variant.value))
        trace = model.pgd_trace
        record = ExperimentRecord(
            **base,
            train_accuracy=report.train_accuracy,
            test_accuracy=report.test_accuracy,
            train_ls_error=model.train_ls_error,
            pgd_final_objective=None if trace is None else trace.final_objective,
            pgd_iters=None if trace is None else trace.iters_run,
            wallclock_ms=None,
        )
    except (NlcmsError, ArithmeticError, np.linalg.LinAlgError) as exc:
        logger.warning("sweep point %s failed: %s", point, exc)
        nan = float("nan")
        record = ExperimentRecord(**base, train_accuracy=nan, test_accuracy=nan, train_ls_error=nan,
                                  pgd_final_objective=None, pgd_iters=None, wallclock_ms=None,
                                  error=f"{type(exc).__name__}: {exc}")
    if config.timing:
        record = dataclasses.replace(record, wallclock_ms=(time.monotonic() - start) * 1e3)
    return record


def _run_group(args):
    config, points = args
    data = None
    try:
        data = prepare_data(config, points[0].dataset, points[0].seed)
    except (NlcmsError, ArithmeticError) as exc:
        logger.warning("data preparation failed: %s", exc)
    return [run_point(config, p, data) for p in points]


def run(config: ExperimentConfig, progress=None):
    """Run the full sweep and return records in sweep order.

    Dataset availability is checked for every dataset before anything is
    computed. With ``config.workers > 1`` points are distributed over
    processes; output order and values do not depend on the worker count.
    """
    for name in config.datasets:
        check_available(name, config.data_root, config.mnist_pool)

    points = sweep_points(config)
    # points sharing (dataset, seed) reuse one prepared dataset
    groups = {}
    for i, p in enumerate(points):
        groups.setdefault((p.dataset, p.seed), []).append(i)
    jobs = [(config, [points[i] for i in idx]) for idx in groups.values()]

    results = [None] * len(points)
    if config.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            outputs = pool.map(_run_group, jobs)
            for idx, recs in zip(groups.values(), outputs):
                for i, r in zip(idx, recs):
                    results[i] = r
                if progress:
                    progress(sum(r is not None for r in results), len(points))
    else:
        for idx, job in zip(groups.values(), jobs):
            for i, r in zip(idx, _run_group(job)):
                results[i] = r
            if progress:
                progress(sum(r is not None for r in results), len(points))
    return results


# -------------------------------------------------------------------- CSV


def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return f"{value:.6g}"
    return str(value)


def format_csv(records):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(RECORD_FIELDS)
    for rec in records:
        writer.writerow([_fmt(getattr(rec, name)) for name in RECORD_FIELDS])
    return buf.getvalue()


def write_csv(records, path):
    """Write records as UTF-8 CSV with LF line endings and 6 significant digits."""
    text = format_csv(records)
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(f"cannot write results to {os.fspath(path)}: {exc}") from exc


def read_csv(path):
    """Parse a file written by :func:`write_csv` back into records."""
    def num(text, kind):
        return None if text == "" else kind(text)

    out = []
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != RECORD_FIELDS:
            raise InvalidArgumentError(f"{path}: unexpected header {reader.fieldnames}")
        for row in reader:
            out.append(ExperimentRecord(
                dataset=row["dataset"],
                variant=row["variant"],
                n_r=int(row["n_r"]),
                ricean_k=_parse_k(row["ricean_k"]),
                snr_db=float(row["snr_db"]),
                seed=int(row["seed"]),
                train_accuracy=float(row["train_accuracy"]),
                test_accuracy=float(row["test_accuracy"]),
                train_ls_error=float(row["train_ls_error"]),
                pgd_final_objective=num(row["pgd_final_objective"], float),
                pgd_iters=num(row["pgd_iters"], int),
                wallclock_ms=num(row["wallclock_ms"], float),
                error=row["error"],
            ))
    return out


def summarize(records):
    """Mean test accuracy per (dataset, variant, N_r, K, SNR), skipping error rows."""
    groups = {}
    for r in records:
        if r.error:
            continue
        key = (r.dataset, r.variant, r.n_r, r.ricean_k, r.snr_db)
        groups.setdefault(key, []).append(r.test_accuracy)
    return {k: float(np.mean(v)) for k, v in groups.items()}
