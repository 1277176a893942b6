"""Fit/apply preprocessing: one-hot encoding, min-max scaling, Pearson
feature ranking, and the deterministic train/test split.

An Encoder is fitted once and is immutable afterwards; encoding is pure.
Numeric features rescale to [0,1] via (x - min) / (max - min) with the
fitted extremes; out-of-range values clamp so the serving path stays
total. Categorical features one-hot over the lexicographically sorted
vocabulary observed at fit time.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import DataError, DataFormatError, UnseenCategoryError
from .ingest import (
    CATEGORICAL,
    DEFAULT_SCHEMA,
    NUMERIC,
    FeatureSchema,
    RawRecord,
    binarize_label,
)

ENCODER_FORMAT = "nidsenc"
ENCODER_VERSION = 1


@dataclass(frozen=True)
class Encoder:
    """Fitted per-feature transform state.

    feature_order lists the selected features in working order; vocab maps
    each categorical feature to its sorted category list; bounds maps each
    numeric feature to its observed (min, max).
    """

    feature_order: tuple[str, ...]
    vocab: dict[str, tuple[str, ...]]
    bounds: dict[str, tuple[float, float]]
    source_indices: tuple[int, ...]

    @property
    def output_dim(self) -> int:
        return sum(len(self.vocab[f]) if f in self.vocab else 1 for f in self.feature_order)

    @property
    def layout(self) -> tuple[tuple[str, str | None], ...]:
        """Column index -> (feature name, category or None for numeric)."""
        cols = []
        for f in self.feature_order:
            if f in self.vocab:
                cols.extend((f, c) for c in self.vocab[f])
            else:
                cols.append((f, None))
        return tuple(cols)


@dataclass(frozen=True)
class EncodedDataset:
    matrix: np.ndarray  # (N, output_dim) float64, values in [0, 1]
    labels: np.ndarray  # (N,) uint8, attack = 1
    feature_layout: tuple[tuple[str, str | None], ...]

    def __len__(self):
        return self.matrix.shape[0]


@dataclass(frozen=True)
class SelectionReport:
    """Features ranked by |Pearson correlation| with the attack label."""

    ranking: tuple[tuple[str, float], ...]  # sorted score desc, name asc on ties


def min_max(x: float, lo: float, hi: float) -> float:
    """Rescale x into [0,1] given fitted extremes; degenerate range maps to 0."""
    if lo > hi:
        raise ValueError(f"min {lo} exceeds max {hi}")
    if hi == lo:
        return 0.0
    y = (x - lo) / (hi - lo)
    return min(max(y, 0.0), 1.0)


def fit_encoder(records: list[RawRecord], schema: FeatureSchema = DEFAULT_SCHEMA) -> Encoder:
    """Observe vocabularies and numeric extremes over the fitting records."""
    if not records:
        raise DataError("cannot fit an encoder on an empty record list")
    vocab: dict[str, tuple[str, ...]] = {}
    bounds: dict[str, tuple[float, float]] = {}
    indices = tuple(schema.index_of(f) for f in schema.selected)
    for name, idx in zip(schema.selected, indices):
        if schema.kind_of(name) == CATEGORICAL:
            vocab[name] = tuple(sorted({r.values[idx] for r in records}))
        else:
            col = np.array([float(r.values[idx]) for r in records])
            bounds[name] = (float(col.min()), float(col.max()))
    return Encoder(tuple(schema.selected), vocab, bounds, indices)


def encode_values(values: dict, encoder: Encoder) -> np.ndarray:
    """Encode a mapping of selected feature name -> raw value.

    Categorical values must be strings from the fitted vocabulary; numeric
    values may be reals or numeric strings. Missing keys and unseen
    categories raise.
    """
    out = np.zeros(encoder.output_dim)
    pos = 0
    for name in encoder.feature_order:
        if name not in values:
            raise DataError(f"missing feature: {name!r}")
        raw = values[name]
        if name in encoder.vocab:
            cats = encoder.vocab[name]
            try:
                out[pos + cats.index(str(raw))] = 1.0
            except ValueError:
                raise UnseenCategoryError(name, raw) from None
            pos += len(cats)
        else:
            try:
                x = float(raw)
            except (TypeError, ValueError):
                raise DataFormatError(f"feature {name!r} is not numeric: {raw!r}") from None
            if not math.isfinite(x):
                raise DataFormatError(f"feature {name!r} must be finite, got {raw!r}")
            lo, hi = encoder.bounds[name]
            out[pos] = min_max(x, lo, hi)
            pos += 1
    return out


def encode(record: RawRecord, encoder: Encoder) -> np.ndarray:
    """Encode one record into a vector of encoder.output_dim reals."""
    values = {name: record.values[idx] for name, idx in zip(encoder.feature_order, encoder.source_indices)}
    return encode_values(values, encoder)


def encode_dataset(records: list[RawRecord], encoder: Encoder) -> EncodedDataset:
    """Encode a record list column-block by column-block (vectorized)."""
    n = len(records)
    matrix = np.zeros((n, encoder.output_dim))
    pos = 0
    for name, idx in zip(encoder.feature_order, encoder.source_indices):
        raw = [r.values[idx] for r in records]
        if name in encoder.vocab:
            index = {c: j for j, c in enumerate(encoder.vocab[name])}
            try:
                cols = np.fromiter((index[v] for v in raw), dtype=np.intp, count=n)
            except KeyError as exc:
                raise UnseenCategoryError(name, exc.args[0]) from None
            matrix[np.arange(n), pos + cols] = 1.0
            pos += len(index)
        else:
            lo, hi = encoder.bounds[name]
            col = np.asarray(raw, dtype=np.float64)
            if hi > lo:
                matrix[:, pos] = np.clip((col - lo) / (hi - lo), 0.0, 1.0)
            pos += 1
    labels = np.fromiter((int(binarize_label(r.label)) for r in records), dtype=np.uint8, count=n)
    return EncodedDataset(matrix, labels, encoder.layout)


def rank_features(records: list[RawRecord], labels, schema: FeatureSchema = DEFAULT_SCHEMA) -> SelectionReport:
    """Score every raw feature by max |Pearson r| of its encoded columns
    against the binary label (attack = 1). Constant columns score 0.
    """
    if len(records) < 2:
        raise DataError("feature ranking needs at least 2 records")
    y = np.asarray([int(l) for l in labels], dtype=np.float64)
    if y.min() == y.max():
        raise DataError("feature ranking needs both classes present")

    full = schema.with_selected(schema.names)
    enc = fit_encoder(records, full)
    X = encode_dataset(records, enc).matrix

    xc = X - X.mean(axis=0)
    yc = y - y.mean()
    sx = np.sqrt((xc * xc).sum(axis=0))
    sy = math.sqrt(float(yc @ yc))
    num = xc.T @ yc
    with np.errstate(invalid="ignore", divide="ignore"):
        r = np.where(sx > 0.0, num / (sx * sy), 0.0)
    col_scores = np.clip(np.abs(r), 0.0, 1.0)

    scores = {}
    for (feature, _), s in zip(enc.layout, col_scores):
        scores[feature] = max(scores.get(feature, 0.0), float(s))
    ranking = sorted(scores.items(), key=lambda kv: (-kv[1], kv[0]))
    return SelectionReport(tuple(ranking))


def select_top_k(report: SelectionReport, k: int) -> list[str]:
    if k < 0 or k > len(report.ranking):
        raise ValueError(f"k must be in [0, {len(report.ranking)}], got {k}")
    return [name for name, _ in report.ranking[:k]]


def split_indices(n: int, ratio: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Seeded uniform shuffle; train gets floor(ratio * n) rows."""
    if not 0.0 < ratio < 1.0:
        raise ValueError(f"split ratio must be in (0, 1), got {ratio}")
    if n < 2:
        raise DataError(f"cannot split {n} row(s)")
    perm = np.random.default_rng(seed).permutation(n)
    n_train = math.floor(ratio * n)
    return perm[:n_train], perm[n_train:]


def split(dataset: EncodedDataset, ratio: float, seed: int) -> tuple[EncodedDataset, EncodedDataset]:
    """Partition an encoded dataset into disjoint, exhaustive train/test parts."""
    tr, te = split_indices(len(dataset), ratio, seed)
    return (
        EncodedDataset(dataset.matrix[tr], dataset.labels[tr], dataset.feature_layout),
        EncodedDataset(dataset.matrix[te], dataset.labels[te], dataset.feature_layout),
    )


def encoder_to_json(encoder: Encoder) -> str:
    doc = {
        "format": ENCODER_FORMAT,
        "version": ENCODER_VERSION,
        "feature_order": list(encoder.feature_order),
        "features": {
            name: (
                {"kind": CATEGORICAL, "vocab": list(encoder.vocab[name])}
                if name in encoder.vocab
                else {"kind": NUMERIC, "min": encoder.bounds[name][0], "max": encoder.bounds[name][1]}
            )
            for name in encoder.feature_order
        },
        "output_dim": encoder.output_dim,
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def save_encoder(encoder: Encoder, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(encoder_to_json(encoder))


def load_encoder(path, schema: FeatureSchema = DEFAULT_SCHEMA) -> Encoder:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise DataError(f"not an encoder file: {exc}") from None
    if doc.get("format") != ENCODER_FORMAT:
        raise DataError("not an encoder file (bad format marker)")
    if doc.get("version") != ENCODER_VERSION:
        raise DataError(f"unsupported encoder version: {doc.get('version')}")
    order = tuple(doc["feature_order"])
    vocab = {}
    bounds = {}
    for name in order:
        spec = doc["features"][name]
        if spec["kind"] == CATEGORICAL:
            vocab[name] = tuple(spec["vocab"])
        else:
            bounds[name] = (float(spec["min"]), float(spec["max"]))
    indices = tuple(schema.index_of(f) for f in order)
    enc = Encoder(order, vocab, bounds, indices)
    if enc.output_dim != doc["output_dim"]:
        raise DataError(f"encoder output_dim mismatch: file says {doc['output_dim']}, computed {enc.output_dim}")
    return enc


def encoder_digest(encoder_json: str | bytes) -> str:
    """Stable sha256 over the serialized encoder document."""
    if isinstance(encoder_json, str):
        encoder_json = encoder_json.encode("utf-8")
    return hashlib.sha256(encoder_json).hexdigest()


def encoder_file_digest(path) -> str:
    with open(path, "rb") as fh:
        return encoder_digest(fh.read())
