from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..errors import DataError, UsageError
from .loader import FlowRecord
from .schema import DatasetSchema

STD_FLOOR = 1e-8
HEAVY_TAIL_RATIO = 1000.0
UNKNOWN = "<unknown>"


@dataclass
class NumericParams:
    mean: float
    std: float
    log1p: bool


@dataclass
class FeatureEncoder:
    """Per-column encoding fitted on the training split.

    Numeric columns become one z-scored slot (optionally after ``log1p``);
    categorical columns become a one-hot block whose slot 0 is the reserved
    unknown bucket. Slots follow schema feature order.
    """

    columns: list[str]
    numeric: dict[str, NumericParams] = field(default_factory=dict)
    categories: dict[str, dict[str, int]] = field(default_factory=dict)

    @property
    def output_dim(self) -> int:
        return sum(1 if c in self.numeric else len(self.categories[c]) for c in self.columns)

    def feature_names(self) -> list[str]:
        names = []
        for c in self.columns:
            if c in self.numeric:
                names.append(c)
            else:
                names.extend(f"{c}={k}" for k in self.categories[c])
        return names

    def to_dict(self) -> dict:
        return {
            "columns": list(self.columns),
            "numeric": {k: [v.mean, v.std, v.log1p] for k, v in self.numeric.items()},
            "categories": {k: list(v) for k, v in self.categories.items()},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FeatureEncoder":
        return cls(
            columns=list(d["columns"]),
            numeric={k: NumericParams(float(m), float(s), bool(f)) for k, (m, s, f) in d["numeric"].items()},
            categories={k: {name: i for i, name in enumerate(v)} for k, v in d["categories"].items()},
        )


def is_heavy_tailed(values: np.ndarray) -> bool:
    """Non-negative column whose max exceeds 1000x its median (median floored at 1)."""
    if values.size == 0 or values.min() < 0:
        return False
    med = float(np.median(values))
    return float(values.max()) / max(med, 1.0) > HEAVY_TAIL_RATIO


def fit_encoder(train: Sequence[FlowRecord], schema: DatasetSchema,
                max_categories: int = 64) -> FeatureEncoder:
    """Fit z-score and category maps on training records only.

    Categories are indexed in first-seen order; once ``max_categories`` are
    known, later values fall into the unknown bucket.
    """
    if not train:
        raise UsageError("fit_encoder needs at least one training record")
    enc = FeatureEncoder(columns=list(schema.features))
    for col in schema.features:
        if col in schema.categorical:
            index = {UNKNOWN: 0}
            for rec in train:
                v = rec.raw_features[col]
                if v not in index and len(index) <= max_categories:
                    index[v] = len(index)
            enc.categories[col] = index
            continue
        vals = np.array([rec.raw_features[col] for rec in train], dtype=np.float64)
        vals = vals[~np.isnan(vals)]
        if vals.size == 0:
            raise DataError(f"column {col!r} has no values in the training split")
        if not np.all(np.isfinite(vals)):
            raise DataError(f"column {col!r} contains infinite values")
        heavy = is_heavy_tailed(vals)
        if heavy:
            vals = np.log1p(vals)
        std = float(vals.std())
        enc.numeric[col] = NumericParams(float(vals.mean()), max(std, STD_FLOOR), heavy)
    return enc


@dataclass
class EncodedFlows:
    features: np.ndarray          # (n, F) float64
    y_binary: np.ndarray          # (n,) int64
    y_multi: np.ndarray           # (n,) int64, index into schema.classes
    timestamps: np.ndarray        # (n,) float64
    src: list                     # (ip, port) per flow
    dst: list

    def __len__(self) -> int:
        return self.features.shape[0]


def encode(enc: FeatureEncoder, records: Sequence[FlowRecord], schema: DatasetSchema) -> EncodedFlows:
    n = len(records)
    out = np.zeros((n, enc.output_dim))
    col = 0
    for name in enc.columns:
        if name in enc.numeric:
            p = enc.numeric[name]
            vals = np.array([r.raw_features[name] for r in records], dtype=np.float64)
            missing = np.isnan(vals)
            vals = np.where(missing, 0.0, vals)
            if p.log1p:
                # clamp so values below the fitted support stay finite
                vals = np.log1p(np.maximum(vals, 0.0))
            z = (vals - p.mean) / p.std
            out[:, col] = np.where(missing, 0.0, z)
            col += 1
        else:
            index = enc.categories[name]
            for i, r in enumerate(records):
                out[i, col + index.get(r.raw_features[name], 0)] = 1.0
            col += len(index)
    if not np.all(np.isfinite(out)):
        raise DataError("encoding produced non-finite values")
    class_index = {c: i for i, c in enumerate(schema.classes)}
    return EncodedFlows(
        features=out,
        y_binary=np.array([r.label_binary for r in records], dtype=np.int64),
        y_multi=np.array([class_index[r.label_multiclass] for r in records], dtype=np.int64),
        timestamps=np.array([r.timestamp for r in records], dtype=np.float64),
        src=[r.src for r in records],
        dst=[r.dst for r in records],
    )


def class_weights(labels: np.ndarray, n_classes: int) -> np.ndarray:
    """Loss weights N / (C * count_c); classes absent from ``labels`` get weight 0."""
    counts = np.bincount(np.asarray(labels, dtype=np.int64), minlength=n_classes).astype(float)
    n = counts.sum()
    with np.errstate(divide="ignore"):
        w = np.where(counts > 0, n / (n_classes * counts), 0.0)
    return w
