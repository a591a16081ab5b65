"""On-disk layout of an encoded, split dataset.

A bundle directory holds::

    meta.json       encoder parameters, class names, split summary
    train.bin       \
    val.bin          > one float matrix per split (layout below)
    test.bin        /
    endpoints.tsv   flow_index, src_ip, src_port, dst_ip, dst_port

Matrix files are little-endian: an 8-byte magic ``FLOWMAT\\0``, uint32 format
version, uint32 count of leading metadata columns, uint64 rows, uint64 columns,
then ``rows * columns`` float64 values in row-major order. The metadata
columns are ``flow_index, timestamp, label_binary, label_multiclass``;
encoded features follow.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import DataError
from .encoder import EncodedFlows
from .split import Split

MAGIC = b"FLOWMAT\x00"
VERSION = 1
META_COLS = 4
_HEADER = struct.Struct("<8sIIQQ")
SPLITS = ("train", "val", "test")


def write_matrix(path, matrix: np.ndarray, meta_cols: int = META_COLS) -> None:
    m = np.ascontiguousarray(matrix, dtype="<f8")
    rows, cols = m.shape
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, meta_cols, rows, cols))
        fh.write(m.tobytes())


def read_matrix(path) -> tuple[np.ndarray, int]:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise DataError(f"{path}: truncated header")
    magic, version, meta_cols, rows, cols = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise DataError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise DataError(f"{path}: unsupported matrix version {version}")
    expected = _HEADER.size + rows * cols * 8
    if len(raw) != expected:
        raise DataError(f"{path}: expected {expected} bytes, found {len(raw)}")
    data = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size).reshape(rows, cols)
    return data.astype(np.float64), meta_cols


@dataclass
class Bundle:
    flows: EncodedFlows
    split: Split
    meta: dict


def write_bundle(directory, flows: EncodedFlows, split: Split, meta: dict) -> None:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    for name in SPLITS:
        idx = getattr(split, name)
        block = np.column_stack([
            idx.astype(np.float64),
            flows.timestamps[idx],
            flows.y_binary[idx].astype(np.float64),
            flows.y_multi[idx].astype(np.float64),
            flows.features[idx],
        ]) if len(idx) else np.zeros((0, META_COLS + flows.features.shape[1]))
        write_matrix(d / f"{name}.bin", block)
    with open(d / "endpoints.tsv", "w", encoding="utf-8", newline="\n") as fh:
        fh.write("flow_index\tsrc_ip\tsrc_port\tdst_ip\tdst_port\n")
        for i, (s, t) in enumerate(zip(flows.src, flows.dst)):
            fh.write(f"{i}\t{s[0]}\t{s[1]}\t{t[0]}\t{t[1]}\n")
    full = dict(meta)
    full.update(
        format="flowids-bundle",
        version=VERSION,
        n_flows=len(flows),
        n_features=int(flows.features.shape[1]),
        sizes={name: int(len(getattr(split, name))) for name in SPLITS},
        stratified=bool(split.stratified),
        warnings=list(split.warnings),
    )
    (d / "meta.json").write_text(json.dumps(full, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def read_bundle(directory) -> Bundle:
    d = Path(directory)
    if not (d / "meta.json").is_file():
        raise DataError(f"{d}: not a prepared bundle (meta.json missing)")
    meta = json.loads((d / "meta.json").read_text(encoding="utf-8"))
    n = int(meta["n_flows"])
    f = int(meta["n_features"])
    features = np.zeros((n, f))
    ts = np.zeros(n)
    yb = np.zeros(n, dtype=np.int64)
    ym = np.zeros(n, dtype=np.int64)
    seen = np.zeros(n, dtype=bool)
    parts = {}
    for name in SPLITS:
        block, meta_cols = read_matrix(d / f"{name}.bin")
        if block.shape[1] != meta_cols + f:
            raise DataError(f"{d / name}.bin: {block.shape[1]} columns, expected {meta_cols + f}")
        idx = block[:, 0].astype(np.int64)
        if np.any(seen[idx]):
            raise DataError(f"{d}: flow appears in more than one split")
        seen[idx] = True
        ts[idx] = block[:, 1]
        yb[idx] = block[:, 2].astype(np.int64)
        ym[idx] = block[:, 3].astype(np.int64)
        features[idx] = block[:, meta_cols:]
        parts[name] = idx
    if not seen.all():
        raise DataError(f"{d}: splits do not cover all {n} flows")
    src, dst = [None] * n, [None] * n
    with open(d / "endpoints.tsv", encoding="utf-8") as fh:
        next(fh)
        for line in fh:
            i, sip, sport, dip, dport = line.rstrip("\n").split("\t")
            src[int(i)] = (sip, int(sport))
            dst[int(i)] = (dip, int(dport))
    flows = EncodedFlows(features, yb, ym, ts, src, dst)
    split = Split(parts["train"], parts["val"], parts["test"], bool(meta.get("stratified", True)),
                  list(meta.get("warnings", [])))
    return Bundle(flows, split, meta)
