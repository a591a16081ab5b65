from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from ..errors import DataError, SchemaError
from .schema import DatasetSchema

_MISSING = {"", "-", "?", "nan", "NaN"}
NORMAL, ATTACK = 0, 1


@dataclass(frozen=True)
class FlowRecord:
    src: tuple[str, int]
    dst: tuple[str, int]
    timestamp: float
    raw_features: dict
    label_binary: int
    label_multiclass: str

    def __post_init__(self):
        if not self.src[0] or not self.dst[0]:
            raise DataError("flow endpoints must be non-empty")
        if not math.isfinite(self.timestamp):
            raise DataError(f"flow timestamp {self.timestamp!r} is not finite")


def _parse_port(text: str, row: int, col: str) -> int:
    text = text.strip()
    if text in _MISSING:
        return 0
    try:
        return int(text, 0)
    except ValueError:
        try:
            return int(float(text))
        except ValueError:
            raise DataError(f"row {row}: column {col!r}: cannot parse port {text!r}") from None


def _parse_float(text: str, row: int, col: str, *, allow_missing: bool) -> float:
    text = text.strip()
    if text in _MISSING:
        if allow_missing:
            return math.nan
        raise DataError(f"row {row}: column {col!r} is empty")
    try:
        return float(text)
    except ValueError:
        raise DataError(f"row {row}: column {col!r}: cannot parse number {text!r}") from None


def _parse_binary(text: str, row: int, col: str) -> int:
    t = text.strip().casefold()
    if t in ("0", "0.0", "normal", "benign", "false"):
        return NORMAL
    if t in ("1", "1.0", "attack", "malicious", "true"):
        return ATTACK
    raise DataError(f"row {row}: column {col!r}: unrecognised binary label {text!r}")


def _resolve_header(first_row: list[str], schema: DatasetSchema) -> tuple[dict, bool]:
    """Map every required column to its position; returns (positions, headerless)."""
    folded = [c.strip().casefold() for c in first_row]
    required = schema.required_columns
    has_labels = schema.label_binary.casefold() in folded
    if not has_labels and schema.layout and len(first_row) == len(schema.layout):
        return {name: i for i, name in enumerate(schema.layout)}, True
    where = {name: i for i, name in enumerate(folded)}
    missing = [c for c in required if c.casefold() not in where]
    if missing:
        raise SchemaError(f"{schema.name}: missing required columns: {', '.join(missing)}")
    return {c: where[c.casefold()] for c in required}, False


def load_flows(path, schema: DatasetSchema, *, strict: bool = True,
               rejects: Optional[list] = None, info: Optional[dict] = None) -> list[FlowRecord]:
    """Parse a flow CSV into :class:`FlowRecord` objects.

    Header matching ignores order and case. A file whose first row carries no
    label column but has exactly the schema's ``layout`` width is read as
    headerless. With ``strict=False`` bad rows are skipped and recorded in
    ``rejects`` as ``(row_number, message)``; otherwise the first bad row raises.
    Row numbers are 1-based physical lines of the file.
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"{path}: no such file")
    records: list[FlowRecord] = []
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        first = next(reader, None)
        if first is None:
            raise SchemaError(f"{path}: empty file, header row required")
        pos, headerless = _resolve_header(first, schema)
        if info is not None:
            info["variant"] = "headerless-layout" if headerless else "header"
        rows = reader
        if headerless:
            rows = _chain([first], reader)
        start = 1 if headerless else 2
        for lineno, row in enumerate(rows, start=start):
            if not row or all(not c.strip() for c in row):
                continue
            try:
                records.append(_parse_row(row, pos, schema, lineno))
            except DataError as exc:
                if strict:
                    raise
                if rejects is not None:
                    rejects.append((lineno, str(exc)))
    return records


def _chain(head, tail):
    yield from head
    yield from tail


def _parse_row(row: list[str], pos: dict, schema: DatasetSchema, lineno: int) -> FlowRecord:
    need = max(pos.values()) + 1
    if len(row) < need:
        raise DataError(f"row {lineno}: expected at least {need} fields, got {len(row)}")

    def cell(col):
        return row[pos[col]]

    binary = _parse_binary(cell(schema.label_binary), lineno, schema.label_binary)
    raw_cls = cell(schema.label_multiclass)
    cls = schema.canonical_class(raw_cls)
    if cls is None:
        if raw_cls.strip() in _MISSING and binary == NORMAL:
            cls = schema.normal_class
        else:
            raise DataError(f"row {lineno}: unknown class {raw_cls!r}")
    if (cls == schema.normal_class) != (binary == NORMAL):
        raise DataError(
            f"row {lineno}: multiclass label {cls!r} disagrees with binary label {binary}"
        )
    feats = {}
    for name in schema.features:
        if name in schema.categorical:
            feats[name] = cell(name).strip()
        else:
            feats[name] = _parse_float(cell(name), lineno, name, allow_missing=True)
    src_ip, dst_ip = cell(schema.src_ip).strip(), cell(schema.dst_ip).strip()
    if not src_ip or not dst_ip:
        raise DataError(f"row {lineno}: empty endpoint address")
    ts = _parse_float(cell(schema.timestamp), lineno, schema.timestamp, allow_missing=False)
    if not math.isfinite(ts):
        raise DataError(f"row {lineno}: timestamp {ts!r} is not finite")
    return FlowRecord(
        src=(src_ip, _parse_port(cell(schema.src_port), lineno, schema.src_port)),
        dst=(dst_ip, _parse_port(cell(schema.dst_port), lineno, schema.dst_port)),
        timestamp=ts,
        raw_features=feats,
        label_binary=binary,
        label_multiclass=cls,
    )
