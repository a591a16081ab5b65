"""Little-endian binary checkpoints.

Layout::

    8s   magic  b"FLOWCKPT"
    u32  format version
    u16  tag length, then the architecture tag (utf-8)
    u32  JSON length, then the hyperparameter block (utf-8 JSON)
    u32  parameter count
    per parameter:
      u16 name length, name (utf-8)
      u8  ndim, then ndim x u64 shape
      float64 payload, row-major
"""

from __future__ import annotations

import json
import struct
from pathlib import Path
from typing import Optional

import numpy as np

from ..diffcore import Tensor
from ..errors import ConfigError

MAGIC = b"FLOWCKPT"
VERSION = 1


def save_checkpoint(path, model, meta: Optional[dict] = None) -> Path:
    path = Path(path)
    tag = model.kind.encode("utf-8")
    hyper = json.dumps({"model": model.config.to_dict(), "meta": meta or {}},
                       sort_keys=True).encode("utf-8")
    chunks = [MAGIC, struct.pack("<I", VERSION),
              struct.pack("<H", len(tag)), tag,
              struct.pack("<I", len(hyper)), hyper,
              struct.pack("<I", len(model.params))]
    for name, t in model.params.items():
        raw = name.encode("utf-8")
        arr = np.ascontiguousarray(t.data, dtype="<f8")
        chunks += [struct.pack("<H", len(raw)), raw, struct.pack("<B", arr.ndim),
                   struct.pack(f"<{arr.ndim}Q", *arr.shape), arr.tobytes()]
    path.write_bytes(b"".join(chunks))
    return path


class _Reader:
    def __init__(self, buf: bytes, source):
        self.buf, self.pos, self.source = buf, 0, source

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.buf):
            raise ConfigError(f"{self.source}: checkpoint truncated at byte {self.pos}")
        out = self.buf[self.pos:self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def read_checkpoint(path) -> tuple[str, dict, dict[str, np.ndarray]]:
    """(architecture tag, hyperparameter block, parameter arrays)."""
    r = _Reader(Path(path).read_bytes(), path)
    if r.take(8) != MAGIC:
        raise ConfigError(f"{path}: not a model checkpoint")
    (version,) = r.unpack("<I")
    if version != VERSION:
        raise ConfigError(f"{path}: checkpoint format version {version}, expected {VERSION}")
    (n,) = r.unpack("<H")
    tag = r.take(n).decode("utf-8")
    (n,) = r.unpack("<I")
    hyper = json.loads(r.take(n).decode("utf-8"))
    (count,) = r.unpack("<I")
    params = {}
    for _ in range(count):
        (n,) = r.unpack("<H")
        name = r.take(n).decode("utf-8")
        (ndim,) = r.unpack("<B")
        shape = r.unpack(f"<{ndim}Q")
        size = int(np.prod(shape)) if ndim else 1
        params[name] = np.frombuffer(r.take(8 * size), dtype="<f8").reshape(shape).astype(np.float64)
    if r.pos != len(r.buf):
        raise ConfigError(f"{path}: {len(r.buf) - r.pos} trailing bytes after checkpoint")
    return tag, hyper, params


def load_checkpoint(path, expected_kind: Optional[str] = None):
    """Rebuild the model stored at ``path``; returns (model, meta)."""
    from . import MODEL_CLASSES, ModelConfig

    tag, hyper, arrays = read_checkpoint(path)
    if expected_kind is not None and tag != expected_kind:
        raise ConfigError(f"{path}: checkpoint holds a {tag} model, not {expected_kind}")
    if tag not in MODEL_CLASSES:
        raise ConfigError(f"{path}: unknown architecture tag {tag!r}")
    cfg = ModelConfig.from_dict(hyper["model"])
    if cfg.kind != tag:
        raise ConfigError(f"{path}: tag {tag} disagrees with stored settings ({cfg.kind})")
    model = MODEL_CLASSES[tag](cfg, seed=0)
    if set(arrays) != set(model.params):
        missing = sorted(set(model.params) - set(arrays))
        extra = sorted(set(arrays) - set(model.params))
        raise ConfigError(f"{path}: parameter mismatch; missing {missing}, unexpected {extra}")
    for name, t in model.params.items():
        if arrays[name].shape != t.shape:
            raise ConfigError(f"{path}: {name} has shape {arrays[name].shape}, expected {t.shape}")
        model.params[name] = Tensor(arrays[name], requires_grad=True, name=name)
    return model, hyper.get("meta", {})
