"""Minibatch training with Adam, gradient clipping and best-validation selection.

Training is transductive: the model sees the graph over every flow, but
losses and metrics only read labels at the indices they are given.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from .. import diffcore as dc
from ..dataio.encoder import class_weights
from ..errors import ConfigError, DivergenceError, NonFiniteError
from .metrics import EvalReport, argmax_lower

DEFAULT_LR = {"UNSW-NB15": 0.007, "ToN-IoT": 0.01}
EVAL_EPOCH = 0xFFFFFFFF      # sampling key used outside training
BINARY_CLASSES = ("Normal", "Attack")


@dataclass
class TrainConfig:
    epochs: int = 10
    batch_size: int = 500
    lr: float = 0.007
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    clip_norm: float = 5.0
    seed: int = 0
    task: str = "multiclass"
    class_weighted: bool = False

    def __post_init__(self):
        if self.task not in ("binary", "multiclass"):
            raise ConfigError(f"task must be binary or multiclass, got {self.task!r}")
        if self.batch_size < 1:
            raise ConfigError(f"batch size must be >= 1, got {self.batch_size}")
        if self.epochs < 0:
            raise ConfigError(f"epochs must be >= 0, got {self.epochs}")
        if not self.lr >= 0:
            raise ConfigError(f"learning rate must be >= 0, got {self.lr}")
        if self.clip_norm is not None and self.clip_norm <= 0:
            raise ConfigError(f"clip norm must be positive, got {self.clip_norm}")

    def to_dict(self) -> dict:
        return asdict(self)


class Adam:
    def __init__(self, params: Sequence[dc.Tensor], lr: float, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = list(params)
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = [np.zeros(p.shape) for p in self.params]
        self.v = [np.zeros(p.shape) for p in self.params]
        self.t = 0

    def step(self, grads: Sequence[np.ndarray]) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        c1, c2 = 1 - b1 ** self.t, 1 - b2 ** self.t
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            m *= b1
            m += (1 - b1) * g
            v *= b2
            v += (1 - b2) * g * g
            p.data = p.data - self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


def clip_gradients(grads: list[np.ndarray], max_norm: Optional[float]) -> tuple[list[np.ndarray], float]:
    """Scale all gradients together so their global L2 norm is at most ``max_norm``."""
    norm = float(np.sqrt(sum(float((g * g).sum()) for g in grads)))
    if max_norm is None or norm <= max_norm or norm == 0:
        return grads, norm
    scale = max_norm / norm
    return [g * scale for g in grads], norm


def batches(idx: np.ndarray, size: int) -> list[np.ndarray]:
    return [idx[i:i + size] for i in range(0, idx.shape[0], size)]


def _dropout_rng(seed: int, epoch: int, batch: int) -> np.random.Generator:
    return np.random.default_rng([seed, epoch, batch, 0xD0])


def predict(model, ctx, idx, batch_size: int = 500, workers: int = 1) -> np.ndarray:
    """Eval-mode class predictions for ``idx``, batched in the given order."""
    idx = np.asarray(idx, dtype=np.int64)
    parts = batches(idx, batch_size)

    def run(item):
        b, part = item
        with dc.no_grad():
            logits = model.forward(part, ctx, train=False, epoch=EVAL_EPOCH, batch_index=b)
        return argmax_lower(logits.data)

    if workers > 1 and len(parts) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            preds = list(pool.map(run, enumerate(parts)))
    else:
        preds = [run(item) for item in enumerate(parts)]
    return np.concatenate(preds) if preds else np.zeros(0, dtype=np.int64)


def evaluate(model, ctx, labels, idx, class_names: Sequence[str], task: str = "multiclass",
             batch_size: int = 500, workers: int = 1, info: Optional[dict] = None) -> EvalReport:
    idx = np.asarray(idx, dtype=np.int64)
    pred = predict(model, ctx, idx, batch_size, workers)
    return EvalReport.from_predictions(np.asarray(labels)[idx], pred, class_names, task, info)


@dataclass
class TrainResult:
    model: object
    history: list[dict]
    best_epoch: int


def write_history(path, history: list[dict]) -> Path:
    """One JSON object per line: epoch, train_loss, val_weighted_f1."""
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        for rec in history:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
    return path


def read_history(path) -> list[dict]:
    return [json.loads(line) for line in Path(path).read_text(encoding="utf-8").splitlines()
            if line.strip()]


def train(model, ctx, labels, train_idx, val_idx, cfg: TrainConfig, class_names: Sequence[str],
          *, history_path=None, progress: Optional[Callable[[dict], None]] = None) -> TrainResult:
    """Fit ``model`` in place; on return it holds the best-validation parameters.

    Without validation indices the last epoch is kept.
    """
    labels = np.asarray(labels, dtype=np.int64)
    train_idx = np.asarray(train_idx, dtype=np.int64)
    val_idx = np.asarray(val_idx, dtype=np.int64)
    if train_idx.size == 0:
        raise ConfigError("training split is empty")
    n_classes = len(class_names)
    weights = class_weights(labels[train_idx], n_classes) if cfg.class_weighted else None
    params = model.parameters()
    opt = Adam(params, cfg.lr, cfg.beta1, cfg.beta2, cfg.eps)
    order_rng = np.random.default_rng([cfg.seed, 0x5EED])
    history: list[dict] = []
    best_f1, best_epoch = -np.inf, 0
    best_state = {k: v.data.copy() for k, v in model.params.items()}

    for epoch in range(1, cfg.epochs + 1):
        order = order_rng.permutation(train_idx)
        total, seen = 0.0, 0
        for b, batch in enumerate(batches(order, cfg.batch_size)):
            dc.zero_grad(params)
            try:
                logits = model.forward(batch, ctx, train=True,
                                       rng=_dropout_rng(cfg.seed, epoch, b),
                                       epoch=epoch, batch_index=b)
                loss = dc.cross_entropy(logits, labels[batch], weights)
                value = float(loss.data)
                if not np.isfinite(value):
                    raise NonFiniteError(f"loss is {value}")
                dc.backward(loss, inputs=params)
                grads, _ = clip_gradients([p.grad for p in params], cfg.clip_norm)
                if not all(np.all(np.isfinite(g)) for g in grads):
                    raise NonFiniteError("gradient is non-finite")
                opt.step(grads)
                if not all(np.all(np.isfinite(p.data)) for p in params):
                    raise NonFiniteError("parameters are non-finite after the update")
            except NonFiniteError as exc:
                raise DivergenceError(
                    f"training diverged at epoch {epoch}, batch {b} "
                    f"({batch.shape[0]} flows, first {batch[:5].tolist()}): {exc}",
                    epoch=epoch, batch=b, param_norms=model.param_norms()) from exc
            total += value * batch.shape[0]
            seen += batch.shape[0]
        rec = {"epoch": epoch, "train_loss": total / seen, "val_weighted_f1": None}
        if val_idx.size:
            try:
                rec["val_weighted_f1"] = evaluate(model, ctx, labels, val_idx, class_names,
                                                  cfg.task, cfg.batch_size).weighted_f1
            except NonFiniteError as exc:
                raise DivergenceError(f"validation forward diverged after epoch {epoch}: {exc}",
                                      epoch=epoch, batch=-1,
                                      param_norms=model.param_norms()) from exc
        score = rec["val_weighted_f1"] if rec["val_weighted_f1"] is not None else -np.inf
        if score > best_f1 or not val_idx.size:
            best_f1, best_epoch = score, epoch
            best_state = {k: v.data.copy() for k, v in model.params.items()}
        history.append(rec)
        if progress is not None:
            progress(rec)

    for k, v in best_state.items():
        model.params[k].data = v
    for p in params:
        p.grad = None
    if history_path is not None:
        write_history(history_path, history)
    return TrainResult(model, history, best_epoch)
