"""Optimisation loop, evaluation and metrics."""

from .loop import (
    BINARY_CLASSES,
    DEFAULT_LR,
    Adam,
    TrainConfig,
    TrainResult,
    clip_gradients,
    evaluate,
    predict,
    read_history,
    train,
    write_history,
)
from .metrics import (
    EvalReport,
    argmax_lower,
    confusion_matrix,
    parse_report,
    precision_recall_f1,
    read_report,
    weighted_f1,
)

__all__ = [
    "Adam", "TrainConfig", "TrainResult", "train", "evaluate", "predict", "clip_gradients",
    "read_history", "write_history", "BINARY_CLASSES", "DEFAULT_LR",
    "EvalReport", "argmax_lower", "confusion_matrix", "parse_report", "precision_recall_f1",
    "read_report", "weighted_f1",
]
