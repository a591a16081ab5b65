from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from ..errors import UsageError
from .tensor import Tensor, backward, no_grad


def _scalar(out: Tensor) -> float:
    if out.data.size != 1:
        raise UsageError(f"grad_check: f must return a scalar, got shape {out.shape}")
    return float(out.data.reshape(()))


def grad_check(f: Callable[..., Tensor], inputs: Sequence[Tensor], eps: float = 1e-6) -> float:
    """Compare tape gradients of ``f(*inputs)`` with central differences.

    Every input with ``requires_grad`` is perturbed elementwise. Returns the
    largest ``|analytic - numeric| / max(1, |numeric|)`` over all elements.
    Existing ``.grad`` values on the inputs are overwritten.
    """
    targets = [t for t in inputs if t.requires_grad]
    if not targets:
        raise UsageError("grad_check: no input requires a gradient")

    with no_grad():
        base = _scalar(f(*inputs))
        again = _scalar(f(*inputs))
    if base != again:
        raise UsageError(
            f"grad_check: f is not deterministic ({base!r} vs {again!r}); disable dropout"
        )

    for t in targets:
        t.grad = None
    out = f(*inputs)
    backward(out)
    analytic = [np.zeros(t.shape) if t.grad is None else t.grad.copy() for t in targets]

    worst = 0.0
    with no_grad():
        for t, a in zip(targets, analytic):
            flat = t.data.reshape(-1)
            a_flat = a.reshape(-1)
            for i in range(flat.size):
                orig = flat[i]
                flat[i] = orig + eps
                up = _scalar(f(*inputs))
                flat[i] = orig - eps
                down = _scalar(f(*inputs))
                flat[i] = orig
                numeric = (up - down) / (2.0 * eps)
                err = abs(a_flat[i] - numeric) / max(1.0, abs(numeric))
                worst = max(worst, err)
    return worst
