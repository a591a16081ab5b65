"""Differentiable operations over :class:`Tensor`.

Every function takes tensors (or array-likes for constants) and returns a new
tensor recorded on the tape when any input requires a gradient.
"""

from __future__ import annotations

import numpy as np

from ..errors import ConfigError, DataError, DimensionError
from .tensor import Tensor, as_tensor, make_op


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def _broadcast_shape(op: str, a: Tensor, b: Tensor) -> None:
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise DimensionError(f"{op}: shapes {a.shape} and {b.shape} do not broadcast") from None


# -- arithmetic -----------------------------------------------------------

def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape("add", a, b)
    sa, sb = a.shape, b.shape
    return make_op("add", a.data + b.data, (a, b),
                   lambda g: (_unbroadcast(g, sa), _unbroadcast(g, sb)))


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape("sub", a, b)
    sa, sb = a.shape, b.shape
    return make_op("sub", a.data - b.data, (a, b),
                   lambda g: (_unbroadcast(g, sa), -_unbroadcast(g, sb)))


def mul(a, b) -> Tensor:
    """Elementwise (Hadamard) product with numpy broadcasting."""
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape("mul", a, b)
    ad, bd = a.data, b.data
    return make_op("mul", ad * bd, (a, b),
                   lambda g: (_unbroadcast(g * bd, ad.shape), _unbroadcast(g * ad, bd.shape)))


hadamard = mul


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise DimensionError(f"matmul: cannot multiply {a.shape} by {b.shape}")
    ad, bd = a.data, b.data
    return make_op("matmul", ad @ bd, (a, b), lambda g: (g @ bd.T, ad.T @ g))


def spmm(matrix, x) -> Tensor:
    """Constant sparse (or dense ndarray) matrix times a 2-D tensor.

    Only ``x`` is differentiated; ``matrix`` is treated as data.
    """
    x = as_tensor(x)
    if x.ndim != 2 or matrix.shape[1] != x.shape[0]:
        raise DimensionError(f"spmm: cannot multiply {matrix.shape} by {x.shape}")
    out = np.asarray(matrix @ x.data)
    mt = matrix.T
    return make_op("spmm", out, (x,), lambda g: (np.asarray(mt @ g),))


def sum(x, axis=None, keepdims: bool = False) -> Tensor:  # noqa: A001 - mirrors numpy
    x = as_tensor(x)
    shape = x.shape
    out = x.data.sum(axis=axis, keepdims=keepdims)

    def back(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, shape).copy(),)

    return make_op("sum", out, (x,), back)


def mean_rows(x) -> Tensor:
    """Column-wise mean over the rows of a 2-D tensor, shape (1, n)."""
    x = as_tensor(x)
    if x.ndim != 2:
        raise DimensionError(f"mean_rows expects a 2-D tensor, got {x.shape}")
    m = x.shape[0]
    if m == 0:
        return make_op("mean_rows", np.zeros((1, x.shape[1])), (x,), lambda g: (np.zeros(x.shape),))
    return make_op("mean_rows", x.data.mean(axis=0, keepdims=True), (x,),
                   lambda g: (np.repeat(g / m, m, axis=0),))


# -- shape manipulation ---------------------------------------------------

def reshape(x, shape) -> Tensor:
    x = as_tensor(x)
    old = x.shape
    try:
        out = x.data.reshape(shape)
    except ValueError:
        raise DimensionError(f"reshape: cannot view {old} as {tuple(shape)}") from None
    return make_op("reshape", out, (x,), lambda g: (g.reshape(old),))


def transpose(x) -> Tensor:
    x = as_tensor(x)
    if x.ndim != 2:
        raise DimensionError(f"transpose expects a 2-D tensor, got {x.shape}")
    return make_op("transpose", x.data.T.copy(), (x,), lambda g: (g.T,))


def index(x, idx) -> Tensor:
    """Basic or integer-array indexing; repeated indices accumulate gradient."""
    x = as_tensor(x)
    out = x.data[idx]
    shape = x.shape

    def back(g):
        full = np.zeros(shape)
        np.add.at(full, idx, g)
        return (full,)

    return make_op("index", np.array(out, copy=True), (x,), back)


def take_rows(x, rows) -> Tensor:
    """Gather rows of a 2-D tensor by integer index array."""
    rows = np.asarray(rows, dtype=np.int64)
    return index(x, rows)


def concat(tensors, axis: int = -1) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    if not tensors:
        raise DimensionError("concat needs at least one tensor")
    ndim = tensors[0].ndim
    ax = axis % ndim
    for t in tensors[1:]:
        if t.ndim != ndim or any(
            t.shape[i] != tensors[0].shape[i] for i in range(ndim) if i != ax
        ):
            raise DimensionError(
                f"concat along axis {axis}: incompatible shapes {[t.shape for t in tensors]}"
            )
    sizes = [t.shape[ax] for t in tensors]
    cuts = np.cumsum(sizes)[:-1]

    def back(g):
        return tuple(np.split(g, cuts, axis=ax))

    return make_op("concat", np.concatenate([t.data for t in tensors], axis=ax), tensors, back)


# -- nonlinearities -------------------------------------------------------

def sigmoid(x) -> Tensor:
    x = as_tensor(x)
    # split by sign so exp never overflows
    d = x.data
    out = np.empty_like(d)
    pos = d >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-d[pos]))
    e = np.exp(d[~pos])
    out[~pos] = e / (1.0 + e)
    return make_op("sigmoid", out, (x,), lambda g: (g * out * (1.0 - out),))


def tanh(x) -> Tensor:
    x = as_tensor(x)
    out = np.tanh(x.data)
    return make_op("tanh", out, (x,), lambda g: (g * (1.0 - out * out),))


def relu(x) -> Tensor:
    x = as_tensor(x)
    mask = x.data > 0
    return make_op("relu", np.where(mask, x.data, 0.0), (x,), lambda g: (g * mask,))


def leaky_relu(x, slope: float = 0.2) -> Tensor:
    x = as_tensor(x)
    scale = np.where(x.data > 0, 1.0, slope)
    return make_op("leaky_relu", x.data * scale, (x,), lambda g: (g * scale,))


def softmax_rows(x) -> Tensor:
    x = as_tensor(x)
    if x.ndim != 2:
        raise DimensionError(f"softmax_rows expects a 2-D tensor, got {x.shape}")
    z = x.data - x.data.max(axis=1, keepdims=True)
    e = np.exp(z)
    out = e / e.sum(axis=1, keepdims=True)

    def back(g):
        return (out * (g - (g * out).sum(axis=1, keepdims=True)),)

    return make_op("softmax_rows", out, (x,), back)


def segment_softmax(x, segments, num_segments: int) -> Tensor:
    """Softmax of a 1-D tensor within groups given by ``segments``.

    Entry ``i`` is normalised against every entry sharing ``segments[i]``.
    """
    x = as_tensor(x)
    seg = np.asarray(segments, dtype=np.int64)
    if x.ndim != 1 or seg.shape != x.shape:
        raise DimensionError(f"segment_softmax: values {x.shape} vs segments {seg.shape}")
    peak = np.full(num_segments, -np.inf)
    np.maximum.at(peak, seg, x.data)
    e = np.exp(x.data - peak[seg])
    denom = np.zeros(num_segments)
    np.add.at(denom, seg, e)
    out = e / denom[seg]

    def back(g):
        dots = np.zeros(num_segments)
        np.add.at(dots, seg, g * out)
        return (out * (g - dots[seg]),)

    return make_op("segment_softmax", out, (x,), back)


def dropout(x, rate: float, rng: np.random.Generator | None, train: bool) -> Tensor:
    """Inverted dropout: survivors scaled by 1/(1-rate) so eval mode is identity."""
    x = as_tensor(x)
    if not 0.0 <= rate < 1.0:
        raise ConfigError(f"dropout rate must lie in [0, 1), got {rate}")
    if not train or rate == 0.0:
        return x
    if rng is None:
        raise ConfigError("dropout in train mode needs an rng")
    keep = (rng.random(x.shape) >= rate) / (1.0 - rate)
    return make_op("dropout", x.data * keep, (x,), lambda g: (g * keep,))


# -- temporal convolution -------------------------------------------------

def conv1d_causal(x, kernel, bias, dilation: int = 1) -> Tensor:
    """Causal 1-D convolution over the middle (time) axis.

    Args:
        x: (N, S, D_in) input sequences.
        kernel: (w, D_in, D_out); ``kernel[w-1]`` weights the current step.
        bias: (D_out,).
        dilation: spacing between kernel taps.

    The input is left-padded with ``(w-1)*dilation`` zeros so the output keeps
    length S and position t only sees inputs at positions <= t.
    """
    x, kernel, bias = as_tensor(x), as_tensor(kernel), as_tensor(bias)
    if x.ndim != 3 or kernel.ndim != 3 or bias.ndim != 1:
        raise DimensionError(
            f"conv1d_causal: expected x (N,S,D), kernel (w,D,D'), bias (D',); "
            f"got {x.shape}, {kernel.shape}, {bias.shape}"
        )
    n, s, d_in = x.shape
    w, k_in, d_out = kernel.shape
    if k_in != d_in or bias.shape[0] != d_out:
        raise DimensionError(
            f"conv1d_causal: input channels {d_in} vs kernel {kernel.shape}, bias {bias.shape}"
        )
    if w > s:
        raise ConfigError(f"conv1d_causal: kernel width {w} exceeds sequence length {s}")
    if dilation < 1:
        raise ConfigError(f"conv1d_causal: dilation must be >= 1, got {dilation}")
    pad = (w - 1) * dilation
    xp = np.concatenate([np.zeros((n, pad, d_in)), x.data], axis=1)
    kd = kernel.data
    out = np.broadcast_to(bias.data, (n, s, d_out)).copy()
    for j in range(w):
        off = j * dilation
        out += xp[:, off:off + s, :] @ kd[j]

    def back(g):
        gxp = np.zeros_like(xp)
        gk = np.empty_like(kd)
        for j in range(w):
            off = j * dilation
            gxp[:, off:off + s, :] += g @ kd[j].T
            gk[j] = np.einsum("nsi,nso->io", xp[:, off:off + s, :], g)
        return gxp[:, pad:, :], gk, g.sum(axis=(0, 1))

    return make_op("conv1d_causal", out, (x, kernel, bias), back, dilation=dilation)


# -- loss -----------------------------------------------------------------

def cross_entropy(logits, labels, class_weights=None) -> Tensor:
    """Mean of (optionally class-weighted) negative log-softmax of the true class."""
    logits = as_tensor(logits)
    if logits.ndim != 2:
        raise DimensionError(f"cross_entropy expects (N, C) logits, got {logits.shape}")
    n, c = logits.shape
    y = np.asarray(labels, dtype=np.int64).reshape(-1)
    if y.shape[0] != n:
        raise DimensionError(f"cross_entropy: {n} logit rows but {y.shape[0]} labels")
    bad = np.flatnonzero((y < 0) | (y >= c))
    if bad.size:
        raise DataError(f"cross_entropy: label {y[bad[0]]} at row {bad[0]} outside [0, {c})")
    if n == 0:
        raise DataError("cross_entropy: empty batch")
    w = np.ones(c) if class_weights is None else np.asarray(
        class_weights.data if isinstance(class_weights, Tensor) else class_weights, dtype=np.float64)
    if w.shape != (c,):
        raise DimensionError(f"cross_entropy: class weights {w.shape} for {c} classes")
    z = logits.data - logits.data.max(axis=1, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=1))
    rows = np.arange(n)
    nll = lse - z[rows, y]
    wy = w[y]
    loss = float((wy * nll).sum() / n)
    probs = np.exp(z - lse[:, None])

    def back(g):
        grad = probs.copy()
        grad[rows, y] -= 1.0
        return (grad * (wy / n)[:, None] * g,)

    return make_op("cross_entropy", np.array(loss), (logits,), back)
