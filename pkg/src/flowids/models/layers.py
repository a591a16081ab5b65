"""Building blocks shared by the three architectures."""

from __future__ import annotations

from typing import Optional, Sequence

import numpy as np
import scipy.sparse as sp

from .. import diffcore as dc
from ..diffcore import Tensor
from ..errors import DimensionError


def glorot(rng: np.random.Generator, shape: tuple, name: str) -> Tensor:
    fan_in, fan_out = (shape[-2], shape[-1]) if len(shape) >= 2 else (shape[0], shape[0])
    if len(shape) == 3:
        fan_in *= shape[0]
        fan_out *= shape[0]
    lim = np.sqrt(6.0 / (fan_in + fan_out))
    return Tensor(rng.uniform(-lim, lim, size=shape), requires_grad=True, name=name)


def zeros(shape: tuple, name: str) -> Tensor:
    return Tensor(np.zeros(shape), requires_grad=True, name=name)


def segment_matrix(owner: np.ndarray, n_rows: int, n_cols: int, mean: bool) -> sp.csr_matrix:
    """Row ``i`` sums (or averages) the columns whose owner is ``i``."""
    owner = np.asarray(owner, dtype=np.int64)
    counts = np.bincount(owner, minlength=n_rows).astype(np.float64)
    vals = 1.0 / counts[owner] if mean else np.ones(owner.shape[0])
    return sp.csr_matrix((vals, (owner, np.arange(owner.shape[0]))), shape=(n_rows, n_cols))


def mean_aggregate(states: Tensor, owner: np.ndarray, num_targets: int) -> Tensor:
    """Mean of ``states`` rows per target; a target with no rows gets zeros."""
    states = dc.as_tensor(states)
    return dc.spmm(segment_matrix(owner, num_targets, states.shape[0], mean=True), states)


def sage_update(h_prev: Tensor, h_nbr: Tensor, W: Tensor) -> Tensor:
    """relu([h_prev || h_nbr] @ W)."""
    x = dc.concat([h_prev, h_nbr], axis=1)
    if x.shape[1] != W.shape[0]:
        raise DimensionError(
            f"sage_update: state width {h_prev.shape[1]} + neighbour width {h_nbr.shape[1]} "
            f"does not match weight {W.shape}"
        )
    return dc.relu(x @ W)


def sage_edge_embed(h_u: Tensor, h_v: Tensor, e_uv, residual: bool) -> Tensor:
    parts = [h_u, h_v] + ([dc.as_tensor(e_uv)] if residual else [])
    return dc.concat(parts, axis=1)


def attention_coeffs(wh_u: Tensor, wh_v: Tensor, a: Tensor, segments: np.ndarray,
                     num_segments: int, slope: float = 0.2) -> Tensor:
    """Softmax over each target's entries of leaky_relu([Wh_u || Wh_v] @ a).

    Row ``i`` of ``wh_u``/``wh_v`` is one (neighbour, target) entry and
    ``segments[i]`` its target.
    """
    score = dc.leaky_relu(dc.concat([wh_u, wh_v], axis=1) @ a, slope)
    return dc.segment_softmax(dc.reshape(score, (score.shape[0],)), segments, num_segments)


def with_self_loops(targets_pos: np.ndarray, owner: np.ndarray, nbr_pos: np.ndarray):
    """Give every target without entries a single entry pointing at itself."""
    n = targets_pos.shape[0]
    lonely = np.flatnonzero(np.bincount(owner, minlength=n) == 0)
    if lonely.size == 0:
        return owner, nbr_pos
    owner = np.concatenate([owner, lonely])
    nbr_pos = np.concatenate([nbr_pos, targets_pos[lonely]])
    order = np.argsort(owner, kind="stable")
    return owner[order], nbr_pos[order]


def attention_heads(h: Tensor, targets_pos: np.ndarray, owner: np.ndarray, nbr_pos: np.ndarray,
                    heads: Sequence[tuple[Tensor, Tensor]], *, rate: float = 0.0,
                    rng: Optional[np.random.Generator] = None, train: bool = False,
                    mask: bool = False, alphas: Optional[list] = None) -> Tensor:
    """Concatenated per-head ``tanh(sum_u alpha_uv W h_u)`` for every target.

    ``h`` holds the previous-layer state of a node set; ``targets_pos`` and
    ``nbr_pos`` index into it. ``mask`` zeroes the aggregated messages, which
    removes every path from neighbours (the node itself included).
    """
    owner, nbr_pos = with_self_loops(targets_pos, owner, nbr_pos)
    n_t = targets_pos.shape[0]
    summer = segment_matrix(owner, n_t, owner.shape[0], mean=False)
    if mask:
        summer = sp.csr_matrix(summer.shape)
    outs = []
    for W, a in heads:
        wh = h @ W
        wu = dc.take_rows(wh, nbr_pos)
        wv = dc.take_rows(wh, targets_pos[owner])
        alpha = attention_coeffs(wu, wv, a, owner, n_t)
        if alphas is not None:
            alphas.append((alpha.data.copy(), owner.copy()))
        alpha = dc.dropout(alpha, rate, rng, train)
        msg = wu * dc.reshape(alpha, (alpha.shape[0], 1))
        outs.append(dc.tanh(dc.spmm(summer, msg)))
    return dc.concat(outs, axis=1)


def gated_tcn(x, theta1: Tensor, b: Tensor, theta2: Tensor, c: Tensor, dilation: int = 1) -> Tensor:
    """tanh(conv(x; theta1) + b) * sigmoid(conv(x; theta2) + c), causal."""
    return dc.tanh(dc.conv1d_causal(x, theta1, b, dilation)) * \
        dc.sigmoid(dc.conv1d_causal(x, theta2, c, dilation))


def adaptive_adjacency(E1: Tensor, E2: Tensor) -> Tensor:
    """Row-stochastic softmax(relu(E1 E2^T))."""
    if E1.shape[1] != E2.shape[1]:
        raise DimensionError(f"adaptive_adjacency: ranks differ, {E1.shape} vs {E2.shape}")
    return dc.softmax_rows(dc.relu(E1 @ dc.transpose(E2)))


def diffusion_gconv(x: Tensor, p_f, p_b, a_adp: Optional[Tensor],
                    weights: Sequence[tuple[Tensor, Tensor, Tensor]]) -> Tensor:
    """sum_k P_f^k X W_k1 + P_b^k X W_k2 + A^k X W_k3 for k = 0..len(weights)-1.

    Powers are applied by repeated propagation. ``a_adp`` may be ``None`` to
    drop the adaptive term.
    """
    xf = xb = xa = dc.as_tensor(x)
    total = None
    for k, (w1, w2, w3) in enumerate(weights):
        if k:
            xf = dc.spmm(p_f, xf)
            xb = dc.spmm(p_b, xb)
            if a_adp is not None:
                xa = a_adp @ xa
        term = xf @ w1 + xb @ w2
        if a_adp is not None:
            term = term + xa @ w3
        total = term if total is None else total + term
    return total
