"""Multi-head attention over sampled line-graph neighbourhoods.

Used twice: alone as the GAT baseline, and as one branch of GTCN-G, where
each layer's output is extended with ``W'_k e_v`` computed from the node's
original features.
"""

from __future__ import annotations

import numpy as np

from .. import diffcore as dc
from ..diffcore import Tensor
from ..sampler import SampledBlock, khop_sample
from .base import GraphModel
from .layers import attention_heads, glorot, zeros


def attention_params(rng, cfg, prefix: str, residual: bool) -> dict:
    p = {}
    width = cfg.in_dim
    for k in range(1, cfg.layers + 1):
        for m in range(cfg.heads):
            p[f"{prefix}.L{k}.W{m}"] = glorot(rng, (width, cfg.head_dim), f"{prefix}.L{k}.W{m}")
            p[f"{prefix}.L{k}.a{m}"] = glorot(rng, (2 * cfg.head_dim, 1), f"{prefix}.L{k}.a{m}")
        width = cfg.heads * cfg.head_dim
        if residual:
            p[f"{prefix}.L{k}.Wres"] = glorot(rng, (cfg.in_dim, cfg.hidden), f"{prefix}.L{k}.Wres")
            width += cfg.hidden
    return p


def attention_width(cfg, residual: bool) -> int:
    return cfg.heads * cfg.head_dim + (cfg.hidden if residual else 0)


def attention_stack(params: dict, cfg, prefix: str, block: SampledBlock, features: np.ndarray,
                    residual: bool, *, train=False, rng=None, mask=False, alphas=None) -> Tensor:
    """States of ``block.nodes[K]`` after K attention layers, in sorted node order."""
    nodes = block.nodes
    h: Tensor = Tensor(features[nodes[0]])
    for k in range(1, block.K + 1):
        draw = block.samples[k]
        prev = nodes[k - 1]
        owner = np.repeat(np.arange(draw.targets.shape[0]), np.diff(draw.indptr))
        heads = [(params[f"{prefix}.L{k}.W{m}"], params[f"{prefix}.L{k}.a{m}"])
                 for m in range(cfg.heads)]
        agg = attention_heads(h, np.searchsorted(prev, draw.targets), owner,
                              np.searchsorted(prev, draw.nbr_nodes), heads,
                              rate=cfg.dropout, rng=rng, train=train, mask=mask, alphas=alphas)
        if residual:
            own = Tensor(features[draw.targets])   # original features at every layer
            agg = dc.concat([agg, own @ params[f"{prefix}.L{k}.Wres"]], axis=1)
        h = agg
    return h


class GAT(GraphModel):
    kind = "gat"

    def init_params(self, rng):
        c = self.config
        p = attention_params(rng, c, "att", residual=False)
        p["head.W"] = glorot(rng, (attention_width(c, False), c.n_classes), "head.W")
        p["head.b"] = zeros((c.n_classes,), "head.b")
        return p

    def forward(self, batch, ctx, *, train=False, rng=None, epoch=0, batch_index=0,
                mask_neighbors=False, sampling=None, alphas=None):
        batch = np.asarray(batch, dtype=np.int64)
        cfg = sampling or self.config.sampling()
        block = khop_sample(batch, ctx.line_adj, cfg, mode="nodes", epoch=epoch,
                            batch_index=batch_index)
        h = attention_stack(self.params, self.config, "att", block, ctx.features, False,
                            train=train, rng=rng, mask=mask_neighbors, alphas=alphas)
        h = dc.take_rows(h, np.searchsorted(block.nodes[block.K], batch))
        return h @ self.params["head.W"] + self.params["head.b"]
