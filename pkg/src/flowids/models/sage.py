"""E-GraphSAGE-M: minibatch edge classification on the endpoint graph.

Node states start as all-ones vectors of the edge-feature width. Each of
the K layers averages ``h_u || e_uv`` over a node's sampled incident flows
and applies ``relu([h_v || mean] @ W_k)``. A flow is classified from
``h_u || h_v`` plus, with ``residual`` on, its own features ``e_uv``.
"""

from __future__ import annotations

import numpy as np

from .. import diffcore as dc
from ..diffcore import Tensor
from ..sampler import khop_sample
from .base import GraphModel
from .layers import glorot, mean_aggregate, sage_edge_embed, sage_update, zeros


class EGraphSAGE(GraphModel):
    kind = "egraphsage_m"

    def init_params(self, rng):
        c = self.config
        f, d = c.in_dim, c.hidden
        p = {}
        width = f
        for k in range(1, c.layers + 1):
            p[f"sage.W{k}"] = glorot(rng, (2 * width + f, d), f"sage.W{k}")
            width = d
        z = 2 * d + (f if c.residual else 0)
        p["head.W"] = glorot(rng, (z, c.n_classes), "head.W")
        p["head.b"] = zeros((c.n_classes,), "head.b")
        return p

    def forward(self, batch, ctx, *, train=False, rng=None, epoch=0, batch_index=0,
                mask_neighbors=False, sampling=None):
        c = self.config
        batch = np.asarray(batch, dtype=np.int64)
        cfg = sampling or c.sampling()
        adj = ctx.bip_adj
        block = khop_sample(batch, adj, cfg, mode="edges", epoch=epoch, batch_index=batch_index)
        feats = ctx.features
        K = cfg.K

        nodes = block.nodes
        h: Tensor = Tensor(np.ones((nodes[0].shape[0], c.in_dim)))
        for k in range(1, K + 1):
            draw = block.samples[k]
            prev = nodes[k - 1]
            owner = np.repeat(np.arange(draw.targets.shape[0]), np.diff(draw.indptr))
            msgs = dc.concat([dc.take_rows(h, np.searchsorted(prev, draw.nbr_nodes)),
                              Tensor(feats[draw.nbr_edges])], axis=1)
            h_nbr = mean_aggregate(msgs, owner, draw.targets.shape[0])
            if mask_neighbors:
                h_nbr = h_nbr * 0.0
            h_self = dc.take_rows(h, np.searchsorted(prev, draw.targets))
            h = sage_update(h_self, h_nbr, self.params[f"sage.W{k}"])

        ends = adj.edge_endpoints[batch]
        top = nodes[K]
        z = sage_edge_embed(dc.take_rows(h, np.searchsorted(top, ends[:, 0])),
                            dc.take_rows(h, np.searchsorted(top, ends[:, 1])),
                            Tensor(feats[batch]), c.residual)
        return z @ self.params["head.W"] + self.params["head.b"]
