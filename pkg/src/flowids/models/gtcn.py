"""GTCN-G: four branches over the line graph, fused for classification.

* temporal: two stacked gated causal convolutions (dilation 1 then 2) over
  each flow's recent same-source history, read at the last step;
* spatial: diffusion convolution with forward/backward transition matrices
  and a learned adaptive adjacency;
* attention: multi-head attention layers, each extended with ``W'_k e_v``;
* residual: ``W' e_v`` alone.

Branch outputs are concatenated, passed through linear + ReLU, then a
linear classifier.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import diffcore as dc
from ..diffcore import Tensor
from ..errors import ConfigError, DimensionError
from ..sampler import khop_sample
from .attention import attention_params, attention_stack, attention_width
from .base import GraphModel
from .layers import adaptive_adjacency, diffusion_gconv, gated_tcn, glorot, zeros


@dataclass
class BranchOutputs:
    temporal: Tensor
    spatial: Tensor
    attention: Tensor
    residual: Tensor

    def as_list(self) -> list[Tensor]:
        return [self.temporal, self.spatial, self.attention, self.residual]


def fuse_branches(b: BranchOutputs, W: Tensor, bias: Tensor) -> Tensor:
    parts = b.as_list()
    rows = {p.shape[0] for p in parts}
    if len(rows) != 1:
        raise DimensionError(f"fuse_branches: branch row counts differ: {[p.shape for p in parts]}")
    x = dc.concat(parts, axis=1)
    if x.shape[1] != W.shape[0]:
        raise DimensionError(f"fuse_branches: fused width {x.shape[1]} vs weight {W.shape}")
    return dc.relu(x @ W + bias)


class GTCNG(GraphModel):
    kind = "gtcn_g"

    def kernel_width(self) -> int:
        return min(self.config.tcn_kernel, self.config.seq_len)

    def init_params(self, rng):
        c = self.config
        f, d = c.in_dim, c.hidden
        w = self.kernel_width()
        p = {}
        for i, d_in in ((1, f), (2, d)):
            p[f"tcn{i}.theta1"] = glorot(rng, (w, d_in, d), f"tcn{i}.theta1")
            p[f"tcn{i}.b"] = zeros((d,), f"tcn{i}.b")
            p[f"tcn{i}.theta2"] = glorot(rng, (w, d_in, d), f"tcn{i}.theta2")
            p[f"tcn{i}.c"] = zeros((d,), f"tcn{i}.c")
        n = max(c.n_nodes, 1)
        p["adp.E1"] = Tensor(rng.normal(scale=0.1, size=(n, c.embed_rank)), True, "adp.E1")
        p["adp.E2"] = Tensor(rng.normal(scale=0.1, size=(n, c.embed_rank)), True, "adp.E2")
        for k in range(c.k_diff + 1):
            for j in (1, 2, 3):
                p[f"diff.W{k}{j}"] = glorot(rng, (f, d), f"diff.W{k}{j}")
        p.update(attention_params(rng, c, "att", residual=True))
        p["res.W"] = glorot(rng, (f, d), "res.W")
        fused = 3 * d + attention_width(c, True)
        p["fuse.W"] = glorot(rng, (fused, d), "fuse.W")
        p["fuse.b"] = zeros((d,), "fuse.b")
        p["head.W"] = glorot(rng, (d, c.n_classes), "head.W")
        p["head.b"] = zeros((c.n_classes,), "head.b")
        return p

    # -- branches ------------------------------------------------------------

    def temporal(self, seq: np.ndarray) -> Tensor:
        p = self.params
        h = gated_tcn(seq, p["tcn1.theta1"], p["tcn1.b"], p["tcn1.theta2"], p["tcn1.c"], 1)
        h = gated_tcn(h, p["tcn2.theta1"], p["tcn2.b"], p["tcn2.theta2"], p["tcn2.c"], 2)
        s = h.shape[1]
        return dc.reshape(h[:, s - 1, :], (h.shape[0], h.shape[2]))

    def spatial(self, ctx, region: np.ndarray, batch: np.ndarray, mask: bool) -> Tensor:
        """Diffusion over ``region`` (sorted sampled nodes), read at ``batch`` rows."""
        c, p = self.config, self.params
        weights = [(p[f"diff.W{k}1"], p[f"diff.W{k}2"], p[f"diff.W{k}3"])
                   for k in range(c.k_diff + 1)]
        x_b = Tensor(ctx.features[batch])
        if mask:
            # only the zeroth power (the node itself) survives
            w1, w2, w3 = weights[0]
            return x_b @ w1 + x_b @ w2 + x_b @ w3
        if batch.max() >= p["adp.E1"].shape[0]:
            raise ConfigError(
                f"adaptive adjacency has {p['adp.E1'].shape[0]} rows but the graph has node "
                f"{int(batch.max())}; rebuild the model for this graph"
            )
        pf = ctx.p_forward[region][:, region]
        pb = ctx.p_backward[region][:, region]
        z = diffusion_gconv(Tensor(ctx.features[region]), pf, pb, None, weights)
        z = dc.take_rows(z, np.searchsorted(region, batch))
        # adaptive term over the batch's own nodes
        a = adaptive_adjacency(dc.take_rows(p["adp.E1"], batch), dc.take_rows(p["adp.E2"], batch))
        xa = x_b
        for k, (_, _, w3) in enumerate(weights):
            if k:
                xa = a @ xa
            z = z + xa @ w3
        return z

    def branches(self, batch, ctx, *, train=False, rng=None, epoch=0, batch_index=0,
                 mask_neighbors=False, sampling=None, alphas=None) -> BranchOutputs:
        c, p = self.config, self.params
        batch = np.asarray(batch, dtype=np.int64)
        cfg = sampling or c.sampling()
        block = khop_sample(batch, ctx.line_adj, cfg, mode="nodes", epoch=epoch,
                            batch_index=batch_index)
        seq = ctx.sequences.gather(ctx.features, batch, c.seq_len)
        if mask_neighbors:
            seq[:, :-1, :] = 0.0
        temporal = self.temporal(seq)
        spatial = self.spatial(ctx, block.nodes[0], batch, mask_neighbors)
        att = attention_stack(p, c, "att", block, ctx.features, True, train=train, rng=rng,
                              mask=mask_neighbors, alphas=alphas)
        att = dc.take_rows(att, np.searchsorted(block.nodes[block.K], batch))
        residual = Tensor(ctx.features[batch]) @ p["res.W"]
        return BranchOutputs(temporal, spatial, att, residual)

    def forward(self, batch, ctx, **kw):
        b = self.branches(batch, ctx, **kw)
        fused = fuse_branches(b, self.params["fuse.W"], self.params["fuse.b"])
        return fused @ self.params["head.W"] + self.params["head.b"]
