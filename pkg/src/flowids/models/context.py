"""Graph structures shared by every model for one flow table.

The graph is built once over all flows (train, val and test together).
Only features and endpoints go in; labels never do.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.sparse as sp

from ..flowgraph import Adjacency, BipartiteGraph, LineGraph, build_bipartite, pad_virtual, to_line_graph


@dataclass(frozen=True)
class SequenceIndex:
    """Per-flow history: earlier flows sharing the same source endpoint.

    ``order`` lists flows grouped by source then by time (ties by flow id);
    ``rank[i]`` is the position of ``order[i]`` inside its group.
    """

    order: np.ndarray
    rank: np.ndarray
    where: np.ndarray   # where[f] = position of flow f in ``order``

    @classmethod
    def build(cls, group: np.ndarray, timestamps: np.ndarray) -> "SequenceIndex":
        n = group.shape[0]
        ts = np.nan_to_num(np.asarray(timestamps, dtype=np.float64), nan=-np.inf)
        order = np.lexsort((np.arange(n), ts, group))
        g = group[order]
        starts = np.flatnonzero(np.r_[True, g[1:] != g[:-1]]) if n else np.zeros(0, np.int64)
        sizes = np.diff(np.r_[starts, n])
        rank = np.arange(n) - np.repeat(starts, sizes)
        where = np.empty(n, dtype=np.int64)
        where[order] = np.arange(n)
        return cls(order, rank, where)

    def gather(self, features: np.ndarray, flows: np.ndarray, length: int) -> np.ndarray:
        """(B, length, F): the ``length`` most recent flows up to and including
        each flow, oldest first, zero-padded on the left."""
        flows = np.asarray(flows, dtype=np.int64)
        out = np.zeros((flows.shape[0], length, features.shape[1]))
        pos = self.where[flows]
        for lag in range(length):
            ok = self.rank[pos] >= lag
            out[ok, length - 1 - lag] = features[self.order[pos[ok] - lag]]
        return out


@dataclass
class GraphContext:
    features: np.ndarray          # (n_flows, F), encoded
    bipartite: BipartiteGraph
    bip_adj: Adjacency
    line: LineGraph
    sequences: SequenceIndex
    _pf: Optional[sp.csr_matrix] = None
    _pb: Optional[sp.csr_matrix] = None

    @property
    def num_flows(self) -> int:
        return self.features.shape[0]

    @property
    def line_adj(self) -> Adjacency:
        return self.line.adjacency

    @property
    def p_forward(self) -> sp.csr_matrix:
        if self._pf is None:
            self._pf = self.line.transition().tocsr()
        return self._pf

    @property
    def p_backward(self) -> sp.csr_matrix:
        if self._pb is None:
            self._pb = self.line.transition(reverse=True).tocsr()
        return self._pb

    @classmethod
    def build(cls, features, src, dst, timestamps=None, *, seed: int = 0, pad: bool = True,
              budget: Optional[int] = None) -> "GraphContext":
        features = np.ascontiguousarray(features, dtype=np.float64)
        g = build_bipartite(src=src, dst=dst)
        if pad:
            g = pad_virtual(g, np.random.default_rng(seed))
        if timestamps is None:
            timestamps = np.arange(g.num_edges, dtype=np.float64)
        line = to_line_graph(g, features, timestamps, budget=budget)
        seq = SequenceIndex.build(g.orig_src, np.asarray(timestamps, dtype=np.float64))
        return cls(features, g, g.adjacency(), line, seq)

    @classmethod
    def from_flows(cls, flows, **kw) -> "GraphContext":
        return cls.build(flows.features, flows.src, flows.dst, flows.timestamps, **kw)
