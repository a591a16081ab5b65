"""Endpoint bipartite graphs, virtual-node padding and line-graph conversion.

Node ids in a :class:`BipartiteGraph` are global: sources occupy
``0 .. n_src-1`` and destinations ``n_src .. n_src+n_dst-1``. Edge ``i`` is
flow ``edge_flow[i]``. In the line graph, node ``i`` is bipartite edge ``i``.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import scipy.sparse as sp

from .errors import ResourceError

INT64_MAX = np.iinfo(np.int64).max


@dataclass(frozen=True)
class Adjacency:
    """CSR neighbour lists; entry ``j`` of node ``v`` reaches ``indices[j]`` via edge ``entry_edge[j]``."""

    indptr: np.ndarray
    indices: np.ndarray
    entry_edge: np.ndarray
    edge_endpoints: np.ndarray  # (m, 2)

    @property
    def num_nodes(self) -> int:
        return self.indptr.shape[0] - 1

    @property
    def num_edges(self) -> int:
        return self.edge_endpoints.shape[0]

    def degree(self, v: Optional[int] = None):
        deg = np.diff(self.indptr)
        return deg if v is None else int(deg[v])

    def neighbors(self, v: int) -> np.ndarray:
        return self.indices[self.indptr[v]:self.indptr[v + 1]]


def _csr_from_pairs(n: int, heads: np.ndarray, tails: np.ndarray, eids: np.ndarray,
                    endpoints: np.ndarray) -> Adjacency:
    order = np.lexsort((eids, tails, heads))
    heads, tails, eids = heads[order], tails[order], eids[order]
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.add.at(indptr, heads + 1, 1)
    return Adjacency(np.cumsum(indptr), tails.astype(np.int64), eids.astype(np.int64), endpoints)


@dataclass(frozen=True)
class BipartiteGraph:
    src_keys: tuple           # endpoint per source node, None for virtual nodes
    dst_keys: tuple
    edge_src: np.ndarray      # source node index per edge (0-based within S)
    edge_dst: np.ndarray      # destination index within D
    edge_flow: np.ndarray     # row of the encoded feature matrix
    orig_src: np.ndarray      # source index before any re-homing
    orig_dst: np.ndarray

    @property
    def n_src(self) -> int:
        return len(self.src_keys)

    @property
    def n_dst(self) -> int:
        return len(self.dst_keys)

    @property
    def num_nodes(self) -> int:
        return self.n_src + self.n_dst

    @property
    def num_edges(self) -> int:
        return self.edge_src.shape[0]

    @property
    def src_virtual(self) -> np.ndarray:
        return np.array([k is None for k in self.src_keys], dtype=bool)

    @property
    def dst_virtual(self) -> np.ndarray:
        return np.array([k is None for k in self.dst_keys], dtype=bool)

    def edge_endpoints(self) -> np.ndarray:
        """(E, 2) global node ids of every edge."""
        return np.column_stack([self.edge_src, self.edge_dst + self.n_src]).astype(np.int64)

    def degrees(self) -> np.ndarray:
        """Degrees over S then D, in global node order."""
        return np.concatenate([
            np.bincount(self.edge_src, minlength=self.n_src),
            np.bincount(self.edge_dst, minlength=self.n_dst),
        ]).astype(np.int64)

    def adjacency(self) -> Adjacency:
        ends = self.edge_endpoints()
        eids = np.arange(self.num_edges, dtype=np.int64)
        heads = np.concatenate([ends[:, 0], ends[:, 1]])
        tails = np.concatenate([ends[:, 1], ends[:, 0]])
        return _csr_from_pairs(self.num_nodes, heads, tails, np.concatenate([eids, eids]), ends)


def build_bipartite(flows=None, *, src: Sequence = None, dst: Sequence = None) -> BipartiteGraph:
    """One node per distinct (ip, port) on each side, one edge per flow in input order.

    ``flows`` may be anything with ``.src`` and ``.dst`` endpoint lists
    (e.g. :class:`~flowids.dataio.EncodedFlows`).
    """
    if flows is not None:
        src, dst = flows.src, flows.dst
    if src is None or dst is None or len(src) != len(dst):
        raise ValueError("build_bipartite needs equally long source and destination lists")
    s_index: dict = {}
    d_index: dict = {}
    es = np.array([s_index.setdefault(tuple(k), len(s_index)) for k in src], dtype=np.int64)
    ed = np.array([d_index.setdefault(tuple(k), len(d_index)) for k in dst], dtype=np.int64)
    return BipartiteGraph(
        src_keys=tuple(s_index), dst_keys=tuple(d_index),
        edge_src=es, edge_dst=ed, edge_flow=np.arange(len(src), dtype=np.int64),
        orig_src=es.copy(), orig_dst=ed.copy(),
    )


def _rehome(assign: np.ndarray, n_real: int, n_virtual: int, rng: np.random.Generator) -> np.ndarray:
    """Give each new virtual node a random half of the edges of the currently
    heaviest node (ties broken at random). Splitting a degree-d node into
    degrees a and d-a never raises max degree nor the sum of d(d-1)/2."""
    assign = assign.copy()
    deg = np.bincount(assign, minlength=n_real + n_virtual).astype(np.int64)
    for v in range(n_real, n_real + n_virtual):
        top = deg.max()
        if top < 2:
            break
        candidates = np.flatnonzero(deg == top)
        donor = int(candidates[rng.integers(len(candidates))])
        owned = np.flatnonzero(assign == donor)
        moved = rng.choice(owned, size=top // 2, replace=False)
        assign[moved] = v
        deg[donor] -= moved.size
        deg[v] += moved.size
    return assign


def pad_virtual(g: BipartiteGraph, rng: np.random.Generator) -> BipartiteGraph:
    """Equalise |S| and |D| with virtual nodes on the smaller side and re-home
    edges of that side onto them. Edge count and flow identities are unchanged;
    ``orig_src``/``orig_dst`` keep the pre-padding endpoints."""
    if g.n_src == g.n_dst:
        return g
    if g.n_src < g.n_dst:
        extra = g.n_dst - g.n_src
        new_src = _rehome(g.edge_src, g.n_src, extra, rng)
        return replace(g, src_keys=g.src_keys + (None,) * extra, edge_src=new_src)
    extra = g.n_src - g.n_dst
    new_dst = _rehome(g.edge_dst, g.n_dst, extra, rng)
    return replace(g, dst_keys=g.dst_keys + (None,) * extra, edge_dst=new_dst)


def line_graph_edge_count(g: BipartiteGraph) -> int:
    """Sum over S and D of d(d-1)/2.

    Exact for graphs without parallel flows; with parallel flows it counts a
    pair sharing both endpoints twice, so it is an upper bound.
    """
    total = 0
    for d in g.degrees().tolist():
        total += d * (d - 1) // 2
        if total > INT64_MAX:
            raise ResourceError("line-graph edge count overflows a 64-bit integer")
    return int(total)


@dataclass(frozen=True)
class LineGraph:
    adjacency: Adjacency
    flow_index: np.ndarray     # flow row per line-graph node
    features: np.ndarray       # (n, F), rows taken verbatim from the flow matrix
    timestamps: Optional[np.ndarray] = None

    @property
    def num_nodes(self) -> int:
        return self.adjacency.num_nodes

    @property
    def num_edges(self) -> int:
        return self.adjacency.num_edges

    def neighbors(self, v: int) -> np.ndarray:
        return self.adjacency.neighbors(v)

    def adjacency_matrix(self) -> sp.csr_matrix:
        a = self.adjacency
        data = np.ones(a.indices.shape[0])
        return sp.csr_matrix((data, a.indices, a.indptr), shape=(a.num_nodes, a.num_nodes))

    def transition(self, reverse: bool = False) -> sp.csr_matrix:
        """Row-normalised adjacency (forward) or row-normalised transpose (backward).

        Isolated nodes get an all-zero row.
        """
        a = self.adjacency_matrix()
        if reverse:
            a = a.T.tocsr()
        deg = np.asarray(a.sum(axis=1)).reshape(-1)
        inv = np.divide(1.0, deg, out=np.zeros_like(deg), where=deg > 0)
        return sp.diags(inv) @ a


def to_line_graph(g: BipartiteGraph, features: Optional[np.ndarray] = None,
                  timestamps: Optional[np.ndarray] = None,
                  budget: Optional[int] = None) -> LineGraph:
    """Flows become nodes; two are adjacent iff they share a bipartite endpoint.

    ``budget`` caps the predicted edge count; exceeding it raises
    :class:`ResourceError` naming the highest-degree endpoints.
    """
    predicted = line_graph_edge_count(g)
    if budget is not None and predicted > budget:
        deg = g.degrees()
        worst = np.argsort(-deg, kind="stable")[:5]
        names = []
        for v in worst.tolist():
            key = g.src_keys[v] if v < g.n_src else g.dst_keys[v - g.n_src]
            side = "src" if v < g.n_src else "dst"
            names.append(f"{side}:{key if key is not None else 'virtual'} (degree {deg[v]})")
        raise ResourceError(
            f"line graph would have {predicted} edges, budget {budget}; heaviest endpoints: "
            + ", ".join(names)
        )
    n = g.num_edges
    ends = g.edge_endpoints()
    node_ids = np.concatenate([ends[:, 0], ends[:, 1]])
    edge_ids = np.concatenate([np.arange(n), np.arange(n)])
    order = np.lexsort((edge_ids, node_ids))
    node_sorted, edge_sorted = node_ids[order], edge_ids[order]
    bounds = np.flatnonzero(np.diff(node_sorted)) + 1
    us, vs = [], []
    for group in np.split(edge_sorted, bounds):
        k = group.shape[0]
        if k < 2:
            continue
        i, j = np.triu_indices(k, 1)
        us.append(group[i])
        vs.append(group[j])
    if us:
        u = np.concatenate(us)
        v = np.concatenate(vs)
        lo, hi = np.minimum(u, v), np.maximum(u, v)
        pairs = np.unique(np.column_stack([lo, hi]), axis=0)
    else:
        pairs = np.zeros((0, 2), dtype=np.int64)
    m = pairs.shape[0]
    eids = np.arange(m, dtype=np.int64)
    adj = _csr_from_pairs(
        n,
        np.concatenate([pairs[:, 0], pairs[:, 1]]).astype(np.int64),
        np.concatenate([pairs[:, 1], pairs[:, 0]]).astype(np.int64),
        np.concatenate([eids, eids]),
        pairs.astype(np.int64),
    )
    if features is None:
        feats = np.zeros((n, 0))
    else:
        feats = np.asarray(features)[g.edge_flow]
    ts = None if timestamps is None else np.asarray(timestamps)[g.edge_flow]
    return LineGraph(adj, g.edge_flow.copy(), feats, ts)


def export_edge_list(path, num_nodes: int, edges: np.ndarray) -> Path:
    """Plain-text edge list: ``# nodes N`` header then one ``u v`` pair per line."""
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"# nodes {num_nodes}\n")
        for u, v in np.asarray(edges).tolist():
            fh.write(f"{u} {v}\n")
    return path


def read_edge_list(path) -> tuple[int, np.ndarray]:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or not lines[0].startswith("# nodes "):
        raise ValueError(f"{path}: missing '# nodes N' header")
    n = int(lines[0].split()[2])
    edges = np.array([[int(x) for x in ln.split()] for ln in lines[1:] if ln.strip()],
                     dtype=np.int64).reshape(-1, 2)
    return n, edges
