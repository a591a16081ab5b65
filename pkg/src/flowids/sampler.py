"""Minibatch K-hop neighbourhood sampling.

Works over any :class:`~flowids.flowgraph.Adjacency`. Two seed modes:

* ``edges`` (bipartite graph): the batch is a set of edge ids and the layer
  node set is the set of their endpoints.
* ``nodes`` (line graph): the batch is a set of node ids; the top layer has
  no edges and its node set is the batch itself.

Expansion runs from layer K down to 1. At layer k every node of ``V(B^k)``,
as it stood when the layer started, draws a sample of its incident entries
and those edges join ``B^{k-1}``. A node with at most ``size`` incident
entries keeps all of them; otherwise exactly ``size`` distinct entries are
kept, uniformly without replacement.

Randomness is keyed by (seed, epoch, batch, layer, node, entry), so a batch
samples the same way no matter when or where it is prepared.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import ConfigError, UsageError
from .flowgraph import Adjacency

_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)


def _mix(x: np.ndarray) -> np.ndarray:
    """splitmix64 finaliser, elementwise on uint64 (wrapping)."""
    x = np.asarray(x, dtype=np.uint64)
    x = (x ^ (x >> np.uint64(30))) * _M1
    x = (x ^ (x >> np.uint64(27))) * _M2
    return x ^ (x >> np.uint64(31))


def _key(*parts: int) -> np.uint64:
    h = np.uint64(0)
    with np.errstate(over="ignore"):
        for p in parts:
            h = _mix(np.uint64(h) + _GOLDEN + np.uint64(p & 0xFFFFFFFFFFFFFFFF))
    return np.uint64(h)


@dataclass(frozen=True)
class SampleConfig:
    """``sizes[i]`` is the sample size for hop ``i+1`` out from the batch.

    ``None`` means keep every neighbour.
    """

    K: int = 2
    sizes: tuple = (8, 8)
    seed: int = 0

    def __post_init__(self):
        sizes = tuple(self.sizes)
        object.__setattr__(self, "sizes", sizes)
        if self.K < 0:
            raise ConfigError(f"K must be >= 0, got {self.K}")
        if len(sizes) != self.K:
            raise ConfigError(f"need {self.K} sample sizes, got {len(sizes)}")
        for s in sizes:
            if s is not None and (int(s) != s or s < 1):
                raise ConfigError(f"sample sizes must be positive integers, got {s}")

    def size_at_layer(self, k: int):
        return self.sizes[self.K - k]

    @classmethod
    def take_all(cls, K: int, seed: int = 0) -> "SampleConfig":
        return cls(K=K, sizes=(None,) * K, seed=seed)

    @classmethod
    def for_depth(cls, K: int, sizes: Sequence, seed: int = 0) -> "SampleConfig":
        """Fit ``sizes`` to depth ``K``: truncate, or repeat the last entry."""
        sizes = list(sizes) or [None]
        sizes = (sizes + [sizes[-1]] * K)[:K]
        return cls(K=K, sizes=tuple(sizes), seed=seed)


@dataclass(frozen=True)
class LayerSample:
    """Neighbours drawn for every target node when expanding layer k.

    ``targets`` is ``V(B^k)`` (sorted). Target ``targets[i]`` drew entries
    ``indptr[i]:indptr[i+1]`` of ``nbr_nodes`` / ``nbr_edges``.
    """

    targets: np.ndarray
    indptr: np.ndarray
    nbr_nodes: np.ndarray
    nbr_edges: np.ndarray

    def neighbors_of(self, v: int) -> np.ndarray:
        i = int(np.searchsorted(self.targets, v))
        if i >= self.targets.shape[0] or self.targets[i] != v:
            raise KeyError(v)
        return self.nbr_nodes[self.indptr[i]:self.indptr[i + 1]]

    def mapping(self) -> dict:
        return {int(v): self.nbr_nodes[self.indptr[i]:self.indptr[i + 1]]
                for i, v in enumerate(self.targets.tolist())}


@dataclass(frozen=True)
class SampledBlock:
    """Per layer k = 0..K: edge set ``edges[k]`` (B^k) and node set ``nodes[k]`` (V(B^k)).

    ``samples[k]`` (k >= 1) holds the neighbours drawn at layer k; every one
    of them lies in ``nodes[k-1]``.
    """

    K: int
    mode: str
    batch: np.ndarray
    edges: list
    nodes: list
    samples: list = field(default_factory=list)

    def layer_sizes(self) -> list[tuple[int, int]]:
        return [(n.shape[0], e.shape[0]) for n, e in zip(self.nodes, self.edges)]


def sample_neighbors(adj: Adjacency, node: int, size: Optional[int],
                     rng: np.random.Generator) -> np.ndarray:
    """Uniform sample of ``node``'s neighbours: all of them when the degree is at most ``size``."""
    if size is not None and size < 1:
        raise ConfigError(f"sample size must be >= 1, got {size}")
    nbrs = adj.neighbors(node)
    if size is None or nbrs.shape[0] <= size:
        return nbrs.copy()
    pick = rng.choice(nbrs.shape[0], size=size, replace=False)
    return nbrs[np.sort(pick)]


def _draw(adj: Adjacency, targets: np.ndarray, size, key: np.uint64):
    starts = adj.indptr[targets]
    deg = adj.indptr[targets + 1] - starts
    total = int(deg.sum())
    owner = np.repeat(np.arange(targets.shape[0]), deg)
    offs = np.arange(total) - np.repeat(np.cumsum(deg) - deg, deg)
    entries = np.repeat(starts, deg) + offs
    if size is not None and total:
        with np.errstate(over="ignore"):
            nk = _mix(key + _mix(targets.astype(np.uint64) + _GOLDEN))
            score = _mix(nk[owner] + offs.astype(np.uint64) * _GOLDEN)
        order = np.lexsort((score, owner))
        rank = np.empty(total, dtype=np.int64)
        rank[order] = np.arange(total) - (np.cumsum(deg) - deg)[owner[order]]
        keep = rank < size
        entries = entries[keep]
        owner = owner[keep]
    # sort each target's picks by CSR position for stable output
    order = np.lexsort((entries, owner))
    entries, owner = entries[order], owner[order]
    counts = np.bincount(owner, minlength=targets.shape[0])
    indptr = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
    return LayerSample(targets, indptr, adj.indices[entries].astype(np.int64),
                       adj.entry_edge[entries].astype(np.int64))


def khop_sample(batch, adj: Adjacency, cfg: SampleConfig, *, mode: str = "edges",
                epoch: int = 0, batch_index: int = 0) -> SampledBlock:
    """Backward K-hop expansion of ``batch``; see the module docstring."""
    batch = np.unique(np.asarray(batch, dtype=np.int64))
    if batch.size == 0:
        raise UsageError("khop_sample needs a non-empty batch")
    if mode == "edges":
        if batch.min() < 0 or batch.max() >= adj.num_edges:
            raise UsageError("batch edge id out of range")
        edges_k = batch
        nodes_k = np.unique(adj.edge_endpoints[batch].reshape(-1))
    elif mode == "nodes":
        if batch.min() < 0 or batch.max() >= adj.num_nodes:
            raise UsageError("batch node id out of range")
        edges_k = np.zeros(0, dtype=np.int64)
        nodes_k = batch
    else:
        raise ConfigError(f"unknown seed mode {mode!r}")

    edges: list = [None] * (cfg.K + 1)
    nodes: list = [None] * (cfg.K + 1)
    samples: list = [None] * (cfg.K + 1)
    edges[cfg.K], nodes[cfg.K] = edges_k, nodes_k
    for k in range(cfg.K, 0, -1):
        key = _key(cfg.seed, epoch, batch_index, k)
        draw = _draw(adj, nodes_k, cfg.size_at_layer(k), key)
        samples[k] = draw
        edges_k = np.union1d(edges_k, draw.nbr_edges)
        nodes_k = np.union1d(nodes_k, draw.nbr_nodes)
        edges[k - 1], nodes[k - 1] = edges_k, nodes_k
    return SampledBlock(cfg.K, mode, batch, edges, nodes, samples)


def estimate_batch_cost(batch_size: int, cfg: SampleConfig, *, mode: str = "edges",
                        max_degree: Optional[int] = None) -> tuple[int, int]:
    """Worst-case (nodes, edges) of a sampled block.

    Nodes grow by at most a factor ``1 + size`` per layer and each node adds
    at most ``size`` edges. A take-all layer needs ``max_degree``.
    """
    n = 2 * batch_size if mode == "edges" else batch_size
    e = batch_size if mode == "edges" else 0
    for k in range(cfg.K, 0, -1):
        s = cfg.size_at_layer(k)
        if s is None:
            if max_degree is None:
                raise UsageError("take-all sampling needs max_degree to bound the cost")
            s = max_degree
        e += n * s
        n *= 1 + s
    return n, e
