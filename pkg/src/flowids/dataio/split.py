from __future__ import annotations

from dataclasses import dataclass, field

import networkx as nx
import numpy as np

from ..errors import ConfigError

MIN_STRATIFY = 10


@dataclass(frozen=True)
class SplitSpec:
    ratios: tuple[int, int, int] = (5, 2, 3)
    seed: int = 0

    def __post_init__(self):
        if len(self.ratios) != 3 or any(int(r) < 0 for r in self.ratios) or int(self.ratios[0]) <= 0:
            raise ConfigError(f"split ratios must be three non-negative integers with a positive "
                              f"train share, got {self.ratios}")


@dataclass
class Split:
    train: np.ndarray
    val: np.ndarray
    test: np.ndarray
    stratified: bool
    warnings: list[str] = field(default_factory=list)

    def sizes(self) -> tuple[int, int, int]:
        return len(self.train), len(self.val), len(self.test)


def apportion(n: int, ratios) -> list[int]:
    """Largest-remainder apportionment of ``n`` items; ties go to the earlier part."""
    total = sum(ratios)
    quotas = [n * r / total for r in ratios]
    counts = [int(q) for q in quotas]
    order = sorted(range(len(ratios)), key=lambda i: (-(quotas[i] - counts[i]), i))
    for i in order[: n - sum(counts)]:
        counts[i] += 1
    return counts


def _round_table(counts: list[int], targets: list[int], ratios) -> np.ndarray:
    """Integer strata x splits table with given row sums and column sums.

    Each cell is the floor of its exact quota or one more, chosen by min-cost
    flow so that cells with larger fractional parts are rounded up first.
    """
    total = sum(ratios)
    exact = np.array([[c * r / total for r in ratios] for c in counts])
    table = np.floor(exact).astype(np.int64)
    row_left = np.array(counts) - table.sum(axis=1)
    col_left = np.array(targets) - table.sum(axis=0)
    if row_left.sum() == 0:
        return table
    g = nx.DiGraph()
    for c, left in enumerate(row_left):
        if left:
            g.add_edge("src", ("c", c), capacity=int(left), weight=0)
            for s in range(len(ratios)):
                frac = exact[c, s] - table[c, s]
                g.add_edge(("c", c), ("s", s), capacity=1, weight=-int(round(frac * 1e6)))
    for s, left in enumerate(col_left):
        if left:
            g.add_edge(("s", s), "sink", capacity=int(left), weight=0)
    flow = nx.max_flow_min_cost(g, "src", "sink")
    for c in range(len(counts)):
        for s in range(len(ratios)):
            table[c, s] += flow.get(("c", c), {}).get(("s", s), 0)
    if table.sum(axis=0).tolist() != list(targets):
        raise RuntimeError("stratified apportionment failed to meet split sizes")
    return table


def split(labels, spec: SplitSpec = SplitSpec()) -> Split:
    """Partition record indices into train/val/test.

    Split sizes are the largest-remainder apportionment of ``spec.ratios``.
    Classes with at least 10 records form their own stratum; rarer classes
    share one pooled stratum. Fewer than 10 records in total disables
    stratification and records a warning.
    """
    labels = np.asarray(labels)
    n = labels.shape[0]
    rng = np.random.default_rng(spec.seed)
    targets = apportion(n, spec.ratios)
    warnings: list[str] = []

    if n < MIN_STRATIFY:
        warnings.append(f"only {n} records: stratification disabled, plain shuffle used")
        perm = rng.permutation(n)
        a, b = targets[0], targets[0] + targets[1]
        return Split(np.sort(perm[:a]), np.sort(perm[a:b]), np.sort(perm[b:]), False, warnings)

    classes, counts = np.unique(labels, return_counts=True)
    strata: list[np.ndarray] = []
    pooled: list[np.ndarray] = []
    for cls, cnt in zip(classes, counts):
        members = np.flatnonzero(labels == cls)
        (strata if cnt >= MIN_STRATIFY else pooled).append(members)
    if pooled:
        warnings.append(
            f"{len(pooled)} class(es) with fewer than {MIN_STRATIFY} records pooled into one stratum"
        )
        strata.append(np.sort(np.concatenate(pooled)))

    table = _round_table([len(s) for s in strata], targets, spec.ratios)
    parts: list[list[np.ndarray]] = [[], [], []]
    for members, row in zip(strata, table):
        shuffled = members[rng.permutation(len(members))]
        a, b = row[0], row[0] + row[1]
        parts[0].append(shuffled[:a])
        parts[1].append(shuffled[a:b])
        parts[2].append(shuffled[b:])
    train, val, test = (np.sort(np.concatenate(p)) for p in parts)
    return Split(train, val, test, True, warnings)
