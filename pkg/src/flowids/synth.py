"""Synthetic flow CSVs in a dataset's column layout.

Used for fixtures and smoke runs where the real captures are unavailable.
Class-conditional feature shifts make the classes learnable; ``separation``
controls how far apart they sit.
"""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .dataio.schema import DatasetSchema
from .dataio.split import apportion

# Published class proportions (percent) of each capture, in schema class order.
UNSW_PROPORTIONS = {
    "Normal": 96.83, "Exploits": 0.773, "Reconnaissance": 0.251, "DoS": 0.167,
    "Generic": 1.07, "Shellcode": 0.032, "Fuzzers": 0.722, "Worms": 0.003,
    "Backdoor": 0.076, "Analysis": 0.075,
}
TON_PROPORTIONS = {
    "Normal": 65.07, "Scanning": 4.34, "DoS": 4.34, "Injection": 4.34, "DDoS": 4.34,
    "Password": 4.34, "XSS": 4.34, "Ransomware": 4.34, "Backdoor": 4.34, "MITM": 0.22,
}


def class_counts(n: int, proportions: dict[str, float], classes: Sequence[str],
                 min_per_class: int = 0) -> dict[str, int]:
    """Integer counts summing to ``n`` (largest remainder), each at least ``min_per_class``."""
    counts = dict(zip(classes, apportion(n, [proportions.get(c, 0.0) for c in classes])))
    if min_per_class:
        for c in classes:
            deficit = min_per_class - counts[c]
            if deficit > 0:
                counts[c] += deficit
                biggest = max(counts, key=counts.get)
                counts[biggest] -= deficit
    return counts


def generate_rows(schema: DatasetSchema, counts: dict[str, int], seed: int = 0,
                  separation: float = 3.0, n_hosts: int = 24) -> list[dict]:
    rng = np.random.default_rng(seed)
    classes = list(schema.classes)
    labels = [c for c in classes for _ in range(counts.get(c, 0))]
    order = rng.permutation(len(labels))
    labels = [labels[i] for i in order]
    numeric = schema.numeric_features
    # per-class mean offsets, fixed per (class, column)
    centers = rng.normal(size=(len(classes), len(numeric))) * separation
    cat_values = ["tcp", "udp", "icmp", "arp"]
    hosts = [f"10.0.{i // 250}.{i % 250 + 1}" for i in range(n_hosts)]
    servers = [f"192.168.1.{i + 1}" for i in range(max(2, n_hosts // 3))]
    rows = []
    t = 1_421_927_414.0
    for lbl in labels:
        k = classes.index(lbl)
        t += float(rng.exponential(0.5))
        vals = centers[k] + rng.normal(size=len(numeric))
        row: dict = {}
        for j, col in enumerate(numeric):
            row[col] = f"{abs(vals[j]) * 10:.6f}"
        for col in schema.categorical:
            pick = (k + int(rng.random() < 0.1)) % len(cat_values)
            row[col] = cat_values[pick]
        # attackers reuse few sources, benign traffic is spread out
        src_pool = hosts[: max(2, n_hosts // 4)] if k else hosts
        row[schema.src_ip] = src_pool[int(rng.integers(len(src_pool)))]
        row[schema.src_port] = str(int(rng.integers(1024, 65535)))
        row[schema.dst_ip] = servers[int(rng.integers(len(servers)))]
        row[schema.dst_port] = str([80, 443, 53, 22, 21][k % 5])
        row[schema.timestamp] = f"{t:.3f}"
        normal = lbl == schema.normal_class
        row[schema.label_binary] = "0" if normal else "1"
        row[schema.label_multiclass] = "" if normal and schema.name == "UNSW-NB15" else lbl
        rows.append(row)
    return rows


def write_csv(path, schema: DatasetSchema, rows: list[dict], header: bool = True) -> Path:
    cols = list(schema.layout) if schema.layout else schema.required_columns
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if header:
            w.writerow(cols)
        for r in rows:
            w.writerow([r.get(c, "0") for c in cols])
    return path


def write_synthetic_csv(path, schema: DatasetSchema, n: int,
                        proportions: Optional[dict[str, float]] = None, seed: int = 0,
                        separation: float = 3.0, min_per_class: int = 0,
                        header: bool = True) -> Path:
    if proportions is None:
        proportions = UNSW_PROPORTIONS if schema.name == "UNSW-NB15" else TON_PROPORTIONS
    counts = class_counts(n, proportions, schema.classes, min_per_class)
    return write_csv(path, schema, generate_rows(schema, counts, seed, separation), header)


def separable_flows(n: int, n_classes: int, n_features: int = 8, seed: int = 0,
                    separation: float = 3.0, hosts_per_class: int = 10,
                    servers_per_class: int = 4) -> dict:
    """Encoded-style arrays for a flow table whose classes separate both in
    feature space and in graph structure: each class talks between its own
    hosts and servers, so flows only share endpoints within a class.

    Returns a dict with ``features``, ``labels``, ``src``, ``dst`` and
    ``timestamps``; labels are balanced.
    """
    rng = np.random.default_rng(seed)
    labels = np.resize(np.arange(n_classes), n)
    rng.shuffle(labels)
    centers = rng.normal(size=(n_classes, n_features)) * separation
    features = centers[labels] + rng.normal(size=(n, n_features))
    h = rng.integers(0, hosts_per_class, n)
    s = rng.integers(0, servers_per_class, n)
    src = [(f"10.{c}.0.{i}", 40000 + i) for c, i in zip(labels.tolist(), h.tolist())]
    dst = [(f"192.168.{c}.{i}", 80) for c, i in zip(labels.tolist(), s.tolist())]
    timestamps = np.sort(rng.uniform(0.0, 1000.0, n))
    return {"features": features, "labels": labels.astype(np.int64), "src": src, "dst": dst,
            "timestamps": timestamps}
