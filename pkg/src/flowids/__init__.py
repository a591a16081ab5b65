"""Graph-based flow intrusion detection: line graphs, K-hop sampling and three
edge classifiers (mean-aggregation SAGE, multi-head attention, and a gated
temporal/graph fusion model) trained on a small numpy autodiff core."""

__version__ = "0.1.0"
