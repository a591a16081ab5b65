from __future__ import annotations

from dataclasses import asdict, dataclass, fields
from typing import Optional

import numpy as np

from ..diffcore import Tensor
from ..errors import ConfigError
from ..sampler import SampleConfig

KINDS = ("egraphsage_m", "gat", "gtcn_g")

# widths per profile; "small" is the test/desk profile
PROFILES = {
    "small": {"hidden": 16, "head_dim": 4},
    "full": {"hidden": 128, "head_dim": 16},
}
DEFAULT_LAYERS = {"egraphsage_m": 2, "gat": 3, "gtcn_g": 3}


@dataclass
class ModelConfig:
    kind: str
    in_dim: int
    n_classes: int
    layers: int = 0                # 0: per-kind default
    heads: int = 6
    hidden: int = 16
    head_dim: int = 4
    k_diff: int = 2
    seq_len: int = 8
    tcn_kernel: int = 2
    embed_rank: int = 8
    dropout: float = 0.5
    sample_sizes: tuple = (8,)
    residual: bool = True          # E-GraphSAGE-M: append e_uv to the edge embedding
    n_nodes: int = 0               # GTCN-G: rows of the adaptive-adjacency embeddings
    sample_seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown model kind {self.kind!r}; choose from {', '.join(KINDS)}")
        if self.layers == 0:
            self.layers = DEFAULT_LAYERS[self.kind]
        self.sample_sizes = tuple(self.sample_sizes)
        if not 1 <= self.layers <= 6:
            raise ConfigError(f"layers must be in 1..6, got {self.layers}")
        for name in ("in_dim", "n_classes", "heads", "hidden", "head_dim", "seq_len",
                     "tcn_kernel", "embed_rank"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.k_diff < 0:
            raise ConfigError(f"k_diff must be >= 0, got {self.k_diff}")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError(f"dropout must lie in [0, 1), got {self.dropout}")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["sample_sizes"] = list(self.sample_sizes)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown model settings: {', '.join(sorted(unknown))}")
        return cls(**d)

    @classmethod
    def for_profile(cls, kind: str, in_dim: int, n_classes: int, profile: str = "small",
                    **overrides) -> "ModelConfig":
        if profile not in PROFILES:
            raise ConfigError(f"unknown profile {profile!r}")
        return cls(kind=kind, in_dim=in_dim, n_classes=n_classes,
                   **{**PROFILES[profile], **overrides})

    def sampling(self) -> SampleConfig:
        return SampleConfig.for_depth(self.layers, self.sample_sizes, seed=self.sample_seed)


class GraphModel:
    """Parameters plus a forward pass producing logits for a batch of flows."""

    kind = ""

    def __init__(self, config: ModelConfig, params: Optional[dict] = None, seed: int = 0):
        self.config = config
        self.params: dict[str, Tensor] = params if params is not None else \
            self.init_params(np.random.default_rng(seed))

    def init_params(self, rng: np.random.Generator) -> dict:
        raise NotImplementedError

    def parameters(self) -> list[Tensor]:
        return list(self.params.values())

    def param_norms(self) -> dict[str, float]:
        return {k: float(np.linalg.norm(v.data)) for k, v in self.params.items()}

    def num_parameters(self) -> int:
        return int(sum(p.data.size for p in self.params.values()))

    def forward(self, batch, ctx, *, train: bool = False, rng=None, epoch: int = 0,
                batch_index: int = 0, mask_neighbors: bool = False,
                sampling: Optional[SampleConfig] = None) -> Tensor:
        raise NotImplementedError

    def __call__(self, *a, **kw) -> Tensor:
        return self.forward(*a, **kw)
