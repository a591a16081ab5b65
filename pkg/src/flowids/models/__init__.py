"""E-GraphSAGE-M, GAT and GTCN-G over a shared :class:`GraphContext`."""

from .attention import GAT
from .base import KINDS, PROFILES, GraphModel, ModelConfig
from .checkpoint import load_checkpoint, read_checkpoint, save_checkpoint
from .context import GraphContext, SequenceIndex
from .gtcn import GTCNG, BranchOutputs, fuse_branches
from .layers import (
    adaptive_adjacency,
    attention_coeffs,
    diffusion_gconv,
    gated_tcn,
    mean_aggregate,
    sage_edge_embed,
    sage_update,
)
from .sage import EGraphSAGE

MODEL_CLASSES = {"egraphsage_m": EGraphSAGE, "gat": GAT, "gtcn_g": GTCNG}


def build_model(config: ModelConfig, seed: int = 0) -> GraphModel:
    return MODEL_CLASSES[config.kind](config, seed=seed)


__all__ = [
    "KINDS", "PROFILES", "MODEL_CLASSES", "ModelConfig", "GraphModel", "GraphContext",
    "SequenceIndex", "EGraphSAGE", "GAT", "GTCNG", "BranchOutputs", "build_model",
    "fuse_branches", "adaptive_adjacency", "attention_coeffs", "diffusion_gconv", "gated_tcn",
    "mean_aggregate", "sage_edge_embed", "sage_update",
    "save_checkpoint", "load_checkpoint", "read_checkpoint",
]
