from .bundle import Bundle, read_bundle, read_matrix, write_bundle, write_matrix
from .encoder import EncodedFlows, FeatureEncoder, class_weights, encode, fit_encoder
from .loader import ATTACK, NORMAL, FlowRecord, load_flows
from .schema import DatasetSchema, load_schema, parse_schema
from .split import Split, SplitSpec, apportion, split

__all__ = [
    "Bundle", "read_bundle", "write_bundle", "read_matrix", "write_matrix",
    "EncodedFlows", "FeatureEncoder", "class_weights", "encode", "fit_encoder",
    "FlowRecord", "load_flows", "NORMAL", "ATTACK",
    "DatasetSchema", "load_schema", "parse_schema",
    "Split", "SplitSpec", "apportion", "split",
]
