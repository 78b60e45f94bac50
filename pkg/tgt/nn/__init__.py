from tgt.nn.attention import AttentionOutput, EGTAttention
from tgt.nn.dropout import DropoutContext, path_drop, source_dropout_mask, triplet_dropout
from tgt.nn.encodings import (
    FourierEncoding,
    RBFEncoding,
    bin_center,
    bin_distance,
    build_distance_encoding,
)
from tgt.nn.layers import FFN, TGTLayer, pre_norm_residual
from tgt.nn.module import Embedding, LayerNorm, Linear, Module, ModuleList
from tgt.nn.triplet import (
    TriangularUpdate,
    TripletAggregation,
    TripletAttention,
    build_interaction,
)

__all__ = [
    "AttentionOutput",
    "DropoutContext",
    "EGTAttention",
    "Embedding",
    "FFN",
    "FourierEncoding",
    "LayerNorm",
    "Linear",
    "Module",
    "ModuleList",
    "RBFEncoding",
    "TGTLayer",
    "TriangularUpdate",
    "TripletAggregation",
    "TripletAttention",
    "bin_center",
    "bin_distance",
    "build_distance_encoding",
    "build_interaction",
    "path_drop",
    "pre_norm_residual",
    "source_dropout_mask",
    "triplet_dropout",
]
