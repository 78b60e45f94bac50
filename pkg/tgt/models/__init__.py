from tgt.models.checkpoint import load_checkpoint, parameter_digest, save_checkpoint
from tgt.models.tgt import TGT, ModelOutputs, count_params

__all__ = [
    "TGT",
    "ModelOutputs",
    "count_params",
    "load_checkpoint",
    "parameter_digest",
    "save_checkpoint",
]
