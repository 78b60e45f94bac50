"""
Model checkpoints: the parameter state dict as a tensor snapshot, with the network
config and target statistics in the snapshot metadata.
"""
import hashlib
from pathlib import Path
from typing import Any, Dict, Optional, Tuple, Union

import numpy as np
import structlog
from pydantic import ValidationError

from tgt.core.config import TGTConfig
from tgt.core.exceptions import CheckpointError
from tgt.models.tgt import TGT
from tgt.tensor import load_tensors, save_tensors

logger = structlog.get_logger(__name__)

FORMAT_VERSION = 1


def save_checkpoint(
    model: TGT, path: Union[str, Path], extra: Optional[Dict[str, Any]] = None
) -> Path:
    metadata = {
        "format_version": FORMAT_VERSION,
        "config": model.config.model_dump(mode="json"),
        "target_mean": model.target_mean,
        "target_std": model.target_std,
        "has_target_stats": model.has_target_stats,
        **(extra or {}),
    }
    path = save_tensors(path, model.state_dict(), metadata)
    logger.info("checkpoint_saved", path=str(path), parameters=model.num_parameters())
    return path


def load_checkpoint(path: Union[str, Path]) -> Tuple[TGT, Dict[str, Any]]:
    arrays, metadata = load_tensors(path)
    if "config" not in metadata:
        raise CheckpointError(f"{path} carries no model config", path=str(path))
    try:
        config = TGTConfig.model_validate(metadata["config"])
    except ValidationError as e:
        raise CheckpointError(f"{path}: invalid model config: {e}", path=str(path)) from e

    model = TGT(config)
    model.load_state_dict(arrays)
    if metadata.get("has_target_stats"):
        model.set_target_stats(metadata["target_mean"], metadata["target_std"])
    logger.info("checkpoint_loaded", path=str(path), variant=config.variant)
    return model, metadata


def parameter_digest(model: TGT) -> str:
    """SHA-256 over parameter names, dtypes, shapes and bytes"""
    digest = hashlib.sha256()
    for name, parameter in model.named_parameters():
        data = np.ascontiguousarray(parameter.data)
        digest.update(name.encode())
        digest.update(str(data.dtype).encode())
        digest.update(str(data.shape).encode())
        digest.update(data.tobytes())
    return digest.hexdigest()
