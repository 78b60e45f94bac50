"""
Tensor snapshots.

A snapshot is a NumPy ``.npz`` archive holding one array per named tensor plus the
reserved entry ``__metadata__``: a 0-d unicode array containing a JSON document.
Arrays are stored with their own dtype, so 64-bit values round-trip bitwise.
"""
import json
from pathlib import Path
from typing import Any, Dict, Mapping, Tuple, Union

import numpy as np

from tgt.core.exceptions import CheckpointError

METADATA_KEY = "__metadata__"


def save_tensors(
    path: Union[str, Path], tensors: Mapping[str, np.ndarray], metadata: Mapping[str, Any]
) -> Path:
    path = Path(path)
    if METADATA_KEY in tensors:
        raise CheckpointError(f"tensor name {METADATA_KEY!r} is reserved")
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {name: np.asarray(value) for name, value in tensors.items()}
    payload[METADATA_KEY] = np.array(json.dumps(dict(metadata), sort_keys=True, default=str))
    with open(path, "wb") as f:
        np.savez(f, **payload)
    return path


def load_tensors(path: Union[str, Path]) -> Tuple[Dict[str, np.ndarray], Dict[str, Any]]:
    path = Path(path)
    if not path.is_file():
        raise CheckpointError(f"checkpoint not found: {path}", path=str(path))
    try:
        with np.load(path, allow_pickle=False) as archive:
            arrays = {name: archive[name] for name in archive.files}
    except (OSError, ValueError) as e:
        raise CheckpointError(f"unreadable checkpoint {path}: {e}", path=str(path)) from e
    raw = arrays.pop(METADATA_KEY, None)
    metadata = json.loads(str(raw)) if raw is not None else {}
    return arrays, metadata
