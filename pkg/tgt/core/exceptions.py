"""
Exception hierarchy shared by every subsystem.
Each error carries a machine-readable category and the process exit code used by the CLI.
"""
from typing import Any, Dict, Optional


class TGTError(Exception):
    """Base class for all errors raised by the package"""

    category: str = "internal"
    exit_code: int = 1

    def __init__(self, message: str, **context: Any):
        super().__init__(message)
        self.message = message
        self.context: Dict[str, Any] = context

    def to_record(self) -> Dict[str, Any]:
        record: Dict[str, Any] = {"error": self.category, "message": self.message}
        record.update({k: v for k, v in self.context.items() if v is not None})
        return record


class ConfigError(TGTError):
    category = "config"
    exit_code = 2


class ShapeError(TGTError):
    """Operand shapes do not fit the operation"""

    category = "shape"
    exit_code = 3

    def __init__(self, op: str, *shapes: tuple, detail: Optional[str] = None):
        rendered = ", ".join(str(tuple(s)) for s in shapes)
        message = f"{op}: incompatible operand shapes {rendered}"
        if detail:
            message = f"{message} ({detail})"
        super().__init__(message, op=op, shapes=[list(s) for s in shapes])


class AutodiffError(TGTError):
    category = "autodiff"
    exit_code = 3


class GradCheckError(TGTError):
    category = "gradcheck"
    exit_code = 3


class GraphDataError(TGTError):
    category = "data"
    exit_code = 4


class DatasetFormatError(GraphDataError):
    """Malformed dataset record"""

    def __init__(self, path: str, line_number: int, reason: str):
        super().__init__(
            f"{path}:{line_number}: malformed record: {reason}",
            path=path,
            line=line_number,
        )
        self.line_number = line_number


class OracleCapacityError(GraphDataError):
    """Instance exceeds the exact TSP oracle"""


class CheckpointError(TGTError):
    category = "checkpoint"
    exit_code = 5


class PipelineError(TGTError):
    category = "pipeline"
    exit_code = 6


class TrainingDivergedError(PipelineError):
    """Loss became NaN or infinite"""

    def __init__(self, step: int, stage: str):
        super().__init__(f"non-finite loss at step {step} during {stage}", step=step, stage=stage)
        self.step = step
