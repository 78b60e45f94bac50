"""
Configuration management using Pydantic settings.
Supports a TOML run file, environment variables (TGT_ prefix) and .env files.
"""
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from functools import lru_cache
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from tgt.core.exceptions import ConfigError

Variant = Literal[
    "none", "axial", "triangular", "triplet_agg", "triplet_att", "ungated_agg", "ungated_att"
]
Stage = Literal["distance_pretrain", "task_pretrain", "task_finetune", "single_stage"]


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", validate_assignment=True)


class DropoutSpec(_Section):
    """Dropout probabilities of the three structured schemes plus activation dropout"""

    source_p: float = Field(default=0.3, ge=0.0, lt=1.0)
    triplet_p: float = Field(default=0.0, ge=0.0, lt=1.0)
    path_p: float = Field(default=0.1, ge=0.0, lt=1.0)
    activation_p: float = Field(default=0.1, ge=0.0, lt=1.0)
    # elementwise attention dropout; the ablation baseline for source dropout
    attention_p: float = Field(default=0.0, ge=0.0, lt=1.0)


class BinSpec(_Section):
    """Distance bins on [0, d_max]"""

    num_bins: int = Field(default=256, ge=2)
    d_max: float = Field(default=8.0, gt=0.0)

    @property
    def width(self) -> float:
        return self.d_max / self.num_bins


class TGTConfig(_Section):
    """Network hyperparameters"""

    num_layers: int = Field(default=4, ge=0)
    layer_multiplier: int = Field(default=1, ge=1)
    node_dim: int = Field(default=32, ge=1)
    edge_dim: int = Field(default=16, ge=1)
    num_heads: int = Field(default=4, ge=1)
    triplet_heads: int = Field(default=2, ge=0)
    variant: Variant = Field(default="triplet_agg")
    node_ffn_dim: int = Field(default=64, ge=1)
    edge_ffn_dim: int = Field(default=32, ge=1)
    triangular_sets: Optional[int] = Field(default=None, ge=1)
    task: Literal["scalar", "edge"] = Field(default="scalar")

    encoding: Literal["rbf", "fourier", "none"] = Field(default="rbf")
    rbf_kernels: int = Field(default=32, ge=1)
    fourier_kernels: int = Field(default=32, ge=1)
    fourier_min: float = Field(default=0.1, gt=0.0)
    fourier_max: Optional[float] = Field(default=None, gt=0.0)

    max_hops: int = Field(default=32, ge=1)
    num_node_types: int = Field(default=8, ge=1)
    num_edge_types: int = Field(default=4, ge=1)
    node_feature_dim: int = Field(default=0, ge=0)

    dropout: DropoutSpec = Field(default_factory=DropoutSpec)
    bins: BinSpec = Field(default_factory=BinSpec)

    @model_validator(mode="after")
    def _check_consistency(self) -> "TGTConfig":
        if self.num_layers % self.layer_multiplier:
            raise ValueError(
                f"num_layers={self.num_layers} is not divisible by "
                f"layer_multiplier={self.layer_multiplier}"
            )
        if (self.triplet_heads == 0) != (self.variant == "none"):
            raise ValueError("triplet_heads must be 0 exactly when variant is 'none'")
        if self.triplet_heads and self.edge_dim % self.triplet_heads:
            raise ValueError("edge_dim must be divisible by triplet_heads")
        if self.node_dim % self.num_heads:
            raise ValueError("node_dim must be divisible by num_heads")
        if self.fourier_max is not None and self.fourier_max <= self.fourier_min:
            raise ValueError("fourier_max must exceed fourier_min")
        return self

    @property
    def num_groups(self) -> int:
        return self.num_layers // self.layer_multiplier

    @property
    def triplet_dim(self) -> int:
        return self.edge_dim // self.triplet_heads if self.triplet_heads else 0

    @property
    def sets(self) -> int:
        return self.triangular_sets or self.edge_dim


class NoiseConfig(_Section):
    """Coordinate noise for task pretraining"""

    sigma: float = Field(default=0.2, ge=0.0)
    nu: float = Field(default=1.0, gt=0.0)
    mode: Literal["smooth", "random"] = Field(default="smooth")


class StageConfig(_Section):
    """One training stage"""

    stage: Stage = Field(default="single_stage")
    steps: int = Field(default=2000, ge=0)
    batch_size: int = Field(default=16, ge=1)
    max_lr: float = Field(default=1e-3, gt=0.0)
    min_lr: float = Field(default=1e-5, ge=0.0)
    warmup_steps: int = Field(default=100, ge=0)
    grad_clip_norm: float = Field(default=5.0, gt=0.0)
    beta1: float = Field(default=0.9, ge=0.0, lt=1.0)
    beta2: float = Field(default=0.999, ge=0.0, lt=1.0)
    eps: float = Field(default=1e-8, gt=0.0)
    distance_loss_weight: float = Field(default=0.1, ge=0.0)
    use_input_distances: bool = Field(default=False)
    log_every: int = Field(default=10, ge=1)
    eval_every: int = Field(default=0, ge=0)
    distance_checkpoint: Optional[Path] = Field(default=None)
    init_checkpoint: Optional[Path] = Field(default=None)

    @model_validator(mode="after")
    def _check_lr(self) -> "StageConfig":
        if self.min_lr > self.max_lr:
            raise ValueError("min_lr must not exceed max_lr")
        return self


class DataSettings(_Section):
    """Dataset generation and paths"""

    kind: Literal["geometry", "tsp"] = Field(default="geometry")
    train_path: Path = Field(default=Path("data/train.jsonl"))
    eval_path: Path = Field(default=Path("data/eval.jsonl"))
    count: int = Field(default=1000, ge=0)
    eval_count: int = Field(default=200, ge=0)
    n_min: int = Field(default=6, ge=4, le=24)
    n_max: int = Field(default=16, ge=4, le=24)
    tsp_points: int = Field(default=12, ge=3)
    tsp_neighbors: int = Field(default=5, ge=1)
    exact_labels: bool = Field(default=True)
    workers: int = Field(default=1, ge=1)

    @model_validator(mode="after")
    def _check_range(self) -> "DataSettings":
        if self.n_min > self.n_max:
            raise ValueError("n_min must not exceed n_max")
        if self.tsp_neighbors >= self.tsp_points:
            raise ValueError("tsp_neighbors must be smaller than tsp_points")
        return self


class InferenceSettings(_Section):
    """Stochastic inference and confidence reporting"""

    samples: int = Field(default=10, ge=1)
    aggregate: Literal["mean", "median", "mode"] = Field(default="mean")
    ewt_threshold: float = Field(default=0.5, gt=0.0)
    confidence_thresholds: List[float] = Field(
        default_factory=lambda: [0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9]
    )
    sample_counts: List[int] = Field(default_factory=lambda: [1, 2, 4, 8, 16, 32, 64])
    repeats: int = Field(default=4, ge=2)
    distance_checkpoint: Optional[Path] = Field(default=None)
    task_checkpoint: Optional[Path] = Field(default=None)


class BenchSettings(_Section):
    """Wall-clock measurement of the third-order mechanisms"""

    variants: List[Variant] = Field(
        default_factory=lambda: ["none", "triangular", "triplet_agg", "triplet_att", "axial"]
    )
    n_list: List[int] = Field(default_factory=lambda: [32, 64, 128, 256])
    reps: int = Field(default=5, ge=5)
    warmup: int = Field(default=1, ge=0)
    node_dim: int = Field(default=32, ge=1)
    edge_dim: int = Field(default=16, ge=1)
    num_heads: int = Field(default=4, ge=1)
    triplet_heads: int = Field(default=2, ge=1)
    scope: Literal["layer", "mechanism"] = Field(default="layer")
    include_backward: bool = Field(default=False)
    min_time: float = Field(default=1e-3, gt=0.0)


class SweepSettings(_Section):
    """Variant ablation: every variant trained once per seed"""

    variants: List[Variant] = Field(
        default_factory=lambda: [
            "none",
            "axial",
            "triangular",
            "ungated_agg",
            "triplet_agg",
            "ungated_att",
            "triplet_att",
        ],
        min_length=1,
    )
    seeds: List[int] = Field(default_factory=lambda: [0, 1, 2], min_length=1)
    stage: Literal[
        "distance_pretrain", "task_pretrain", "task_finetune", "single_stage", "pipeline"
    ] = Field(default="distance_pretrain")
    # used for third-order variants when model.triplet_heads is 0
    triplet_heads: int = Field(default=2, ge=1)


class VerifySettings(_Section):
    """Sizes of the invariant/oracle suite"""

    oracle_instances: int = Field(default=50, ge=1)
    max_nodes: int = Field(default=8, ge=1)
    gradcheck_coords: int = Field(default=12, ge=1)


class LoggingSettings(_Section):
    """Logging configuration"""

    level: str = Field(default="INFO")
    format: Literal["json", "console"] = Field(default="console")
    file_path: Optional[str] = Field(default=None)
    max_file_size_mb: int = Field(default=10)
    backup_count: int = Field(default=5)


class RunConfig(BaseSettings):
    """Main settings class"""

    model_config = SettingsConfigDict(
        env_prefix="TGT_",
        env_nested_delimiter="__",
        env_file=".env",
        env_file_encoding="utf-8",
        extra="forbid",
    )

    seed: int = Field(default=0)
    output_dir: Path = Field(default=Path("runs/default"))
    precision: Literal["float64", "float32"] = Field(default="float64")
    num_threads: int = Field(default=1, ge=1)

    data: DataSettings = Field(default_factory=DataSettings)
    model: TGTConfig = Field(default_factory=TGTConfig)
    noise: NoiseConfig = Field(default_factory=NoiseConfig)
    training: StageConfig = Field(default_factory=StageConfig)
    inference: InferenceSettings = Field(default_factory=InferenceSettings)
    bench: BenchSettings = Field(default_factory=BenchSettings)
    sweep: SweepSettings = Field(default_factory=SweepSettings)
    verify: VerifySettings = Field(default_factory=VerifySettings)
    logging: LoggingSettings = Field(default_factory=LoggingSettings)

    @classmethod
    def settings_customise_sources(
        cls, settings_cls, init_settings, env_settings, dotenv_settings, file_secret_settings
    ):
        # environment beats the run file
        return env_settings, dotenv_settings, init_settings


def load_run_config(path: Optional[Path] = None, **overrides: Any) -> RunConfig:
    """Read a TOML run file, apply environment and explicit overrides, validate strictly"""
    data: Dict[str, Any] = {}
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}", path=str(path))
        try:
            with open(path, "rb") as f:
                data = tomllib.load(f)
        except tomllib.TOMLDecodeError as e:
            raise ConfigError(f"cannot parse {path}: {e}", path=str(path)) from e

    try:
        config = RunConfig(**data)
        if overrides:
            merged = config.model_dump()
            merged.update({k: v for k, v in overrides.items() if v is not None})
            config = RunConfig.model_validate(merged)
    except ValidationError as e:
        raise ConfigError(
            f"invalid configuration: {e}", path=str(path) if path else None
        ) from e
    return config


@lru_cache()
def get_settings() -> RunConfig:
    """Get cached settings instance built from environment only"""
    return load_run_config()
