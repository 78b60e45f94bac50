"""
Variant ablation sweep.

Every (variant, seed) pair trains from scratch in its own output directory. The held-out
metrics of each run, and their per-variant mean and spread, are written as CSV so the
third-order mechanisms can be compared against the pair-only baseline.
"""
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
import structlog
from pydantic import ValidationError

from tgt.core.config import RunConfig, TGTConfig
from tgt.core.exceptions import ConfigError, PipelineError
from tgt.data.graph import GraphInstance
from tgt.models import count_params
from tgt.services.training import run_pipeline, run_stage, write_csv

logger = structlog.get_logger(__name__)

METRICS = ("distance_ce", "mae", "ewt", "f1")
RUN_COLUMNS = ["variant", "seed", "parameters", *METRICS]
SUMMARY_COLUMNS = [
    "variant",
    "runs",
    "parameters",
    *(f"{metric}_{stat}" for metric in METRICS for stat in ("mean", "std")),
    "distance_ce_vs_none",
]
BASELINE = "none"


@dataclass
class SweepReport:
    runs: List[Dict[str, Any]] = field(default_factory=list)
    summary: List[Dict[str, Any]] = field(default_factory=list)
    runs_path: Optional[Path] = None
    summary_path: Optional[Path] = None


def variant_config(config: RunConfig, variant: str, seed: int) -> RunConfig:
    """Run config of one sweep cell, writing under output_dir/sweep/<variant>/seed_<seed>"""
    if variant == BASELINE:
        heads = 0
    else:
        heads = config.model.triplet_heads or config.sweep.triplet_heads
    try:
        model = TGTConfig.model_validate(
            {**config.model.model_dump(), "variant": variant, "triplet_heads": heads}
        )
    except ValidationError as e:
        raise ConfigError(f"variant {variant!r} does not fit the model config: {e}") from e
    return config.model_copy(
        update={
            "model": model,
            "seed": seed,
            "output_dir": config.output_dir / "sweep" / variant / f"seed_{seed}",
        }
    )


def train_variant(
    config: RunConfig,
    stage: str,
    train_graphs: Sequence[GraphInstance],
    eval_graphs: Sequence[GraphInstance],
) -> Dict[str, float]:
    """Held-out metrics of one run; the pipeline reports its distance predictor's CE"""
    if stage == "pipeline":
        results = run_pipeline(config, train_graphs, eval_graphs)
        evaluation = dict(results["task_finetune"].evaluation)
        distance_ce = results["distance_pretrain"].evaluation.get("distance_ce")
        if distance_ce is not None:
            evaluation["distance_ce"] = distance_ce
        return evaluation
    stage_config = config.training.model_copy(update={"stage": stage})
    return run_stage(config, train_graphs, eval_graphs, stage_config).evaluation


def _spread(values: Sequence[float]) -> float:
    return float(np.std(values, ddof=1)) if len(values) > 1 else 0.0


def summarize_runs(runs: Sequence[Dict[str, Any]]) -> List[Dict[str, Any]]:
    """Mean and sample standard deviation per variant, in first-seen variant order"""
    grouped: Dict[str, List[Dict[str, Any]]] = {}
    for run in runs:
        grouped.setdefault(run["variant"], []).append(run)

    summary = []
    for variant, rows in grouped.items():
        entry: Dict[str, Any] = {
            "variant": variant,
            "runs": len(rows),
            "parameters": rows[0]["parameters"],
        }
        for metric in METRICS:
            values = [row[metric] for row in rows if row.get(metric) is not None]
            if values:
                entry[f"{metric}_mean"] = float(np.mean(values))
                entry[f"{metric}_std"] = _spread(values)
        summary.append(entry)

    baseline = next((s for s in summary if s["variant"] == BASELINE), None)
    reference = baseline.get("distance_ce_mean") if baseline else None
    if reference:
        for entry in summary:
            if "distance_ce_mean" in entry:
                entry["distance_ce_vs_none"] = entry["distance_ce_mean"] / reference - 1.0
    return summary


def run_sweep(
    config: RunConfig,
    train_graphs: Sequence[GraphInstance],
    eval_graphs: Sequence[GraphInstance],
) -> SweepReport:
    settings = config.sweep
    if not eval_graphs:
        raise PipelineError("the ablation sweep needs a held-out set")

    report = SweepReport()
    for variant in settings.variants:
        for seed in settings.seeds:
            run_config = variant_config(config, variant, seed)
            logger.info("sweep_run_started", variant=variant, seed=seed, stage=settings.stage)
            evaluation = train_variant(run_config, settings.stage, train_graphs, eval_graphs)
            row: Dict[str, Any] = {
                "variant": variant,
                "seed": seed,
                "parameters": count_params(run_config.model),
            }
            row.update({metric: evaluation[metric] for metric in METRICS if metric in evaluation})
            report.runs.append(row)
            logger.info("sweep_run_finished", **row)

    report.summary = summarize_runs(report.runs)
    report.runs_path = write_csv(config.output_dir / "sweep_runs.csv", RUN_COLUMNS, report.runs)
    report.summary_path = write_csv(
        config.output_dir / "sweep_summary.csv", SUMMARY_COLUMNS, report.summary
    )
    logger.info(
        "sweep_finished",
        runs=len(report.runs),
        variants=len(report.summary),
        summary=str(report.summary_path),
    )
    return report
