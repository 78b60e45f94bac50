"""
Command-line interface for the Triplet Graph Transformer.

Every subcommand reads the same TOML run file; ``--seed`` and ``--output-dir`` override
it. Errors are reported as one JSON record on stderr and mapped to the exit code of
their category.
"""
import functools
import json
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, get_args

import click
import structlog

from tgt.core.config import RunConfig, Variant, load_run_config
from tgt.core.exceptions import PipelineError, TGTError
from tgt.core.logging_config import setup_logging
from tgt.data import gen_geometry_dataset, gen_tsp_dataset, read_dataset, write_dataset
from tgt.models import load_checkpoint
from tgt.services import ablation, benchmark, inference, metrics, training, verification
from tgt.tensor import default_dtype
from tgt.utils.seeding import EVAL_STREAM, INFERENCE_STREAM, derive_seed

logger = structlog.get_logger(__name__)

STAGE_CHOICES = ["distance_pretrain", "task_pretrain", "task_finetune", "single_stage", "pipeline"]
EVAL_COLUMNS = ["checkpoint", "stage", "graphs", "distance_ce", "mae", "ewt", "f1"]


def run_command(fn):
    """Load the run config, configure logging and precision, translate package errors"""

    @functools.wraps(fn)
    @click.pass_context
    def wrapper(ctx: click.Context, **kwargs: Any):
        options = ctx.obj or {}
        try:
            config = load_run_config(
                options.get("config"),
                seed=options.get("seed"),
                output_dir=options.get("output_dir"),
            )
            setup_logging(config.logging)
            with default_dtype(config.precision):
                return fn(config, **kwargs)
        except TGTError as e:
            logger.error("command_failed", command=ctx.info_name, **e.to_record())
            click.echo(json.dumps(e.to_record(), default=str), err=True)
            sys.exit(e.exit_code)

    return wrapper


def _echo_json(payload: Dict[str, Any]) -> None:
    click.echo(json.dumps(payload, indent=2, default=str))


def _datasets(config: RunConfig):
    return read_dataset(config.data.train_path), read_dataset(config.data.eval_path)


@click.group()
@click.option(
    "--config", "-c", "config_path", type=click.Path(path_type=Path), help="TOML run file"
)
@click.option("--seed", type=int, default=None, help="Override the run seed")
@click.option(
    "--output-dir",
    type=click.Path(path_type=Path),
    default=None,
    help="Override the output directory",
)
@click.pass_context
def main(
    ctx: click.Context,
    config_path: Optional[Path],
    seed: Optional[int],
    output_dir: Optional[Path],
):
    """Triplet Graph Transformer CLI"""
    ctx.obj = {"config": config_path, "seed": seed, "output_dir": output_dir}


@main.command("gen-data")
@click.option("--count", type=int, default=None, help="Training instances (overrides data.count)")
@click.option("--eval-count", type=int, default=None, help="Held-out instances")
@run_command
def gen_data(config: RunConfig, count: Optional[int], eval_count: Optional[int]):
    """Generate the training and held-out datasets"""
    data = config.data
    count = data.count if count is None else count
    eval_count = data.eval_count if eval_count is None else eval_count
    eval_seed = derive_seed(config.seed, EVAL_STREAM)

    if data.kind == "geometry":
        n_range = (data.n_min, data.n_max)
        max_hops = config.model.max_hops
        train = gen_geometry_dataset(count, n_range, config.seed, max_hops, data.workers)
        held_out = gen_geometry_dataset(
            eval_count, n_range, eval_seed, max_hops, data.workers, first_id=count
        )
    else:
        args = (data.tsp_points, data.tsp_neighbors)
        train = gen_tsp_dataset(
            count, *args, config.seed, exact=data.exact_labels, workers=data.workers
        )
        held_out = gen_tsp_dataset(
            eval_count,
            *args,
            eval_seed,
            exact=data.exact_labels,
            workers=data.workers,
            first_id=count,
        )

    written = {
        str(data.train_path): write_dataset(data.train_path, train),
        str(data.eval_path): write_dataset(data.eval_path, held_out),
    }
    _echo_json({"kind": data.kind, "records": written})


@main.command()
@click.option(
    "--stage",
    type=click.Choice(STAGE_CHOICES),
    default=None,
    help="Stage to run (default: training.stage); 'pipeline' runs all three stages",
)
@run_command
def train(config: RunConfig, stage: Optional[str]):
    """Train one stage, or the full three-stage pipeline"""
    train_graphs, eval_graphs = _datasets(config)
    stage = stage or config.training.stage
    if stage == "pipeline":
        results = training.run_pipeline(config, train_graphs, eval_graphs)
    else:
        stage_config = config.training.model_copy(update={"stage": stage})
        results = {stage: training.run_stage(config, train_graphs, eval_graphs, stage_config)}

    _echo_json(
        {
            name: {
                "steps": result.steps,
                "final_loss": result.history[-1]["loss"] if result.history else None,
                "evaluation": result.evaluation,
                "checkpoint": result.checkpoint,
                "log": result.log_path,
            }
            for name, result in results.items()
        }
    )


@main.command("eval")
@click.option("--checkpoint", type=click.Path(path_type=Path), required=True)
@click.option(
    "--distance-checkpoint",
    type=click.Path(path_type=Path),
    default=None,
    help="Evaluate a task predictor on distances from this distance predictor",
)
@run_command
def evaluate(config: RunConfig, checkpoint: Path, distance_checkpoint: Optional[Path]):
    """Held-out distance cross-entropy and task metrics of a checkpoint"""
    eval_graphs = read_dataset(config.data.eval_path)
    model, metadata = load_checkpoint(checkpoint)
    distance_model = None
    stage = metadata.get("stage", config.training.stage)
    if distance_checkpoint is not None:
        distance_model, _ = load_checkpoint(distance_checkpoint)
        stage = "task_finetune"

    trainer = training.StageTrainer(
        model,
        config.training.model_copy(update={"stage": stage}),
        noise=config.noise,
        seed=config.seed,
        distance_model=distance_model,
        ewt_threshold=config.inference.ewt_threshold,
    )
    report = trainer.evaluate(eval_graphs)
    row = {"checkpoint": str(checkpoint), "stage": stage, **report}
    path = training.write_csv(config.output_dir / f"eval_{stage}.csv", EVAL_COLUMNS, [row])
    logger.info("evaluation_written", path=str(path), **report)
    _echo_json(row)


@main.command()
@click.option("--distance-checkpoint", type=click.Path(path_type=Path), default=None)
@click.option("--task-checkpoint", type=click.Path(path_type=Path), default=None)
@click.option("--samples", "-k", type=int, default=None, help="Stochastic passes per graph")
@click.option("--sample-curve", is_flag=True, help="Also write the sample-count curve")
@run_command
def infer(
    config: RunConfig,
    distance_checkpoint: Optional[Path],
    task_checkpoint: Optional[Path],
    samples: Optional[int],
    sample_curve: bool,
):
    """Stochastic inference with confidence on the held-out set"""
    settings = config.inference
    distance_checkpoint = distance_checkpoint or settings.distance_checkpoint
    task_checkpoint = task_checkpoint or settings.task_checkpoint
    if distance_checkpoint is None or task_checkpoint is None:
        raise PipelineError("infer needs a distance checkpoint and a task checkpoint")

    eval_graphs = read_dataset(config.data.eval_path)
    distance_model, _ = load_checkpoint(distance_checkpoint)
    task_model, _ = load_checkpoint(task_checkpoint)
    base_seed = derive_seed(config.seed, INFERENCE_STREAM)
    k = samples or settings.samples

    sets = inference.run_inference(
        distance_model, task_model, eval_graphs, k, base_seed, config.num_threads
    )
    paths = inference.write_inference_reports(sets, settings, config.output_dir)
    summary: Dict[str, Any] = {
        "graphs": len(sets),
        "samples": k,
        "mae": metrics.mae(
            [s.aggregate(settings.aggregate) for s in sets], [s.target for s in sets]
        ),
        "outputs": paths,
    }
    if k > 1 and len(sets) > 2:
        summary["confidence_spearman"] = inference.confidence_error_correlation(
            sets, settings.aggregate
        )

    if sample_curve:
        report = inference.sample_count_curve(
            distance_model,
            task_model,
            eval_graphs,
            settings.sample_counts,
            settings.repeats,
            base_seed,
            config.num_threads,
        )
        summary["variance_slope"] = report.variance_slope
        summary["outputs"]["sample_count"] = training.write_csv(
            config.output_dir / "sample_count.csv", inference.SAMPLE_COUNT_COLUMNS, report.rows
        )
    _echo_json(summary)


@main.command()
@click.option(
    "--stage",
    type=click.Choice(STAGE_CHOICES),
    default=None,
    help="Stage trained by every run (default: sweep.stage)",
)
@click.option(
    "--variant",
    "variants",
    type=click.Choice(get_args(Variant)),
    multiple=True,
    help="Variant to include; repeat for several (default: sweep.variants)",
)
@run_command
def sweep(config: RunConfig, stage: Optional[str], variants: tuple):
    """Train every variant once per seed and summarize held-out metrics per variant"""
    updates: Dict[str, Any] = {}
    if stage:
        updates["stage"] = stage
    if variants:
        updates["variants"] = list(variants)
    if updates:
        config = config.model_copy(update={"sweep": config.sweep.model_copy(update=updates)})

    train_graphs, eval_graphs = _datasets(config)
    report = ablation.run_sweep(config, train_graphs, eval_graphs)
    _echo_json(
        {
            "runs": len(report.runs),
            "summary": report.summary,
            "outputs": {"runs": report.runs_path, "summary": report.summary_path},
        }
    )


@main.command()
@run_command
def bench(config: RunConfig):
    """Time the third-order mechanisms over the configured graph sizes"""
    report = benchmark.run_bench(config.bench, config.seed, config.output_dir)
    lines: List[str] = []
    for mechanism, results in report.results.items():
        medians = ", ".join(f"N={r.n}: {r.median:.3e}s" for r in results)
        lines.append(f"{mechanism:<12} exponent={results[0].exponent:.2f}  {medians}")
    lines.append(f"timer overhead ratio: {report.overhead_ratio:.2e}")
    click.echo("\n".join(lines))


@main.command()
@run_command
def verify(config: RunConfig):
    """Run the gradient, oracle and invariant checks"""
    report = verification.run_verification(config.verify, config.seed)
    for check in report.failures:
        click.echo(f"FAILED {check.name}: {check.value:.3e} > {check.tolerance:.1e}")
    click.echo(f"checks: {report.count}  failures: {len(report.failures)}")
    if not report.ok:
        sys.exit(1)


if __name__ == "__main__":
    main()
