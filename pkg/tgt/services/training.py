"""
Training stages.

    distance_pretrain  binned-distance cross-entropy from the 2D graph (optionally with
                       distances from noised coordinates as an initial estimate)
    task_pretrain      task loss on distances from smooth-noised coordinates
                       + w_d * distance cross-entropy against the true distances
    task_finetune      task loss on distances sampled from a frozen distance predictor
                       in stochastic mode + w_d * distance cross-entropy
    single_stage       task loss on exact input distances

Each step draws a batch, averages per-graph losses, clips the global gradient norm and
takes one Adam step on the learning rate of the warmup/cosine schedule.
"""
import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np
import structlog

from tgt.core.config import NoiseConfig, RunConfig, StageConfig
from tgt.core.exceptions import PipelineError, TrainingDivergedError
from tgt.data.graph import GraphInputs, GraphInstance, featurize, pairwise_distances
from tgt.data.noising import noised_distances
from tgt.models import TGT, load_checkpoint, parameter_digest, save_checkpoint
from tgt.nn.encodings import bin_center, bin_distance
from tgt.services import metrics
from tgt.services.optim import Adam, clip_grad_norm, global_grad_norm, learning_rate
from tgt.tensor import Tensor, no_grad, ops
from tgt.utils.seeding import EVAL_STREAM, INIT_STREAM, TRAIN_STREAM, derive_rng

logger = structlog.get_logger(__name__)

LOG_COLUMNS = [
    "step", "lr", "loss", "loss_task", "loss_distance", "grad_norm", "grad_norm_clipped"
]
STAGE_IDS = {"distance_pretrain": 1, "task_pretrain": 2, "task_finetune": 3, "single_stage": 4}


@dataclass
class LossTerms:
    total: Tensor
    task: float
    distance: float


@dataclass
class TrainingResult:
    stage: str
    steps: int
    history: List[Dict[str, float]] = field(default_factory=list)
    evaluation: Dict[str, float] = field(default_factory=dict)
    checkpoint: Optional[Path] = None
    log_path: Optional[Path] = None


# -- losses -------------------------------------------------------------------


def _require(graph: GraphInstance, stage: str, *names: str) -> None:
    missing = [name for name in names if getattr(graph, name) is None]
    if missing:
        raise PipelineError(
            f"graph {graph.graph_id} lacks {', '.join(missing)} required by {stage}",
            graph_id=graph.graph_id,
            stage=stage,
        )


def task_target_field(model: TGT) -> str:
    return "target_scalar" if model.config.task == "scalar" else "edge_labels"


def distance_loss(logits: Tensor, distances: np.ndarray, model: TGT) -> Tensor:
    """Cross-entropy of binned distances over off-diagonal pairs"""
    n = distances.shape[0]
    weights = 1.0 - np.eye(n)
    return ops.cross_entropy(logits, bin_distance(distances, model.config.bins), weights)


def task_loss(model: TGT, outputs, graph: GraphInstance) -> Tensor:
    """Absolute error of the standardized scalar, or BCE over the graph's candidate edges"""
    if model.config.task == "scalar":
        target = model.standardize(float(graph.target_scalar))
        return ops.abs(outputs.graph_scalar - target)
    return ops.binary_cross_entropy(
        outputs.edge_logits, graph.edge_labels, graph.adjacency().astype(np.float64)
    )


def sample_predicted_distances(
    distance_model: TGT,
    graph: GraphInstance,
    rng: Optional[np.random.Generator],
    stochastic: bool = True,
) -> np.ndarray:
    """Bin centers of the most probable bin per pair; dropout active when stochastic"""
    inputs = featurize(graph, max_hops=distance_model.config.max_hops)
    mode = "stochastic_eval" if stochastic else "deterministic_eval"
    with no_grad():
        logits = distance_model(inputs, mode, rng).distance_logits.data
    distances = bin_center(np.argmax(logits, axis=-1), distance_model.config.bins)
    np.fill_diagonal(distances, 0.0)
    return distances


def exact_distances(graph: GraphInstance) -> np.ndarray:
    if graph.target_distances is not None:
        return graph.target_distances
    return pairwise_distances(graph.coords)


# -- trainer ------------------------------------------------------------------


class StageTrainer:
    """Runs one training stage for a model"""

    def __init__(
        self,
        model: TGT,
        config: StageConfig,
        noise: Optional[NoiseConfig] = None,
        seed: int = 0,
        output_dir: Optional[Path] = None,
        distance_model: Optional[TGT] = None,
        ewt_threshold: float = 0.5,
    ):
        self.model = model
        self.config = config
        self.stage = config.stage
        self.noise = noise or NoiseConfig()
        self.seed = seed
        self.output_dir = Path(output_dir) if output_dir is not None else None
        self.distance_model = distance_model
        self.ewt_threshold = ewt_threshold

        if self.stage == "task_finetune":
            if distance_model is None:
                raise PipelineError("task_finetune needs a frozen distance predictor")
            if distance_model.config.bins != model.config.bins:
                raise PipelineError(
                    "distance predictor and task predictor use different distance bins",
                    distance_bins=distance_model.config.bins.model_dump(),
                    task_bins=model.config.bins.model_dump(),
                )

    # -- inputs ---------------------------------------------------------------

    def required_fields(self) -> List[str]:
        if self.stage == "distance_pretrain":
            fields = ["target_distances"]
            if self.config.use_input_distances:
                fields.append("coords")
            return fields
        fields = [task_target_field(self.model)]
        if self.stage == "task_pretrain":
            fields.append("coords")
        if self.stage in ("task_pretrain", "task_finetune"):
            fields.append("target_distances")
        if self.stage == "single_stage" and self.model.config.encoding != "none":
            fields.append("target_distances")
        return fields

    def model_inputs(
        self, graph: GraphInstance, rng: np.random.Generator, deterministic: bool = False
    ) -> GraphInputs:
        distances = None
        if self.stage == "distance_pretrain":
            if self.config.use_input_distances:
                distances = noised_distances(graph.coords, self.noise, rng)
        elif self.stage == "task_pretrain":
            distances = noised_distances(graph.coords, self.noise, rng)
        elif self.stage == "task_finetune":
            distances = sample_predicted_distances(
                self.distance_model, graph, rng, stochastic=not deterministic
            )
        elif self.model.config.encoding != "none":
            distances = exact_distances(graph)
        return featurize(graph, distances=distances, max_hops=self.model.config.max_hops)

    # -- loss -----------------------------------------------------------------

    def graph_loss(self, graph: GraphInstance, rng: np.random.Generator):
        inputs = self.model_inputs(graph, rng)
        outputs = self.model(inputs, "train", rng)
        if self.stage == "distance_pretrain":
            return None, distance_loss(outputs.distance_logits, graph.target_distances, self.model)
        task = task_loss(self.model, outputs, graph)
        if self.stage == "single_stage":
            return task, None
        return task, distance_loss(outputs.distance_logits, graph.target_distances, self.model)

    def batch_loss(self, graphs: Sequence[GraphInstance], rng: np.random.Generator) -> LossTerms:
        """Mean over the batch of task + w_d * distance"""
        task_terms, distance_terms = [], []
        for graph in graphs:
            task, distance = self.graph_loss(graph, rng)
            if task is not None:
                task_terms.append(task)
            if distance is not None:
                distance_terms.append(distance)

        weight = self.config.distance_loss_weight
        task_mean = _mean(task_terms)
        distance_mean = _mean(distance_terms)
        if task_mean is None:
            total = distance_mean
        elif distance_mean is None:
            total = task_mean
        else:
            total = task_mean + distance_mean * weight
        return LossTerms(
            total=total,
            task=task_mean.item() if task_mean is not None else 0.0,
            distance=distance_mean.item() if distance_mean is not None else 0.0,
        )

    # -- loop -----------------------------------------------------------------

    def prepare(self, graphs: Sequence[GraphInstance]) -> None:
        if not graphs:
            raise PipelineError(f"{self.stage}: empty training set")
        fields = self.required_fields()
        for graph in graphs:
            _require(graph, self.stage, *fields)

        if self.model.config.task == "scalar" and self.stage != "distance_pretrain":
            if self.stage != "task_finetune" or not self.model.has_target_stats:
                targets = np.array([g.target_scalar for g in graphs], dtype=np.float64)
                self.model.set_target_stats(targets.mean(), targets.std())

    def fit(
        self,
        train_graphs: Sequence[GraphInstance],
        eval_graphs: Optional[Sequence[GraphInstance]] = None,
    ) -> TrainingResult:
        self.prepare(train_graphs)
        if eval_graphs:
            for graph in eval_graphs:
                _require(graph, self.stage, *self.required_fields())

        rng = derive_rng(self.seed, TRAIN_STREAM, STAGE_IDS[self.stage])
        parameters = self.model.parameters()
        optimizer = Adam.from_config(parameters, self.config)
        frozen_digest = parameter_digest(self.distance_model) if self.distance_model else None

        result = TrainingResult(stage=self.stage, steps=self.config.steps)
        logger.info(
            "stage_started",
            stage=self.stage,
            steps=self.config.steps,
            graphs=len(train_graphs),
            variant=self.model.config.variant,
            parameters=self.model.num_parameters(),
        )

        for step in range(self.config.steps):
            lr = learning_rate(step, self.config)
            size = min(self.config.batch_size, len(train_graphs))
            batch = [train_graphs[i] for i in rng.choice(len(train_graphs), size, replace=False)]

            optimizer.zero_grad()
            terms = self.batch_loss(batch, rng)
            loss_value = terms.total.item()
            if not np.isfinite(loss_value):
                raise TrainingDivergedError(step, self.stage)
            terms.total.backward()
            grad_norm = clip_grad_norm(parameters, self.config.grad_clip_norm)
            clipped_norm = global_grad_norm(parameters)
            optimizer.step(lr)

            record = {
                "step": step,
                "lr": lr,
                "loss": loss_value,
                "loss_task": terms.task,
                "loss_distance": terms.distance,
                "grad_norm": grad_norm,
                "grad_norm_clipped": clipped_norm,
            }
            result.history.append(record)
            if step % self.config.log_every == 0 or step == self.config.steps - 1:
                logger.info("train_step", stage=self.stage, **record)
            if eval_graphs and self.config.eval_every and (step + 1) % self.config.eval_every == 0:
                logger.info("eval", stage=self.stage, step=step, **self.evaluate(eval_graphs))

        if frozen_digest is not None and parameter_digest(self.distance_model) != frozen_digest:
            raise PipelineError("frozen distance predictor changed during finetuning")
        if eval_graphs:
            result.evaluation = self.evaluate(eval_graphs)
            logger.info("stage_evaluation", stage=self.stage, **result.evaluation)
        self._write_outputs(result)
        return result

    def evaluate(self, graphs: Sequence[GraphInstance]) -> Dict[str, float]:
        """Held-out metrics with dropout off"""
        rng = derive_rng(self.seed, EVAL_STREAM, STAGE_IDS[self.stage])
        return evaluate_model(
            self.model,
            graphs,
            lambda g: self.model_inputs(g, rng, deterministic=True),
            self.ewt_threshold,
        )

    def _write_outputs(self, result: TrainingResult) -> None:
        if self.output_dir is None:
            return
        result.log_path = write_csv(
            self.output_dir / "logs" / f"{self.stage}.csv", LOG_COLUMNS, result.history
        )
        result.checkpoint = save_checkpoint(
            self.model,
            self.output_dir / "checkpoints" / f"{self.stage}.npz",
            {"stage": self.stage, "steps": self.config.steps, "seed": self.seed},
        )


def _mean(terms: List[Tensor]) -> Optional[Tensor]:
    if not terms:
        return None
    total = terms[0]
    for term in terms[1:]:
        total = total + term
    return total / float(len(terms))


# -- evaluation ---------------------------------------------------------------


def evaluate_model(
    model: TGT,
    graphs: Sequence[GraphInstance],
    inputs_fn,
    ewt_threshold: float = 0.5,
) -> Dict[str, float]:
    """Distance CE plus task MAE/EwT (scalar) or F1 (edge), deterministic forward"""
    ce, predictions, targets, f1s = [], [], [], []
    with no_grad():
        for graph in graphs:
            outputs = model(inputs_fn(graph), "deterministic_eval")
            if graph.target_distances is not None:
                ce.append(
                    metrics.distance_cross_entropy(
                        outputs.distance_logits.data, graph.target_distances, model.config.bins
                    )
                )
            if outputs.graph_scalar is not None and graph.target_scalar is not None:
                predictions.append(model.destandardize(outputs.graph_scalar.item()))
                targets.append(graph.target_scalar)
            if outputs.edge_logits is not None and graph.edge_labels is not None:
                f1s.append((outputs.edge_logits.data, graph.edge_labels, graph.adjacency()))

    report: Dict[str, float] = {"graphs": float(len(graphs))}
    if ce:
        report["distance_ce"] = float(np.mean(ce))
    if predictions:
        report["mae"] = metrics.mae(predictions, targets)
        report["ewt"] = metrics.ewt(predictions, targets, ewt_threshold)
    if f1s:
        report["f1"] = pooled_edge_f1(f1s)
    return report


def pooled_edge_f1(items) -> float:
    """F1 over the candidate pairs of all graphs together"""
    labels, predicted = [], []
    for logits, edge_labels, candidates in items:
        upper = np.triu(candidates, k=1).astype(bool)
        labels.append(edge_labels[upper])
        predicted.append(logits[upper] > 0)
    return metrics.binary_f1(np.concatenate(labels), np.concatenate(predicted))


def write_csv(path: Path, columns: Sequence[str], rows: Sequence[Dict]) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.DictWriter(f, fieldnames=list(columns))
        writer.writeheader()
        for row in rows:
            writer.writerow({c: _format(row.get(c)) for c in columns})
    return path


def _format(value):
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return value


# -- orchestration ------------------------------------------------------------


def build_model(config: RunConfig, stage: str) -> TGT:
    return TGT(config.model, derive_rng(config.seed, INIT_STREAM, STAGE_IDS[stage]))


def run_stage(
    config: RunConfig,
    train_graphs: Sequence[GraphInstance],
    eval_graphs: Optional[Sequence[GraphInstance]] = None,
    stage_config: Optional[StageConfig] = None,
    distance_model: Optional[TGT] = None,
) -> TrainingResult:
    """Train one stage as configured, loading any checkpoints it names"""
    stage_config = stage_config or config.training
    stage = stage_config.stage
    if stage == "task_finetune" and distance_model is None:
        if stage_config.distance_checkpoint is None:
            raise PipelineError("task_finetune needs training.distance_checkpoint")
        distance_model, _ = load_checkpoint(stage_config.distance_checkpoint)

    if stage_config.init_checkpoint is not None:
        model, _ = load_checkpoint(stage_config.init_checkpoint)
    else:
        model = build_model(config, stage)

    trainer = StageTrainer(
        model,
        stage_config,
        noise=config.noise,
        seed=config.seed,
        output_dir=config.output_dir,
        distance_model=distance_model,
        ewt_threshold=config.inference.ewt_threshold,
    )
    return trainer.fit(train_graphs, eval_graphs)


def run_pipeline(
    config: RunConfig,
    train_graphs: Sequence[GraphInstance],
    eval_graphs: Optional[Sequence[GraphInstance]] = None,
) -> Dict[str, TrainingResult]:
    """Distance pretraining, noisy task pretraining, then finetuning on sampled distances"""
    base = config.training
    results: Dict[str, TrainingResult] = {}

    first = run_stage(
        config, train_graphs, eval_graphs, base.model_copy(update={"stage": "distance_pretrain"})
    )
    results["distance_pretrain"] = first
    second = run_stage(
        config, train_graphs, eval_graphs, base.model_copy(update={"stage": "task_pretrain"})
    )
    results["task_pretrain"] = second

    distance_model, _ = load_checkpoint(first.checkpoint)
    third_config = base.model_copy(
        update={
            "stage": "task_finetune",
            "init_checkpoint": second.checkpoint,
            "distance_checkpoint": first.checkpoint,
        }
    )
    results["task_finetune"] = run_stage(
        config, train_graphs, eval_graphs, third_config, distance_model=distance_model
    )
    return results
