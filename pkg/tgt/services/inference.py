"""
Stochastic inference with uncertainty.

One pass samples distances from the distance predictor with dropout active (argmax bin
per pair, mapped to its center) and feeds them to the task predictor, also with dropout
active. K passes per graph are independent tasks seeded by (base_seed, graph_id,
sample_id), so thread-pool execution reproduces sequential results exactly.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Literal, Optional, Sequence, Tuple

import numpy as np
import structlog

from tgt.core.config import InferenceSettings
from tgt.core.exceptions import PipelineError
from tgt.data.graph import GraphInstance, featurize
from tgt.models import TGT
from tgt.services import metrics
from tgt.services.training import sample_predicted_distances, write_csv
from tgt.tensor import no_grad
from tgt.utils.seeding import derive_seed, sample_rng

logger = structlog.get_logger(__name__)

Aggregate = Literal["mean", "median", "mode"]
MODE_BINS = 32


def histogram_mode(samples: np.ndarray, bins: int = MODE_BINS) -> float:
    """Center of the fullest of ``bins`` equal-width bins spanning the sample range"""
    samples = np.asarray(samples, dtype=np.float64)
    low, high = samples.min(), samples.max()
    if low == high:
        return float(low)
    counts, edges = np.histogram(samples, bins=bins, range=(low, high))
    best = int(np.argmax(counts))
    return float(0.5 * (edges[best] + edges[best + 1]))


@dataclass
class PredictionSampleSet:
    graph_id: int
    samples: np.ndarray
    target: Optional[float] = None

    def __post_init__(self) -> None:
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 1 or self.samples.size < 1:
            raise PipelineError("a prediction sample set needs at least one sample")

    @property
    def k(self) -> int:
        return int(self.samples.size)

    @property
    def mean(self) -> float:
        return float(np.mean(self.samples))

    @property
    def median(self) -> float:
        return float(np.median(self.samples))

    @property
    def mode(self) -> float:
        return histogram_mode(self.samples)

    @property
    def std(self) -> float:
        return float(np.std(self.samples))

    @property
    def confidence(self) -> Optional[float]:
        """1/std; None for a single sample, inf when all samples agree"""
        if self.k == 1:
            return None
        std = self.std
        return float("inf") if std == 0.0 else 1.0 / std

    def aggregate(self, how: Aggregate = "mean") -> float:
        if how not in ("mean", "median", "mode"):
            raise PipelineError(f"unknown aggregate {how!r}")
        return getattr(self, how)

    def prefix(self, k: int) -> "PredictionSampleSet":
        return PredictionSampleSet(self.graph_id, self.samples[:k], self.target)


# -- sampling -----------------------------------------------------------------


def predict_once(
    distance_model: TGT, task_model: TGT, graph: GraphInstance, rng: np.random.Generator
) -> float:
    """One stochastic (distance sample -> task prediction) pass, in target units"""
    if task_model.config.task != "scalar":
        raise PipelineError("stochastic inference reports scalar predictions only")
    distances = sample_predicted_distances(distance_model, graph, rng, stochastic=True)
    inputs = featurize(graph, distances=distances, max_hops=task_model.config.max_hops)
    with no_grad():
        prediction = task_model(inputs, "stochastic_eval", rng).graph_scalar.item()
    return task_model.destandardize(prediction)


def _check_models(distance_model: TGT, task_model: TGT) -> None:
    if distance_model.config.bins != task_model.config.bins:
        raise PipelineError("distance predictor and task predictor use different distance bins")


def stochastic_inference(
    distance_model: TGT,
    task_model: TGT,
    graph: GraphInstance,
    samples: int,
    base_seed: int,
    workers: int = 1,
) -> PredictionSampleSet:
    return run_inference(distance_model, task_model, [graph], samples, base_seed, workers)[0]


def run_inference(
    distance_model: TGT,
    task_model: TGT,
    graphs: Sequence[GraphInstance],
    samples: int,
    base_seed: int,
    workers: int = 1,
) -> List[PredictionSampleSet]:
    """K passes for every graph, spread over a thread pool when workers > 1"""
    if samples < 1:
        raise PipelineError(f"need at least one sample, got {samples}")
    _check_models(distance_model, task_model)

    tasks: List[Tuple[int, int]] = [(g, s) for g in range(len(graphs)) for s in range(samples)]

    def run(task: Tuple[int, int]) -> float:
        index, sample_id = task
        graph = graphs[index]
        return predict_once(
            distance_model, task_model, graph, sample_rng(base_seed, graph.graph_id, sample_id)
        )

    if workers > 1 and len(tasks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            values = list(executor.map(run, tasks))
    else:
        values = [run(task) for task in tasks]

    grid = np.asarray(values, dtype=np.float64).reshape(len(graphs), samples)
    sets = [
        PredictionSampleSet(graph.graph_id, grid[i], graph.target_scalar)
        for i, graph in enumerate(graphs)
    ]
    logger.info("inference_done", graphs=len(graphs), samples=samples, workers=workers)
    return sets


# -- confidence ---------------------------------------------------------------


def normalize_confidence(sets: Sequence[PredictionSampleSet]) -> np.ndarray:
    """Min-max scale 1/std to [0, 1] over the set; infinite -> 1, undefined -> nan"""
    raw = np.array(
        [np.nan if s.confidence is None else s.confidence for s in sets], dtype=np.float64
    )
    normalized = np.full(raw.shape, np.nan)
    normalized[np.isposinf(raw)] = 1.0
    finite = np.isfinite(raw)
    if finite.any():
        low, high = raw[finite].min(), raw[finite].max()
        if high > low:
            normalized[finite] = (raw[finite] - low) / (high - low)
        else:
            normalized[finite] = 1.0
    return normalized


CONFIDENCE_COLUMNS = ["threshold", "count", "fraction", "mae", "ewt"]


def confidence_curve(
    sets: Sequence[PredictionSampleSet],
    thresholds: Sequence[float],
    ewt_threshold: float,
    aggregate: Aggregate = "mean",
) -> List[Dict[str, float]]:
    """Metrics over the examples whose normalized confidence is at least each threshold"""
    confidence = normalize_confidence(sets)
    predictions = np.array([s.aggregate(aggregate) for s in sets])
    targets = np.array([np.nan if s.target is None else s.target for s in sets])
    rows = []
    for threshold in thresholds:
        keep = confidence >= threshold
        rows.append(
            {
                "threshold": float(threshold),
                "count": int(keep.sum()),
                "fraction": float(keep.mean()) if len(sets) else 0.0,
                "mae": metrics.mae(predictions[keep], targets[keep]),
                "ewt": metrics.ewt(predictions[keep], targets[keep], ewt_threshold),
            }
        )
    return rows


def confidence_error_correlation(
    sets: Sequence[PredictionSampleSet], aggregate: Aggregate = "mean"
) -> float:
    """Spearman rho between normalized confidence and negative absolute error"""
    confidence = normalize_confidence(sets)
    errors = np.array([abs(s.aggregate(aggregate) - s.target) for s in sets])
    valid = ~np.isnan(confidence)
    return metrics.spearman(confidence[valid], -errors[valid])


# -- sample count -------------------------------------------------------------

SAMPLE_COUNT_COLUMNS = ["k", "mae_mean", "mae_median", "mae_mode", "aggregate_std"]


@dataclass
class SampleCountReport:
    rows: List[Dict[str, float]]
    variance_slope: float


def sample_count_curve(
    distance_model: TGT,
    task_model: TGT,
    graphs: Sequence[GraphInstance],
    counts: Sequence[int],
    repeats: int,
    base_seed: int,
    workers: int = 1,
) -> SampleCountReport:
    """
    Aggregated MAE per sample count K, and the spread of the sample mean across
    ``repeats`` independent runs. Each run draws max(K) passes per graph and evaluates
    every K on its first K passes; ``variance_slope`` is the log-log slope of the
    spread against K (about -1/2 for independent passes).
    """
    counts = sorted(set(int(k) for k in counts))
    if not counts or counts[0] < 1:
        raise PipelineError("sample counts must be positive")
    runs = [
        run_inference(
            distance_model, task_model, graphs, counts[-1], derive_seed(base_seed, r), workers
        )
        for r in range(repeats)
    ]

    rows = []
    for k in counts:
        maes = {how: [] for how in ("mean", "median", "mode")}
        spread = []
        for index in range(len(graphs)):
            prefixes = [run[index].prefix(k) for run in runs]
            for how in maes:
                maes[how].extend(abs(p.aggregate(how) - p.target) for p in prefixes)
            spread.append(np.std([p.mean for p in prefixes]))
        rows.append(
            {
                "k": k,
                "mae_mean": float(np.mean(maes["mean"])),
                "mae_median": float(np.mean(maes["median"])),
                "mae_mode": float(np.mean(maes["mode"])),
                "aggregate_std": float(np.mean(spread)),
            }
        )

    slope = variance_slope([r["k"] for r in rows], [r["aggregate_std"] for r in rows])
    logger.info("sample_count_curve", counts=counts, repeats=repeats, variance_slope=slope)
    return SampleCountReport(rows=rows, variance_slope=slope)


def variance_slope(counts: Sequence[int], spreads: Sequence[float]) -> float:
    """Least-squares slope of log(spread) against log(K) over positive spreads"""
    counts = np.asarray(counts, dtype=np.float64)
    spreads = np.asarray(spreads, dtype=np.float64)
    valid = spreads > 0
    if valid.sum() < 2:
        return float("nan")
    slope, _ = np.polyfit(np.log(counts[valid]), np.log(spreads[valid]), 1)
    return float(slope)


# -- reports ------------------------------------------------------------------

PREDICTION_COLUMNS = [
    "graph_id",
    "target",
    "k",
    "mean",
    "median",
    "mode",
    "std",
    "confidence",
    "confidence_normalized",
]


def prediction_rows(sets: Sequence[PredictionSampleSet]) -> List[Dict[str, float]]:
    normalized = normalize_confidence(sets)
    return [
        {
            "graph_id": s.graph_id,
            "target": s.target,
            "k": s.k,
            "mean": s.mean,
            "median": s.median,
            "mode": s.mode,
            "std": s.std,
            "confidence": s.confidence,
            "confidence_normalized": None if np.isnan(c) else float(c),
        }
        for s, c in zip(sets, normalized)
    ]


def write_inference_reports(
    sets: Sequence[PredictionSampleSet], settings: InferenceSettings, output_dir: Path
) -> Dict[str, Path]:
    """predictions.csv and confidence_curve.csv under ``output_dir``"""
    output_dir = Path(output_dir)
    paths = {
        "predictions": write_csv(
            output_dir / "predictions.csv", PREDICTION_COLUMNS, prediction_rows(sets)
        ),
        "confidence_curve": write_csv(
            output_dir / "confidence_curve.csv",
            CONFIDENCE_COLUMNS,
            confidence_curve(
                sets, settings.confidence_thresholds, settings.ewt_threshold, settings.aggregate
            ),
        ),
    }
    logger.info("inference_reports_written", **{k: str(v) for k, v in paths.items()})
    return paths
