"""
Wall-clock scaling of the third-order mechanisms.

Every mechanism runs with the same dims and head counts. ``layer`` scope times a full
TGT layer (the ``none`` variant being the pairwise-only baseline); ``mechanism`` scope
times the interaction module alone, with EGT attention standing in for ``none``.
Timings are medians over repetitions; each repetition loops the callable enough times
to sit well above timer resolution.
"""
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np
import structlog

from tgt.core.config import BenchSettings, TGTConfig
from tgt.core.exceptions import PipelineError
from tgt.nn import EGTAttention, TGTLayer, build_interaction
from tgt.services.training import write_csv
from tgt.tensor import Tensor, no_grad, ops
from tgt.utils.seeding import BENCH_STREAM, derive_rng

logger = structlog.get_logger(__name__)

RAW_COLUMNS = ["mechanism", "N", "rep", "time_s"]
SUMMARY_COLUMNS = ["mechanism", "N", "reps", "inner", "median_s", "mean_s", "std_s", "exponent"]
MAX_INNER = 1 << 16


@dataclass
class BenchResult:
    mechanism: str
    n: int
    times: List[float]
    inner: int
    exponent: float = float("nan")

    @property
    def reps(self) -> int:
        return len(self.times)

    @property
    def median(self) -> float:
        return float(np.median(self.times))

    @property
    def mean(self) -> float:
        return float(np.mean(self.times))

    @property
    def std(self) -> float:
        return float(np.std(self.times))

    def summary(self) -> Dict[str, float]:
        return {
            "mechanism": self.mechanism,
            "N": self.n,
            "reps": self.reps,
            "inner": self.inner,
            "median_s": self.median,
            "mean_s": self.mean,
            "std_s": self.std,
            "exponent": self.exponent,
        }


def time_callable(
    fn: Callable[[], object], reps: int, warmup: int = 1, min_time: float = 1e-3
) -> tuple:
    """
    Per-call seconds for ``reps`` repetitions. The inner loop count doubles until one
    repetition takes at least ``min_time``.
    """
    for _ in range(warmup):
        fn()
    inner = 1
    while True:
        start = time.perf_counter()
        for _ in range(inner):
            fn()
        elapsed = time.perf_counter() - start
        if elapsed >= min_time or inner >= MAX_INNER:
            break
        inner *= 2

    times = []
    for _ in range(reps):
        start = time.perf_counter()
        for _ in range(inner):
            fn()
        times.append((time.perf_counter() - start) / inner)
    return times, inner


def fit_exponent(ns: Sequence[int], times: Sequence[float]) -> float:
    """log-log least-squares slope over the upper half of the sizes"""
    order = np.argsort(ns)
    ns = np.asarray(ns, dtype=np.float64)[order]
    times = np.asarray(times, dtype=np.float64)[order]
    upper = slice(len(ns) // 2 if len(ns) >= 4 else 0, None)
    if len(ns[upper]) < 2:
        return float("nan")
    slope, _ = np.polyfit(np.log(ns[upper]), np.log(times[upper]), 1)
    return float(slope)


def bench_config(settings: BenchSettings, variant: str) -> TGTConfig:
    return TGTConfig(
        num_layers=1,
        node_dim=settings.node_dim,
        edge_dim=settings.edge_dim,
        num_heads=settings.num_heads,
        triplet_heads=0 if variant == "none" else settings.triplet_heads,
        variant=variant,
        node_ffn_dim=2 * settings.node_dim,
        edge_ffn_dim=2 * settings.edge_dim,
        encoding="none",
    )


def _workload(settings: BenchSettings, variant: str, n: int, seed: int) -> Callable[[], object]:
    config = bench_config(settings, variant)
    rng = derive_rng(seed, BENCH_STREAM, n)
    requires_grad = settings.include_backward
    h = Tensor(rng.standard_normal((n, config.node_dim)), requires_grad=requires_grad)
    e = Tensor(rng.standard_normal((n, n, config.edge_dim)), requires_grad=requires_grad)

    if settings.scope == "layer":
        layer = TGTLayer(config, rng)

        def forward():
            h_out, e_out = layer(h, e)
            return ops.sum(h_out) + ops.sum(e_out)

    elif variant == "none":
        attention = EGTAttention(config.node_dim, config.edge_dim, config.num_heads, rng)

        def forward():
            out = attention(h, e)
            return ops.sum(out.node_update) + ops.sum(out.pair_update)

    else:
        interaction = build_interaction(config, rng)

        def forward():
            return ops.sum(interaction(e))

    if not requires_grad:

        def run():
            with no_grad():
                return forward()

        return run

    def run_with_backward():
        loss = forward()
        loss.backward()
        return loss

    return run_with_backward


def bench_mechanism(
    variant: str, settings: BenchSettings, seed: int = 0
) -> List[BenchResult]:
    """Median time per N for one mechanism, with the fitted scaling exponent"""
    results = []
    for n in settings.n_list:
        times, inner = time_callable(
            _workload(settings, variant, n, seed), settings.reps, settings.warmup, settings.min_time
        )
        results.append(BenchResult(variant, n, times, inner))
        logger.info("bench_point", mechanism=variant, n=n, median_s=results[-1].median, inner=inner)

    exponent = fit_exponent([r.n for r in results], [r.median for r in results])
    for result in results:
        result.exponent = exponent
    return results


def timer_overhead(reps: int = 5, min_time: float = 1e-3) -> float:
    """Per-call seconds of an empty closure under the same harness"""
    times, _ = time_callable(lambda: None, reps, warmup=1, min_time=min_time)
    return float(np.median(times))


@dataclass
class BenchReport:
    results: Dict[str, List[BenchResult]]
    overhead_s: float

    def raw_rows(self) -> List[Dict[str, float]]:
        return [
            {"mechanism": r.mechanism, "N": r.n, "rep": rep, "time_s": t}
            for results in self.results.values()
            for r in results
            for rep, t in enumerate(r.times)
        ]

    def summary_rows(self) -> List[Dict[str, float]]:
        return [r.summary() for results in self.results.values() for r in results]

    def median(self, mechanism: str, n: int) -> float:
        for result in self.results[mechanism]:
            if result.n == n:
                return result.median
        raise PipelineError(f"no measurement of {mechanism} at N={n}")

    @property
    def overhead_ratio(self) -> float:
        smallest = min(r.median for results in self.results.values() for r in results)
        return self.overhead_s / smallest


def run_bench(
    settings: BenchSettings, seed: int = 0, output_dir: Optional[Path] = None
) -> BenchReport:
    if not settings.variants or not settings.n_list:
        raise PipelineError("bench needs at least one variant and one N")
    logger.info(
        "bench_started",
        variants=list(settings.variants),
        n_list=list(settings.n_list),
        scope=settings.scope,
        backward=settings.include_backward,
    )
    results = {variant: bench_mechanism(variant, settings, seed) for variant in settings.variants}
    report = BenchReport(results, timer_overhead(settings.reps, settings.min_time))

    for variant, points in results.items():
        logger.info("bench_result", mechanism=variant, exponent=points[0].exponent)
    if report.overhead_ratio >= 0.01:
        logger.warning("bench_overhead_high", overhead_ratio=report.overhead_ratio)

    if output_dir is not None:
        write_csv(Path(output_dir) / "bench_raw.csv", RAW_COLUMNS, report.raw_rows())
        write_csv(Path(output_dir) / "bench_summary.csv", SUMMARY_COLUMNS, report.summary_rows())
    return report

