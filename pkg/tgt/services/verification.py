"""
Invariant and oracle suite behind ``tgt verify``.

Every check runs in 64-bit precision from a seed derived from the run seed and reports
a measured value against its tolerance. The suite never raises on a failed check; the
caller decides what a failure means.
"""
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterator, List, Optional

import numpy as np
import structlog

from tgt.core.config import BinSpec, DropoutSpec, NoiseConfig, TGTConfig, VerifySettings
from tgt.data.generators import gen_geometry_instance
from tgt.data.graph import compute_hops, featurize
from tgt.data.noising import smooth_noise
from tgt.data.tsp import held_karp
from tgt.models import TGT
from tgt.nn import (
    EGTAttention,
    TGTLayer,
    TriangularUpdate,
    TripletAggregation,
    TripletAttention,
    bin_center,
    bin_distance,
    source_dropout_mask,
)
from tgt.nn.module import Module
from tgt.services import oracles
from tgt.services.training import distance_loss
from tgt.tensor import Tensor, default_dtype, grad_check, no_grad, ops
from tgt.utils.seeding import VERIFY_STREAM, derive_rng

logger = structlog.get_logger(__name__)

VARIANTS = (
    "none",
    "axial",
    "triangular",
    "triplet_agg",
    "triplet_att",
    "ungated_agg",
    "ungated_att",
)
GRADCHECK_TOLERANCE = 1e-4
ORACLE_TOLERANCE = 1e-12
REDUCTION_TOLERANCE = 1e-10
SATURATED_GATE = 50.0


@dataclass
class CheckResult:
    name: str
    value: float
    tolerance: float
    passed: bool


@dataclass
class VerificationReport:
    checks: List[CheckResult] = field(default_factory=list)

    def record(
        self, name: str, value: float, tolerance: float, passed: Optional[bool] = None
    ) -> None:
        if passed is None:
            passed = bool(np.isfinite(value) and value <= tolerance)
        self.checks.append(CheckResult(name, float(value), tolerance, passed))
        if not passed:
            logger.warning("check_failed", check=name, value=float(value), tolerance=tolerance)

    @property
    def count(self) -> int:
        return len(self.checks)

    @property
    def failures(self) -> List[CheckResult]:
        return [c for c in self.checks if not c.passed]

    @property
    def ok(self) -> bool:
        return self.count > 0 and not self.failures

    def summary(self) -> Dict[str, int]:
        return {"checks": self.count, "failures": len(self.failures)}


def _max_diff(a, b) -> float:
    a = a.data if isinstance(a, Tensor) else np.asarray(a)
    b = b.data if isinstance(b, Tensor) else np.asarray(b)
    if a.shape != b.shape:
        return float("inf")
    return float(np.max(np.abs(a - b))) if a.size else 0.0


def share_parameters(source: Module, target: Module) -> None:
    """Copy every parameter of ``target`` from the same-named parameter of ``source``"""
    state = source.state_dict()
    target.load_state_dict({name: state[name] for name in target.state_dict()})


def saturate_gates(module: Module) -> None:
    """Drive every gate of a triplet module to sigmoid == 1"""
    for direction in (module.inward, module.outward):
        direction.gate.weight.data[...] = 0.0
        direction.gate.bias.data[...] = SATURATED_GATE


def zero_linear(layer) -> None:
    layer.weight.data[...] = 0.0
    if layer.bias is not None:
        layer.bias.data[...] = 0.0


# -- gradients ----------------------------------------------------------------


def gradcheck_config(variant: str) -> TGTConfig:
    return TGTConfig(
        num_layers=2,
        node_dim=16,
        edge_dim=8,
        num_heads=2,
        triplet_heads=0 if variant == "none" else 2,
        variant=variant,
        node_ffn_dim=16,
        edge_ffn_dim=8,
        rbf_kernels=4,
        bins=BinSpec(num_bins=8, d_max=8.0),
        dropout=DropoutSpec(source_p=0.0, path_p=0.0, activation_p=0.0),
    )


def check_model_gradients(
    report: VerificationReport, settings: VerifySettings, rng: np.random.Generator
) -> None:
    graph = gen_geometry_instance(5, rng)
    for variant in VARIANTS:
        model = TGT(gradcheck_config(variant), rng)
        inputs = featurize(graph, distances=graph.target_distances, max_hops=model.config.max_hops)

        def loss(*_):
            outputs = model(inputs, "deterministic_eval")
            scalar = outputs.graph_scalar
            distance = distance_loss(outputs.distance_logits, graph.target_distances, model)
            return distance + scalar * scalar

        error = grad_check(loss, model.parameters(), max_coords=settings.gradcheck_coords, rng=rng)
        report.record(f"gradcheck/{variant}", error, GRADCHECK_TOLERANCE)


def check_op_gradients(report: VerificationReport, rng: np.random.Generator) -> None:
    x = rng.standard_normal(6)
    report.record(
        "gradcheck/sigmoid", grad_check(lambda t: ops.sum(ops.sigmoid(t)), x), 1e-7
    )
    logits = rng.standard_normal((4, 5))
    targets = rng.integers(0, 5, size=4)
    report.record(
        "gradcheck/softmax_cross_entropy",
        grad_check(lambda t: ops.cross_entropy(t, targets), logits),
        1e-6,
    )


# -- oracles ------------------------------------------------------------------


def _instances(settings: VerifySettings, rng: np.random.Generator) -> Iterator[np.ndarray]:
    for _ in range(settings.oracle_instances):
        n = int(rng.integers(1, settings.max_nodes + 1))
        yield rng.standard_normal((n, n, 4))


def check_oracles(
    report: VerificationReport, settings: VerifySettings, rng: np.random.Generator
) -> None:
    mechanisms: Dict[str, Callable[[], tuple]] = {
        "triplet_att": lambda: (TripletAttention(4, 2, rng), oracles.triplet_attention_loop),
        "ungated_att": lambda: (
            TripletAttention(4, 2, rng, gated=False),
            oracles.triplet_attention_loop,
        ),
        "axial": lambda: (
            TripletAttention(4, 2, rng, use_bias=False, gated=False),
            oracles.triplet_attention_loop,
        ),
        "triplet_agg": lambda: (TripletAggregation(4, 2, rng), oracles.triplet_aggregation_loop),
        "ungated_agg": lambda: (
            TripletAggregation(4, 2, rng, gated=False),
            oracles.triplet_aggregation_loop,
        ),
        "triangular": lambda: (TriangularUpdate(4, 8, rng), oracles.triangular_update_loop),
    }
    for name, build in mechanisms.items():
        worst = 0.0
        for e in _instances(settings, rng):
            module, oracle = build()
            with no_grad():
                vectorized = module(Tensor(e))
            worst = max(worst, _max_diff(vectorized, oracle(module, e)))
        report.record(f"oracle/{name}", worst, ORACLE_TOLERANCE)

    worst = 0.0
    for e in _instances(settings, rng):
        n = e.shape[0]
        module = EGTAttention(8, 4, 2, rng)
        h = rng.standard_normal((n, 8))
        mask = source_dropout_mask(n, 0.3, rng)
        with no_grad():
            out = module(Tensor(h), Tensor(e), mask)
        node, pair, centrality = oracles.egt_attention_loop(module, h, e, mask)
        worst = max(
            worst,
            _max_diff(out.node_update, node),
            _max_diff(out.pair_update, pair),
            _max_diff(out.centrality, centrality),
        )
    report.record("oracle/egt_attention", worst, ORACLE_TOLERANCE)


# -- reductions ---------------------------------------------------------------


def check_reductions(report: VerificationReport, rng: np.random.Generator) -> None:
    e = Tensor(rng.standard_normal((6, 6, 8)))

    attention = TripletAttention(8, 2, rng)
    aggregation = TripletAggregation(8, 2, rng)
    for direction in (attention.inward, attention.outward):
        zero_linear(direction.query)
        zero_linear(direction.key)
    share_parameters(attention, aggregation)
    with no_grad():
        report.record(
            "reduction/zero_query_key_is_aggregation",
            _max_diff(attention(e), aggregation(e)),
            REDUCTION_TOLERANCE,
        )

    attention = TripletAttention(8, 2, rng)
    axial = TripletAttention(8, 2, rng, use_bias=False, gated=False)
    for direction in (attention.inward, attention.outward):
        zero_linear(direction.bias)
    saturate_gates(attention)
    share_parameters(attention, axial)
    with no_grad():
        report.record(
            "reduction/no_bias_saturated_is_axial",
            _max_diff(attention(e), axial(e)),
            REDUCTION_TOLERANCE,
        )

    pairs = [
        (TripletAttention(8, 2, rng), TripletAttention(8, 2, rng, gated=False), "att"),
        (TripletAggregation(8, 2, rng), TripletAggregation(8, 2, rng, gated=False), "agg"),
    ]
    for gated, ungated, name in pairs:
        saturate_gates(gated)
        share_parameters(gated, ungated)
        with no_grad():
            report.record(
                f"reduction/saturated_is_ungated_{name}",
                _max_diff(gated(e), ungated(e)),
                REDUCTION_TOLERANCE,
            )


def check_weight_sums(report: VerificationReport, rng: np.random.Generator) -> None:
    e = Tensor(rng.standard_normal((5, 5, 8)))
    attention = TripletAttention(8, 2, rng)
    aggregation = TripletAggregation(8, 2, rng)
    with no_grad():
        for name, module in (("att", attention), ("agg", aggregation)):
            for direction in ("inward", "outward"):
                weights = module.weights(e, direction).data
                total = weights.sum(axis=-1)
                bounded = bool(np.all(weights >= 0) and np.all(total <= 1.0 + 1e-12))
                report.record(f"weights/{name}_{direction}_bounded", 0.0, 0.0, bounded)

        for module in (attention, aggregation):
            for direction in (module.inward, module.outward):
                direction.gate.weight.data[...] = 0.0
                direction.gate.bias.data[...] = 20.0
        for name, module in (("att", attention), ("agg", aggregation)):
            for direction in ("inward", "outward"):
                total = module.weights(e, direction).data.sum(axis=-1)
                report.record(
                    f"weights/{name}_{direction}_saturated_sum", np.max(np.abs(total - 1.0)), 1e-6
                )


def check_equivariance(report: VerificationReport, rng: np.random.Generator) -> None:
    for variant in ("triangular", "triplet_agg", "triplet_att"):
        config = gradcheck_config(variant).model_copy(update={"num_layers": 1})
        layer = TGTLayer(config, rng)
        n = 6
        h = rng.standard_normal((n, config.node_dim))
        e = rng.standard_normal((n, n, config.edge_dim))
        perm = rng.permutation(n)
        with no_grad():
            h_out, e_out = layer(Tensor(h), Tensor(e))
            hp_out, ep_out = layer(Tensor(h[perm]), Tensor(e[np.ix_(perm, perm)]))
        error = max(
            _max_diff(hp_out, h_out.data[perm]),
            _max_diff(ep_out, e_out.data[np.ix_(perm, perm)]),
        )
        report.record(f"equivariance/{variant}", error, REDUCTION_TOLERANCE)


# -- data ---------------------------------------------------------------------


def check_noise_limits(report: VerificationReport, rng: np.random.Generator) -> None:
    sigma = 0.2
    coords = rng.uniform(0.0, 4.0, size=(5, 3))
    base = np.linalg.norm(coords[:, None] - coords[None], axis=-1)

    noised = smooth_noise(coords, NoiseConfig(sigma=sigma, nu=1e9), rng)
    moved = np.linalg.norm(noised[:, None] - noised[None], axis=-1)
    report.record("noise/rigid_limit", np.max(np.abs(moved - base)), 1e-6 * sigma)

    local = NoiseConfig(sigma=sigma, nu=1e-9)
    small = coords[:4]
    draws = np.stack([(smooth_noise(small, local, rng) - small).ravel() for _ in range(20000)])
    covariance = np.cov(draws, rowvar=False)
    deviation = np.max(np.abs(covariance - sigma**2 * np.eye(draws.shape[1])))
    report.record("noise/independent_limit", deviation / sigma**2, 0.05)

    shift = rng.standard_normal(3)
    config = NoiseConfig(sigma=sigma, nu=1.0)
    seed = int(rng.integers(2**31))
    plain = smooth_noise(coords, config, np.random.default_rng(seed)) - coords
    shifted = smooth_noise(coords + shift, config, np.random.default_rng(seed)) - (coords + shift)
    report.record("noise/translation", _max_diff(plain, shifted), 1e-12)


def check_binning(report: VerificationReport, rng: np.random.Generator) -> None:
    spec = BinSpec()
    d = np.sort(rng.uniform(0.0, spec.d_max, size=100_000))
    bins = bin_distance(d, spec)
    report.record("binning/monotone", 0.0, 0.0, bool(np.all(np.diff(bins) >= 0)))
    report.record(
        "binning/round_trip",
        np.max(np.abs(bin_center(bins, spec) - d)),
        spec.width / 2 + 1e-12,
    )
    clipped = bin_distance(np.array([spec.d_max, spec.d_max * 3]), spec)
    report.record("binning/clip", 0.0, 0.0, bool(np.all(clipped == spec.num_bins - 1)))


def check_softmax(report: VerificationReport, rng: np.random.Generator) -> None:
    probs = ops.softmax(Tensor(rng.standard_normal((50, 7)) * 10.0), axis=-1).data
    report.record("softmax/normalized", np.max(np.abs(probs.sum(axis=-1) - 1.0)), 1e-12)
    report.record("softmax/nonnegative", 0.0, 0.0, bool(np.all(probs >= 0)))


def check_graph_oracles(
    report: VerificationReport, settings: VerifySettings, rng: np.random.Generator
) -> None:
    mismatches = 0
    for _ in range(settings.oracle_instances):
        n = int(rng.integers(1, settings.max_nodes + 1))
        pairs = [(i, j) for i in range(n) for j in range(i + 1, n) if rng.random() < 0.3]
        hops = compute_hops(pairs, n, max_hops=4)
        mismatches += int(not np.array_equal(hops, oracles.floyd_warshall_hops(pairs, n, 4)))
    report.record("hops/floyd_warshall", mismatches, 0)

    worst = 0.0
    for m in range(3, 9):
        points = rng.uniform(size=(m, 2))
        distances = np.linalg.norm(points[:, None] - points[None], axis=-1)
        length, _ = held_karp(distances)
        worst = max(worst, abs(length - oracles.brute_force_tour_length(distances)))
    report.record("tsp/held_karp", worst, 1e-9)


# -- suite --------------------------------------------------------------------


def run_verification(settings: VerifySettings, seed: int = 0) -> VerificationReport:
    report = VerificationReport()
    with default_dtype("float64"):
        check_op_gradients(report, derive_rng(seed, VERIFY_STREAM, 0))
        check_model_gradients(report, settings, derive_rng(seed, VERIFY_STREAM, 1))
        check_oracles(report, settings, derive_rng(seed, VERIFY_STREAM, 2))
        check_reductions(report, derive_rng(seed, VERIFY_STREAM, 3))
        check_weight_sums(report, derive_rng(seed, VERIFY_STREAM, 4))
        check_equivariance(report, derive_rng(seed, VERIFY_STREAM, 5))
        check_noise_limits(report, derive_rng(seed, VERIFY_STREAM, 6))
        check_binning(report, derive_rng(seed, VERIFY_STREAM, 7))
        check_softmax(report, derive_rng(seed, VERIFY_STREAM, 8))
        check_graph_oracles(report, settings, derive_rng(seed, VERIFY_STREAM, 9))
    logger.info("verification_done", **report.summary())
    return report
