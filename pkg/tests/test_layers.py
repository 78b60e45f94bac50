"""
Tests for pair attention, the third-order mechanisms, dropout and the layer block
"""
import numpy as np
import pytest

from tgt.core.config import DropoutSpec
from tgt.nn import (
    EGTAttention,
    FFN,
    LayerNorm,
    TGTLayer,
    TriangularUpdate,
    TripletAggregation,
    TripletAttention,
    build_interaction,
    path_drop,
    pre_norm_residual,
    source_dropout_mask,
    triplet_dropout,
)
from tgt.nn.dropout import DropoutContext
from tgt.services import oracles
from tgt.services.verification import saturate_gates, share_parameters, zero_linear
from tgt.tensor import Tensor, grad_check, ops


def sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


# -- pair attention -----------------------------------------------------------


def test_single_node_attention(rng):
    attention = EGTAttention(4, 2, 2, rng)
    h = Tensor(rng.standard_normal((1, 4)))
    e = Tensor(rng.standard_normal((1, 1, 2)))
    out = attention(h, e)

    gates = sigmoid(attention.gate(e).data[0, 0])
    np.testing.assert_allclose(out.weights.data[:, 0, 0], gates)
    np.testing.assert_allclose(out.centrality.data[:, 0], np.log1p(gates))

    v = attention.value(h).data.reshape(2, 2)
    o = (gates * np.log1p(gates))[:, None] * v
    expected = attention.node_out(Tensor(o.reshape(1, 4))).data
    np.testing.assert_allclose(out.node_update.data, expected)


def test_neutral_gates_give_log_scaled_centrality(rng):
    attention = EGTAttention(8, 4, 2, rng)
    zero_linear(attention.gate)
    n = 5
    out = attention(Tensor(rng.standard_normal((n, 8))), Tensor(rng.standard_normal((n, n, 4))))
    np.testing.assert_allclose(out.centrality.data, np.full((2, n), np.log(1.5 * n)))


def test_source_mask_zeroes_columns(rng):
    attention = EGTAttention(8, 4, 2, rng)
    mask = np.array([False, True, False, False])
    out = attention(
        Tensor(rng.standard_normal((4, 8))), Tensor(rng.standard_normal((4, 4, 4))), mask
    )
    assert np.all(out.weights.data[:, :, 1] == 0.0)


def test_attention_matches_loop_oracle(rng):
    attention = EGTAttention(8, 4, 2, rng)
    h = rng.standard_normal((5, 8))
    e = rng.standard_normal((5, 5, 4))
    mask = np.array([False, False, True, False, True])
    out = attention(Tensor(h), Tensor(e), mask)
    node, pair, centrality = oracles.egt_attention_loop(attention, h, e, mask)
    assert np.max(np.abs(out.node_update.data - node)) <= 1e-12
    assert np.max(np.abs(out.pair_update.data - pair)) <= 1e-12
    assert np.max(np.abs(out.centrality.data - centrality)) <= 1e-12


# -- third-order mechanisms ---------------------------------------------------


@pytest.mark.parametrize(
    "module_factory, oracle",
    [
        (lambda rng: TripletAttention(8, 2, rng), oracles.triplet_attention_loop),
        (lambda rng: TripletAttention(8, 2, rng, gated=False), oracles.triplet_attention_loop),
        (
            lambda rng: TripletAttention(8, 2, rng, use_bias=False, gated=False),
            oracles.triplet_attention_loop,
        ),
        (lambda rng: TripletAggregation(8, 2, rng), oracles.triplet_aggregation_loop),
        (lambda rng: TripletAggregation(8, 2, rng, gated=False), oracles.triplet_aggregation_loop),
        (lambda rng: TriangularUpdate(8, 3, rng), oracles.triangular_update_loop),
    ],
)
@pytest.mark.parametrize("n", [1, 2, 5])
def test_mechanisms_match_loop_oracles(rng, module_factory, oracle, n):
    module = module_factory(rng)
    e = rng.standard_normal((n, n, 8))
    assert np.max(np.abs(module(Tensor(e)).data - oracle(module, e))) <= 1e-12


def test_single_node_triplet_attention(rng):
    module = TripletAttention(8, 2, rng)
    e = Tensor(rng.standard_normal((1, 1, 8)))
    proj = module.inward
    v = proj.value(e).data.reshape(1, 1, 2, 4)
    gates = sigmoid(proj.gate(e).data)
    expected = (v * gates[..., None]).reshape(1, 1, 8)
    np.testing.assert_allclose(module.direction(e, "inward", None).data, expected)


def test_single_node_axial_attention_returns_values(rng):
    module = TripletAttention(8, 2, rng, use_bias=False, gated=False)
    e = Tensor(rng.standard_normal((1, 1, 8)))
    np.testing.assert_allclose(
        module.direction(e, "outward", None).data, module.outward.value(e).data
    )


def test_equal_biases_aggregate_uniformly(rng):
    module = TripletAggregation(8, 2, rng, gated=False)
    module.inward.bias.weight.data[...] = 0.0
    module.inward.bias.bias.data[...] = 0.7
    weights = module.weights(Tensor(rng.standard_normal((4, 4, 8))), "inward").data
    np.testing.assert_allclose(weights, np.full((2, 4, 4), 0.25))


def test_gated_weights_sum_to_at_most_one(rng):
    e = Tensor(rng.standard_normal((5, 5, 8)))
    attention = TripletAttention(8, 2, rng)
    aggregation = TripletAggregation(8, 2, rng)
    for weights in (attention.weights(e, "inward").data, aggregation.weights(e, "outward").data):
        assert np.all(weights >= 0.0)
        assert np.all(weights.sum(axis=-1) <= 1.0 + 1e-12)

    saturate_gates(attention)
    sums = attention.weights(e, "outward").data.sum(axis=-1)
    np.testing.assert_allclose(sums, 1.0, atol=1e-6)


def test_saturated_gates_reduce_to_ungated(rng):
    e = Tensor(rng.standard_normal((6, 6, 8)))
    gated = TripletAttention(8, 2, rng)
    ungated = TripletAttention(8, 2, rng, gated=False)
    share_parameters(gated, ungated)
    saturate_gates(gated)
    assert np.max(np.abs(gated(e).data - ungated(e).data)) <= 1e-10


def test_zero_keys_reduce_attention_to_aggregation(rng):
    e = Tensor(rng.standard_normal((6, 6, 8)))
    attention = TripletAttention(8, 2, rng)
    aggregation = TripletAggregation(8, 2, rng)
    share_parameters(attention, aggregation)
    for direction in (attention.inward, attention.outward):
        zero_linear(direction.key)
    assert np.max(np.abs(attention(e).data - aggregation(e).data)) <= 1e-10


def test_triangular_update_of_constant_projections(rng):
    module = TriangularUpdate(4, 3, rng)
    for layer in (module.left_out, module.right_out, module.left_in, module.right_in):
        layer.weight.data[...] = 0.0
        layer.bias.data[...] = 1.0
    module.out.weight.data[...] = 1.0
    module.out.bias.data[...] = 0.0
    n = 5
    out = module(Tensor(rng.standard_normal((n, n, 4)))).data
    np.testing.assert_allclose(out, np.full((n, n, 4), 2 * 3 * n))


def test_interaction_factory(make_config, rng):
    assert build_interaction(make_config(variant="none"), rng) is None
    assert isinstance(build_interaction(make_config(variant="triangular"), rng), TriangularUpdate)
    agg = build_interaction(make_config(variant="ungated_agg"), rng)
    assert isinstance(agg, TripletAggregation) and not agg.gated
    axial = build_interaction(make_config(variant="axial"), rng)
    assert isinstance(axial, TripletAttention) and not axial.use_bias and not axial.gated


def test_empty_graph(rng):
    for module in (TripletAttention(8, 2, rng), TripletAggregation(8, 2, rng)):
        assert module(Tensor(np.zeros((0, 0, 8)))).shape == (0, 0, 8)


# -- dropout ------------------------------------------------------------------


def test_source_dropout_rate(rng):
    assert not source_dropout_mask(10, 0.0, rng).any()
    fraction = np.mean([source_dropout_mask(1000, 0.3, rng).mean() for _ in range(5)])
    assert 0.25 <= fraction <= 0.35


def test_source_dropout_keeps_a_column(rng):
    for _ in range(200):
        assert not source_dropout_mask(1, 0.9, rng).all()
        assert not source_dropout_mask(3, 0.9, rng).all()


def test_triplet_dropout_preserves_expectation(rng):
    weights = Tensor(np.ones((100, 100)))
    assert triplet_dropout(weights, 0.0, rng) is weights
    dropped = triplet_dropout(weights, 0.3, rng).data
    assert set(np.unique(dropped).round(12)) <= {0.0, round(1 / 0.7, 12)}
    assert abs(dropped.mean() - 1.0) <= 0.03


def test_path_drop_is_all_or_nothing(rng):
    update = Tensor(np.ones(4))
    assert path_drop(update, 0.0, rng) is update
    for _ in range(20):
        values = np.unique(path_drop(update, 0.5, rng).data)
        assert len(values) == 1 and values[0] in (0.0, 2.0)


# -- layer --------------------------------------------------------------------


def test_pre_norm_residual_gradients(rng):
    norm = LayerNorm(6)
    ffn = FFN(6, 12, rng)

    def loss(x):
        return ops.sum(pre_norm_residual(x, norm, ffn) * 0.5)

    assert grad_check(loss, [rng.standard_normal((3, 6))]) < 1e-6


@pytest.mark.parametrize(
    "variant",
    ["none", "axial", "triangular", "ungated_agg", "triplet_agg", "ungated_att", "triplet_att"],
)
def test_layer_is_permutation_equivariant(make_config, rng, variant):
    layer = TGTLayer(make_config(variant=variant), rng)
    n = 6
    h = rng.standard_normal((n, 16))
    e = rng.standard_normal((n, n, 8))
    perm = rng.permutation(n)
    h_out, e_out = layer(Tensor(h), Tensor(e))
    h_perm, e_perm = layer(Tensor(h[perm]), Tensor(e[np.ix_(perm, perm)]))
    assert np.max(np.abs(h_perm.data - h_out.data[perm])) <= 1e-10
    assert np.max(np.abs(e_perm.data - e_out.data[np.ix_(perm, perm)])) <= 1e-10


def test_layer_dropout_is_reproducible(make_config, rng):
    config = make_config()
    layer = TGTLayer(config, rng)
    h = Tensor(rng.standard_normal((4, 16)))
    e = Tensor(rng.standard_normal((4, 4, 8)))
    first = layer(h, e, DropoutContext(config.dropout, np.random.default_rng(9)))
    second = layer(h, e, DropoutContext(config.dropout, np.random.default_rng(9)))
    assert np.array_equal(first[0].data, second[0].data)
    assert np.array_equal(first[1].data, second[1].data)


def test_attention_block_drops_node_and_pair_updates_together(make_config, rng):
    config = make_config(
        variant="none", dropout=DropoutSpec(source_p=0.0, path_p=0.5, activation_p=0.0)
    )
    layer = TGTLayer(config, rng)
    zero_linear(layer.node_ffn.fc2)
    zero_linear(layer.pair_ffn.fc2)
    h = Tensor(rng.standard_normal((4, 16)))
    e = Tensor(rng.standard_normal((4, 4, 8)))

    outcomes = []
    for seed in range(40):
        h_out, e_out = layer(h, e, DropoutContext(config.dropout, np.random.default_rng(seed)))
        node_dropped = np.array_equal(h_out.data, h.data)
        pair_dropped = np.array_equal(e_out.data, e.data)
        assert node_dropped == pair_dropped
        outcomes.append(node_dropped)
    assert any(outcomes) and not all(outcomes)


def test_zero_rate_context_matches_deterministic(make_config, rng):
    config = make_config(dropout=DropoutSpec(source_p=0.0, path_p=0.0, activation_p=0.0))
    layer = TGTLayer(config, rng)
    h = Tensor(rng.standard_normal((4, 16)))
    e = Tensor(rng.standard_normal((4, 4, 8)))
    dropped = layer(h, e, DropoutContext(config.dropout, rng))
    plain = layer(h, e)
    assert np.array_equal(dropped[1].data, plain[1].data)
