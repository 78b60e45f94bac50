"""
Tests for the full network, its execution modes and checkpoints
"""
import numpy as np
import pytest

from tgt.core.exceptions import CheckpointError, PipelineError
from tgt.data import featurize, gen_tsp_instance
from tgt.models import TGT, count_params, load_checkpoint, parameter_digest, save_checkpoint
from tgt.tensor import load_tensors, ops, save_tensors


@pytest.fixture
def model(make_config):
    return TGT(make_config(), np.random.default_rng(0))


@pytest.fixture
def inputs(graph):
    return featurize(graph, distances=graph.target_distances)


def test_layer_groups_share_parameters(make_config):
    model = TGT(make_config(num_layers=4, layer_multiplier=2))
    assert model.layer_groups() == [0, 0, 1, 1]
    assert len(model.groups) == 2


def test_layer_multiplier_halves_layer_parameters(make_config):
    shared = count_params(make_config(num_layers=4, layer_multiplier=2), "layers")
    unshared = count_params(make_config(num_layers=4, layer_multiplier=1), "layers")
    assert shared * 2 == unshared
    assert count_params(make_config(num_layers=4, layer_multiplier=2)) < count_params(
        make_config(num_layers=4)
    )


def test_shared_group_gradient_is_sum_over_its_layers(make_config, inputs):
    shared = TGT(make_config(num_layers=4, layer_multiplier=2), np.random.default_rng(0))
    untied = TGT(make_config(num_layers=4), np.random.default_rng(1))

    def group_name(name: str, layer: int) -> str:
        _, _, rest = name.split(".", 2)
        return f"groups.{layer}.{rest}"

    source = shared.state_dict()
    tied = {}
    for name in untied.state_dict():
        if name.startswith("groups."):
            layer = int(name.split(".")[1])
            tied[name] = source[group_name(name, layer // 2)]
        else:
            tied[name] = source[name]
    untied.load_state_dict(tied)

    weights = np.random.default_rng(2).standard_normal((inputs.n, inputs.n, 16))
    scalars = []
    for network in (shared, untied):
        outputs = network(inputs)
        scalars.append(outputs.graph_scalar.item())
        (ops.sum(outputs.distance_logits * weights) + outputs.graph_scalar).backward()
    assert scalars[0] == pytest.approx(scalars[1], abs=1e-12)

    def grad(parameter):
        return np.zeros_like(parameter.data) if parameter.grad is None else parameter.grad

    untied_parameters = dict(untied.named_parameters())
    for name, parameter in shared.named_parameters():
        if name.startswith("groups."):
            group = int(name.split(".")[1])
            expected = sum(
                grad(untied_parameters[group_name(name, 2 * group + j)]) for j in range(2)
            )
        else:
            expected = grad(untied_parameters[name])
        np.testing.assert_allclose(grad(parameter), expected, rtol=1e-9, atol=1e-12)


def test_layer_free_model_counts_embeddings_and_heads(make_config, inputs):
    config = make_config(num_layers=0)
    model = TGT(config)
    assert model.layer_stack_parameters() == 0
    embeddings = 8 * 16 + 5 * 8 + 34 * 8
    rbf = 8 + 8 + 2 * 64 * 8 + (8 * 8 + 8) + (8 * 8 + 8)
    final_norms = 2 * 16 + 2 * 8
    heads = (8 * 16 + 16) + (16 * 16 + 16) + (16 + 1)
    assert count_params(config) == embeddings + rbf + final_norms + heads
    assert model(inputs).distance_logits.shape == (inputs.n, inputs.n, 16)


@pytest.mark.parametrize("layer_multiplier", [1, 2])
def test_parameter_count_matches_checkpoint(tmp_path, make_config, layer_multiplier):
    config = make_config(num_layers=4, layer_multiplier=layer_multiplier)
    path = save_checkpoint(TGT(config), tmp_path / "model.npz")
    arrays, _ = load_tensors(path)
    assert sum(array.size for array in arrays.values()) == count_params(config)


def test_output_shapes(model, inputs):
    outputs = model(inputs)
    n = inputs.n
    assert outputs.distance_logits.shape == (n, n, 16)
    assert outputs.node_embeddings.shape == (n, 16)
    assert outputs.pair_embeddings.shape == (n, n, 8)
    assert outputs.graph_scalar.shape == ()
    assert outputs.edge_logits is None


def test_distance_logits_are_symmetric(model, inputs):
    logits = model(inputs).distance_logits.data
    assert np.array_equal(logits, logits.transpose(1, 0, 2))


def test_deterministic_eval_is_repeatable(model, inputs):
    first = model(inputs, "deterministic_eval").graph_scalar.item()
    second = model(inputs, "deterministic_eval").graph_scalar.item()
    assert first == second


def test_stochastic_eval_depends_only_on_seed(model, inputs):
    a = model(inputs, "stochastic_eval", np.random.default_rng(5)).pair_embeddings.data
    b = model(inputs, "stochastic_eval", np.random.default_rng(5)).pair_embeddings.data
    c = model(inputs, "stochastic_eval", np.random.default_rng(6)).pair_embeddings.data
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_mode_errors(model, inputs):
    with pytest.raises(PipelineError):
        model(inputs, "stochastic_eval")
    with pytest.raises(PipelineError):
        model(inputs, "inference", np.random.default_rng(0))


@pytest.mark.parametrize("variant", ["none", "triangular", "triplet_att", "axial"])
def test_model_is_permutation_equivariant(make_config, inputs, rng, variant):
    model = TGT(make_config(variant=variant), rng)
    perm = rng.permutation(inputs.n)
    base = model(inputs)
    permuted = model(inputs.permuted(perm))
    pair = np.ix_(perm, perm)
    assert abs(base.graph_scalar.item() - permuted.graph_scalar.item()) <= 1e-10
    assert np.max(np.abs(permuted.distance_logits.data - base.distance_logits.data[pair])) <= 1e-10


def test_edge_task_head(make_config):
    graph = gen_tsp_instance(8, 3, seed=0).graph
    config = make_config(
        task="edge",
        encoding="none",
        max_hops=16,
        num_node_types=1,
        num_edge_types=1,
        node_feature_dim=2,
    )
    outputs = TGT(config)(featurize(graph))
    logits = outputs.edge_logits.data
    assert logits.shape == (8, 8)
    assert np.array_equal(logits, logits.T)
    assert outputs.graph_scalar is None


def test_missing_node_features(make_config, inputs):
    model = TGT(make_config(node_feature_dim=3))
    with pytest.raises(PipelineError):
        model(inputs)


def test_target_scaling(model):
    model.set_target_stats(3.0, 2.0)
    assert model.standardize(5.0) == 1.0
    assert model.destandardize(1.0) == 5.0
    model.set_target_stats(1.0, 0.0)
    assert model.target_std == 1.0


def test_checkpoint_round_trip(tmp_path, model, inputs):
    model.set_target_stats(3.0, 2.0)
    path = save_checkpoint(model, tmp_path / "model.npz", {"stage": "single_stage"})
    loaded, metadata = load_checkpoint(path)
    assert metadata["stage"] == "single_stage"
    assert loaded.config == model.config
    assert loaded.target_mean == 3.0 and loaded.target_std == 2.0
    assert parameter_digest(loaded) == parameter_digest(model)
    assert model(inputs).graph_scalar.item() == loaded(inputs).graph_scalar.item()


def test_digest_tracks_parameters(model):
    before = parameter_digest(model)
    assert parameter_digest(model) == before
    model.parameters()[0].data[...] += 1.0
    assert parameter_digest(model) != before


def test_load_state_errors(model):
    state = model.state_dict()
    name = next(iter(state))
    missing = {k: v for k, v in state.items() if k != name}
    with pytest.raises(CheckpointError):
        model.load_state_dict(missing)
    wrong_shape = dict(state, **{name: np.zeros((1, 1, 1))})
    with pytest.raises(CheckpointError):
        model.load_state_dict(wrong_shape)


def test_checkpoint_without_config(tmp_path, model):
    path = save_tensors(tmp_path / "bare.npz", model.state_dict(), {})
    with pytest.raises(CheckpointError):
        load_checkpoint(path)
