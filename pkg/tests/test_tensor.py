"""
Tests for the autodiff tensor core
"""
import threading

import numpy as np
import pytest

from tgt.core.exceptions import AutodiffError, CheckpointError, GradCheckError, ShapeError
from tgt.tensor import (
    Tensor,
    default_dtype,
    grad_check,
    is_grad_enabled,
    load_tensors,
    no_grad,
    ops,
    save_tensors,
)


def test_softmax_of_equal_logits_is_uniform():
    out = ops.softmax(Tensor([0.0, 0.0, 0.0]))
    np.testing.assert_allclose(out.data, [1 / 3, 1 / 3, 1 / 3])


def test_softmax_rows_sum_to_one(rng):
    probs = ops.softmax(Tensor(rng.standard_normal((20, 9)) * 30.0), axis=-1).data
    assert np.all(probs >= 0)
    assert np.max(np.abs(probs.sum(axis=-1) - 1.0)) <= 1e-12


def test_layer_norm_of_constant_rows_is_zero():
    out = ops.layer_norm(Tensor(np.full((2, 4), 3.0)))
    assert np.array_equal(out.data, np.zeros((2, 4)))


def test_matmul_with_identity(rng):
    a = rng.standard_normal((3, 3))
    assert np.array_equal(ops.matmul(Tensor(np.eye(3)), Tensor(a)).data, a)


def test_gelu_at_zero():
    assert ops.gelu(Tensor([0.0])).data[0] == 0.0


def test_backward_of_sum_of_squares():
    x = Tensor([1.0, 2.0], requires_grad=True)
    ops.sum(x * x).backward()
    np.testing.assert_allclose(x.grad, [2.0, 4.0])


def test_gradients_accumulate_over_uses():
    x = Tensor(3.0, requires_grad=True)
    (x + x).backward()
    assert x.grad == pytest.approx(2.0)


def test_backward_needs_a_scalar():
    x = Tensor(np.ones(3), requires_grad=True)
    with pytest.raises(AutodiffError):
        (x * 2.0).backward()


def test_shape_error_names_operands():
    with pytest.raises(ShapeError) as excinfo:
        ops.add(Tensor(np.ones((2, 3))), Tensor(np.ones(4)))
    assert "(2, 3)" in str(excinfo.value)
    assert "(4,)" in str(excinfo.value)
    assert excinfo.value.exit_code == 3


def test_masked_fill_blocks_gradient():
    x = Tensor(np.arange(4.0), requires_grad=True)
    mask = np.array([False, True, False, True])
    ops.sum(ops.softmax(ops.masked_fill(x, mask))).backward()
    assert np.all(x.grad[mask] == 0.0)


def test_masked_columns_get_zero_probability():
    out = ops.softmax(ops.masked_fill(Tensor(np.zeros((2, 3))), np.array([False, True, False])))
    np.testing.assert_allclose(out.data, [[0.5, 0.0, 0.5], [0.5, 0.0, 0.5]])


def test_embedding_repeated_rows_accumulate():
    table = Tensor(np.ones((3, 2)), requires_grad=True)
    ops.sum(ops.embedding(table, np.array([0, 0, 2]))).backward()
    np.testing.assert_allclose(table.grad, [[2.0, 2.0], [0.0, 0.0], [1.0, 1.0]])


def test_grad_check_sigmoid(rng):
    assert grad_check(lambda x: ops.sum(ops.sigmoid(x)), rng.standard_normal(5)) < 1e-7


def test_grad_check_softmax_cross_entropy(rng):
    targets = rng.integers(0, 6, size=4)
    error = grad_check(lambda x: ops.cross_entropy(x, targets), rng.standard_normal((4, 6)))
    assert error < 1e-6


def test_grad_check_of_linear_function(rng):
    assert grad_check(lambda x: ops.sum(x), rng.standard_normal(7)) < 1e-9


def test_grad_check_of_composite(rng):
    targets = np.array([2, 0, 1])
    rows = np.array([0, 2, 1])

    def composite(x, w, table):
        h = ops.layer_norm(ops.matmul(x, w))
        e = ops.embedding(table, rows)
        z = ops.concat([ops.gelu(h), ops.sigmoid(e)], axis=-1)
        logits = ops.einsum("ik,jk->ij", z, z)
        return ops.cross_entropy(logits, targets) + ops.mean(ops.exp(h * 0.1))

    point = [
        rng.standard_normal((3, 4)),
        rng.standard_normal((4, 5)),
        rng.standard_normal((4, 5)),
    ]
    assert grad_check(composite, point) < 1e-6


def test_grad_check_rejects_nan():
    with pytest.raises(GradCheckError):
        grad_check(lambda x: ops.sum(ops.log(x)), np.array([-1.0]))


def test_grad_check_requires_float64():
    with default_dtype("float32"):
        x = Tensor(np.ones(3))
    with pytest.raises(GradCheckError):
        grad_check(lambda t: ops.sum(t), [x])


def test_no_grad_is_thread_local():
    seen = {}

    def worker():
        seen["enabled"] = is_grad_enabled()

    with no_grad():
        x = Tensor(np.ones(2), requires_grad=True)
        assert not (x * 2.0).requires_grad
        thread = threading.Thread(target=worker)
        thread.start()
        thread.join()
    assert seen["enabled"] is True
    assert is_grad_enabled()


def test_precision_is_shared_with_worker_threads():
    seen = {}

    def worker():
        seen["dtype"] = Tensor(np.ones(2)).dtype

    with default_dtype("float32"):
        thread = threading.Thread(target=worker)
        thread.start()
        thread.join()
    assert seen["dtype"] == np.float32
    assert Tensor(np.ones(2)).dtype == np.float64


def test_float32_precision():
    with default_dtype("float32"):
        assert Tensor([1.0]).dtype == np.float32
    assert Tensor([1.0]).dtype == np.float64


def test_snapshot_round_trip_is_bitwise(tmp_path, rng):
    arrays = {"w": rng.standard_normal((3, 2)), "b": rng.standard_normal(2).astype(np.float32)}
    path = save_tensors(tmp_path / "snap.npz", arrays, {"note": "x", "step": 3})
    loaded, metadata = load_tensors(path)
    assert metadata == {"note": "x", "step": 3}
    for name, array in arrays.items():
        assert loaded[name].dtype == array.dtype
        assert np.array_equal(loaded[name], array)


def test_snapshot_errors(tmp_path):
    with pytest.raises(CheckpointError):
        load_tensors(tmp_path / "missing.npz")
    with pytest.raises(CheckpointError):
        save_tensors(tmp_path / "bad.npz", {"__metadata__": np.ones(1)}, {})
