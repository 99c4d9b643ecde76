import numpy as np
import pytest
from conftest import numeric_gradient, relative_error

from coop_forecaster.Numerics import tensor as T
from coop_forecaster.Numerics.tensor import Tape, Tensor, backward
from coop_forecaster.Utils.errors import ContractError, EmptyAttentionError, NumericDomainError, ShapeError


def _grad_check(build, *shapes, seed=0, positive=False):
    rng = np.random.default_rng(seed)
    leaves = {}
    for n, shape in enumerate(shapes):
        values = rng.uniform(0.5, 2.0, shape) if positive else rng.normal(size=shape)
        leaves[f"x{n}"] = Tensor(values, requires_grad=True)

    def loss_value():
        return float(build(*leaves.values()).data)

    with Tape() as tape:
        loss = build(*leaves.values())
    grads = backward(tape, loss, leaves)
    for name, leaf in leaves.items():
        numeric, indices = numeric_gradient(loss_value, leaf)
        assert relative_error(grads[name].reshape(-1)[indices], numeric) < 1e-4, name


def test_elementwise_gradients_match_finite_differences():
    _grad_check(lambda a, b: T.sum_(a * b + a / b - T.neg(b)), (3, 4), (3, 4), positive=True)
    _grad_check(lambda a: T.sum_(T.exp(a) + T.log(a) + T.power(a, 1.5)), (5,), positive=True)
    _grad_check(lambda a: T.sum_(T.sigmoid(a) * T.softplus(a)), (2, 3))


def test_broadcast_gradients_are_reduced_to_input_shape():
    _grad_check(lambda a, b: T.sum_((a + b) * (a - b)), (3, 4), (4,))
    _grad_check(lambda a, b: T.sum_(a * b), (2, 3, 4), (1, 3, 1))


def test_matmul_softmax_and_reduction_gradients():
    _grad_check(lambda a, b: T.sum_(T.softmax(a @ b, axis=-1) * T.reshape(T.mean(a, axis=1), (3, 1))), (3, 4), (4, 5))
    _grad_check(lambda a: T.sum_(T.softmax(a, axis=0)[1:] * 3.0), (4, 2))


def test_indexing_gradients_accumulate_repeated_rows():
    indices = np.array([0, 2, 2, 1])
    _grad_check(lambda a: T.sum_(T.take_rows(a, indices) * T.take_rows(a, indices)), (3, 2))
    _grad_check(lambda a, b: T.sum_(T.power(T.scatter_rows(a, np.array([1]), b), 2.0)), (3, 2), (1, 2))


def test_shape_ops_gradients():
    _grad_check(lambda a, b: T.sum_(T.concat([a, b], axis=-1) * T.stack([a, a], axis=2).reshape(2, 6)[:, :5]),
                (2, 3), (2, 2))
    _grad_check(lambda a: T.sum_(T.swapaxes(a, 0, 1) * np.arange(6.0).reshape(3, 2)), (2, 3))


def test_softmax_rows_sum_to_one_and_respect_mask():
    logits = Tensor(np.array([[1.0, 2.0, 3.0], [5.0, 5.0, 5.0]]))
    mask = np.array([[True, False, True], [True, True, True]])
    out = T.softmax(logits, axis=-1, mask=mask).data
    np.testing.assert_allclose(out.sum(axis=-1), 1.0)
    assert out[0, 1] == 0.0
    np.testing.assert_allclose(out[1], [1 / 3, 1 / 3, 1 / 3])


def test_softmax_is_stable_for_large_logits():
    out = T.softmax(Tensor([1000.0, 1001.0]), axis=-1).data
    assert np.isfinite(out).all()
    np.testing.assert_allclose(out, [1 / (1 + np.e), np.e / (1 + np.e)])


def test_fully_masked_softmax_row_raises():
    with pytest.raises(EmptyAttentionError):
        T.softmax(Tensor([[1.0, 2.0]]), axis=-1, mask=np.array([[False, False]]))


def test_domain_errors():
    with pytest.raises(NumericDomainError):
        T.log(Tensor([0.0, 1.0]))
    with pytest.raises(NumericDomainError):
        T.div(Tensor([1.0]), Tensor([0.0]))
    with pytest.raises(NumericDomainError):
        T.exp(Tensor([1e4]))
    with pytest.raises(ShapeError):
        T.matmul(Tensor(np.ones((2, 3))), Tensor(np.ones((2, 3))))


def test_backward_requires_scalar_loss_on_tape():
    leaf = Tensor(np.ones(3), requires_grad=True)
    with Tape() as tape:
        out = leaf * 2.0
    with pytest.raises(ContractError):
        backward(tape, out, {"x": leaf})
    with pytest.raises(ContractError):
        backward(Tape(), T.sum_(out), {"x": leaf})


def test_unreached_parameters_get_zero_gradient():
    used = Tensor(np.ones(2), requires_grad=True)
    unused = Tensor(np.ones((2, 2)), requires_grad=True)
    with Tape() as tape:
        loss = T.sum_(used * 3.0)
    grads = backward(tape, loss, {"used": used, "unused": unused})
    np.testing.assert_array_equal(grads["used"], [3.0, 3.0])
    np.testing.assert_array_equal(grads["unused"], np.zeros((2, 2)))


def test_ops_outside_tape_record_nothing():
    leaf = Tensor(np.ones(2), requires_grad=True)
    out = leaf * 2.0
    assert not out.requires_grad


def test_item_rejects_non_scalars():
    assert Tensor([[2.5]]).item() == 2.5
    with pytest.raises(ShapeError):
        Tensor([1.0, 2.0]).item()
