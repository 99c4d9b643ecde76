import math

import numpy as np
import pytest

from coop_forecaster.Numerics.optim import AdamState, adamw_step, clip_grad_norm, cosine_lr, global_grad_norm
from coop_forecaster.Numerics.params import ParamStore, Rng
from coop_forecaster.Utils.errors import NumericFailure


def test_cosine_schedule_endpoints():
    assert cosine_lr(1e-3, 0, 100) == pytest.approx(1e-3)
    assert cosine_lr(1e-3, 50, 100) == pytest.approx(5e-4)
    assert cosine_lr(1e-3, 100, 100) == pytest.approx(0.0, abs=1e-18)
    assert cosine_lr(1e-3, 3, 0) == 1e-3


def test_clip_scales_to_max_norm():
    grads = {"a": np.array([3.0, 0.0]), "b": np.array([[4.0]])}
    assert global_grad_norm(grads) == 5.0
    clipped, norm = clip_grad_norm(grads, 1.0)
    assert norm == 5.0
    assert global_grad_norm(clipped) == pytest.approx(1.0)
    unchanged, _ = clip_grad_norm(grads, 10.0)
    assert unchanged is grads


def test_adamw_first_step_matches_hand_computation():
    store = ParamStore(0)
    store.add("w", np.array([1.0, -2.0]))
    grads = {"w": np.array([0.5, -0.25])}
    state = AdamState()
    lr, wd, eps = 0.1, 0.01, 1e-8
    adamw_step(store, grads, state, lr, (0.9, 0.999), eps, wd)
    # Bias-corrected first step: m_hat = g, v_hat = g^2
    decayed = np.array([1.0, -2.0]) * (1.0 - lr * wd)
    expected = decayed - lr * grads["w"] / (np.abs(grads["w"]) + eps)
    np.testing.assert_allclose(store["w"].data, expected, rtol=1e-12)
    assert state.step == 1


def test_adamw_rejects_non_finite_gradients_without_touching_params():
    store = ParamStore(0)
    store.add("w", np.array([1.0, 2.0]))
    state = AdamState()
    with pytest.raises(NumericFailure):
        adamw_step(store, {"w": np.array([np.nan, 0.0])}, state, 0.1)
    np.testing.assert_array_equal(store["w"].data, [1.0, 2.0])
    assert state.step == 0


def test_rng_is_deterministic_and_splittable():
    a, b = Rng(42), Rng(42)
    assert [a.next_u64() for _ in range(5)] == [b.next_u64() for _ in range(5)]
    np.testing.assert_array_equal(Rng(1).random(10), Rng(1).random(10))
    values = Rng(7).random(1000)
    assert values.min() >= 0.0 and values.max() < 1.0
    children = Rng(3).split(3)
    assert len({child.next_u64() for child in children}) == 3


def test_permutation_and_choice():
    order = Rng(5).permutation(20)
    assert sorted(order) == list(range(20))
    picks = [Rng(s).choice([0.0, 1.0, 0.0]) for s in range(20)]
    assert set(picks) == {1}


def test_normal_samples_have_unit_scale():
    samples = Rng(11).normal(20000)
    assert abs(float(np.mean(samples))) < 0.05
    assert math.isclose(float(np.std(samples)), 1.0, rel_tol=0.05)


def test_param_store_glorot_is_seeded():
    first, second = ParamStore(9), ParamStore(9)
    for store in (first, second):
        store.linear("layer", 3, 4)
    np.testing.assert_array_equal(first["layer.weight"].data, second["layer.weight"].data)
    bound = math.sqrt(6.0 / 7.0)
    assert np.abs(first["layer.weight"].data).max() <= bound
    assert first.num_parameters() == 16
