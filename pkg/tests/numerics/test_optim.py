import numpy as np
import pytest
from src.errors import ShapeError
from src.numerics import OptimizerState, ParamStore, adamw_step, glorot_uniform, step_decay_lr

# 1. Parameter store

def test_store_keeps_insertion_order():
    params = ParamStore()
    for name in ("b", "a", "c"):
        params.add(name, np.zeros(2))
    assert params.names() == ["b", "a", "c"]

def test_store_rejects_duplicate_names():
    params = ParamStore()
    params.add("w", np.zeros(2))
    with pytest.raises(ValueError):
        params.add("w", np.zeros(2))

def test_store_gradient_shape_checked():
    params = ParamStore()
    params.add("w", np.zeros((2, 3)))
    with pytest.raises(ShapeError):
        params.accumulate("w", np.zeros((3, 2)))

def test_store_accumulate_and_zero():
    params = ParamStore()
    params.add("w", np.zeros(2))
    params.accumulate("w", np.ones(2))
    params.accumulate("w", np.ones(2), scale=0.5)
    assert np.array_equal(params.grad("w"), [1.5, 1.5])
    params.zero_grad()
    assert np.array_equal(params.grad("w"), [0.0, 0.0])

def test_glorot_bounds():
    values = glorot_uniform((8, 4, 3, 3), np.random.default_rng(0))
    assert np.abs(values).max() <= np.sqrt(6.0 / (12 * 9))


# 2. AdamW

def single(value, grad):
    params = ParamStore()
    params.add("theta", np.array([value]))
    params.accumulate("theta", np.array([grad]))
    return params

def test_adamw_first_step():
    params = single(1.0, 1.0)
    adamw_step(params, OptimizerState.for_params(params, lr=0.1))
    assert params["theta"][0] == pytest.approx(0.9, abs=1e-7)

def test_adamw_decay_only():
    params = single(1.0, 0.0)
    adamw_step(params, OptimizerState.for_params(params, lr=0.1, weight_decay=0.01))
    assert params["theta"][0] == pytest.approx(0.999, abs=1e-15)

@pytest.mark.parametrize("lr, weight_decay", [(0.1, 0.01), (3e-4, 1e-5), (1.0, 0.5)])
def test_adamw_zero_gradient_contracts_every_step(lr, weight_decay):
    initial = np.random.default_rng(1).normal(size=(3, 4))
    params = ParamStore()
    params.add("w", initial.copy())
    state = OptimizerState.for_params(params, lr=lr, weight_decay=weight_decay)
    expected = initial.copy()
    for _ in range(7):
        adamw_step(params, state)
        expected *= 1.0 - lr * weight_decay
        assert np.array_equal(params["w"], expected)

def test_adamw_no_gradient_no_decay():
    params = single(1.0, 0.0)
    adamw_step(params, OptimizerState.for_params(params, lr=0.1))
    assert params["theta"][0] == 1.0

def test_adamw_counts_steps():
    params = single(1.0, 1.0)
    state = OptimizerState.for_params(params, lr=0.1)
    for _ in range(3):
        adamw_step(params, state)
    assert state.step == 3
    assert state.first_moment["theta"].shape == params["theta"].shape

def test_optimizer_rejects_non_positive_lr():
    with pytest.raises(ValueError):
        OptimizerState(lr=0.0)


# 3. Learning-rate schedule

@pytest.mark.parametrize("epoch, expected", [(0, 3e-4), (9, 3e-4), (10, 3e-5), (20, 3e-6), (29, 3e-6)])
def test_step_decay(epoch, expected):
    assert step_decay_lr(3e-4, epoch) == pytest.approx(expected, rel=1e-12)
