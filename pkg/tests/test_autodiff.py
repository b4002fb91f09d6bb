"""Tensor-op forward/backward behavior, finite-difference gradient oracle,
and the adaptive-moment optimizer."""

import numpy as np
import pytest

from rqiqn.autodiff import (
    MlpParams,
    NonFiniteGradientError,
    OptimizerState,
    ShapeError,
    Tensor,
    absolute,
    add,
    cosine_basis,
    huber,
    matmul,
    mul,
    no_grad,
    optimizer_step,
    pick,
    rectifier,
    reshape,
    sub,
    tmean,
    tsum,
    zero_grads,
)


def numerical_grad(f, x: np.ndarray, h: float = 1e-5) -> np.ndarray:
    """Central finite differences of a scalar function of an array."""
    g = np.zeros_like(x)
    flat = x.ravel()
    gflat = g.ravel()
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        fp = f()
        flat[i] = orig - h
        fm = f()
        flat[i] = orig
        gflat[i] = (fp - fm) / (2.0 * h)
    return g


def assert_grad_matches(build, tensors, tol=1e-4):
    out = build()
    for t in tensors:
        t.grad = None
    out.backward()
    for t in tensors:
        analytic = t.grad if t.grad is not None else np.zeros_like(t.values)

        def value():
            with no_grad():
                return float(build().values)

        fd = numerical_grad(value, t.values)
        denom = np.maximum(1.0, np.maximum(np.abs(analytic), np.abs(fd)))
        assert np.max(np.abs(analytic - fd) / denom) < tol


def test_cosine_basis_at_zero():
    assert np.allclose(cosine_basis(0.0, 4).values, [1, 1, 1, 1])


def test_cosine_basis_at_one_alternates():
    assert np.allclose(cosine_basis(1.0, 3).values, [1, -1, 1])


def test_rectifier_values():
    assert np.array_equal(rectifier(Tensor([-1.0, 0.0, 2.0])).values, [0.0, 0.0, 2.0])


def test_square_gradient():
    x = Tensor(3.0, requires_grad=True)
    mul(x, x).backward()
    assert x.grad == pytest.approx(6.0)


def test_rectifier_dead_region_gradient():
    x = Tensor(-1.0, requires_grad=True)
    rectifier(x).backward()
    assert x.grad == 0.0


def test_rectifier_gradient_zero_at_kink():
    x = Tensor(0.0, requires_grad=True)
    rectifier(x).backward()
    assert x.grad == 0.0


def test_two_layer_mlp_finite_difference():
    rng = np.random.default_rng(7)
    mlp = MlpParams.create(rng, [3, 5, 2])
    x = rng.normal(size=(4, 3))

    def build():
        return tsum(mlp.apply(Tensor(x)))

    assert_grad_matches(build, mlp.weights + mlp.biases)


@pytest.mark.parametrize("trial", range(10))
def test_op_gradients_random_inputs(trial):
    """Each differentiable op against central differences, 10 sizes x 10 seeds
    worth of random inputs (kink neighborhoods excluded where they exist)."""
    rng = np.random.default_rng(100 + trial)
    a = Tensor(rng.normal(size=(3, 4)), requires_grad=True)
    b = Tensor(rng.normal(size=(3, 4)), requires_grad=True)
    w = Tensor(rng.normal(size=(4, 2)), requires_grad=True)
    bias = Tensor(rng.normal(size=(2,)), requires_grad=True)
    assert_grad_matches(lambda: tsum(add(a, b)), [a, b])
    assert_grad_matches(lambda: tsum(sub(a, b)), [a, b])
    assert_grad_matches(lambda: tsum(mul(a, b)), [a, b])
    assert_grad_matches(lambda: tsum(add(matmul(a, w), bias)), [a, w, bias])
    assert_grad_matches(lambda: tmean(mul(a, a)), [a])
    assert_grad_matches(lambda: tsum(reshape(mul(a, a), (4, 3))), [a])

    safe = Tensor(rng.normal(size=(3, 4)) + np.where(rng.random((3, 4)) < 0.5, -2.5, 2.5), requires_grad=True)
    assert_grad_matches(lambda: tsum(rectifier(safe)), [safe])
    assert_grad_matches(lambda: tsum(absolute(safe)), [safe])
    assert_grad_matches(lambda: tsum(huber(safe, 1.3)), [safe])

    m = Tensor(rng.normal(size=(5, 3)), requires_grad=True)
    idx = rng.integers(0, 3, size=5)
    assert_grad_matches(lambda: tsum(pick(m, idx)), [m])

    tau = Tensor(rng.uniform(0.1, 0.9, size=6), requires_grad=True)
    assert_grad_matches(lambda: tsum(cosine_basis(tau, 5)), [tau])


def test_broadcast_gradients():
    rng = np.random.default_rng(42)
    col = Tensor(rng.normal(size=(4, 1, 3)), requires_grad=True)
    row = Tensor(rng.normal(size=(4, 2, 1)), requires_grad=True)
    assert_grad_matches(lambda: tsum(mul(s := sub(col, row), s)), [col, row])


def test_backward_linearity():
    rng = np.random.default_rng(3)
    x = Tensor(rng.normal(size=(3, 3)), requires_grad=True)

    def grad_of(scale_f, scale_g):
        x.grad = None
        fg = add(mul(tsum(mul(x, x)), scale_f), mul(tsum(rectifier(x)), scale_g))
        fg.backward()
        return x.grad.copy()

    gf = grad_of(1.0, 0.0)
    gg = grad_of(0.0, 1.0)
    combined = grad_of(2.5, -1.5)
    assert np.allclose(combined, 2.5 * gf - 1.5 * gg, rtol=1e-12, atol=1e-12)


def test_forward_and_gradient_determinism():
    def run():
        rng = np.random.default_rng(11)
        mlp = MlpParams.create(rng, [4, 8, 2])
        x = rng.normal(size=(5, 4))
        out = tsum(mlp.apply(Tensor(x)))
        out.backward()
        return out.item(), [w.grad.copy() for w in mlp.weights]

    v1, g1 = run()
    v2, g2 = run()
    assert v1 == v2
    for a, b in zip(g1, g2):
        assert np.array_equal(a, b)


def test_backward_requires_scalar():
    x = Tensor(np.ones((2, 2)), requires_grad=True)
    with pytest.raises(ShapeError):
        mul(x, x).backward()


def test_matmul_shape_error_reports_both_shapes():
    with pytest.raises(ShapeError, match=r"\(2, 3\).*\(2, 3\)"):
        matmul(Tensor(np.ones((2, 3))), Tensor(np.ones((2, 3))))


def test_add_shape_error():
    with pytest.raises(ShapeError):
        add(Tensor(np.ones((2, 3))), Tensor(np.ones((4, 5))))


def test_division_by_tensor_rejected():
    x = Tensor(np.ones(3), requires_grad=True)
    with pytest.raises(ShapeError):
        x / Tensor(np.ones(3))


def test_no_grad_suppresses_graph():
    x = Tensor(np.ones(3), requires_grad=True)
    with no_grad():
        y = mul(x, x)
    assert not y.requires_grad and y._backward_rule is None


def test_pick_selects_per_row():
    x = Tensor(np.arange(6.0).reshape(3, 2))
    assert np.array_equal(pick(x, [1, 0, 1]).values, [1.0, 2.0, 5.0])


def test_tape_consumed_after_backward():
    x = Tensor(2.0, requires_grad=True)
    y = mul(x, x)
    y.backward()
    assert y._backward_rule is None and y._parents == ()


# -- optimizer -----------------------------------------------------------------


def _param_dict(values):
    return {"layer.W": Tensor(np.asarray(values, dtype=np.float64), requires_grad=True)}


def test_optimizer_zero_gradient_leaves_params_unchanged():
    params = _param_dict([1.0, -2.0])
    params["layer.W"].grad = np.zeros(2)
    state = OptimizerState(learning_rate=0.1)
    optimizer_step(params, state)
    assert np.array_equal(params["layer.W"].values, [1.0, -2.0])
    assert state.step == 1


def test_optimizer_first_step_magnitude_is_learning_rate():
    params = _param_dict([0.5])
    params["layer.W"].grad = np.array([4.2])
    state = OptimizerState(learning_rate=1e-3)
    optimizer_step(params, state)
    displacement = params["layer.W"].values[0] - 0.5
    assert displacement == pytest.approx(-1e-3, rel=1e-6)


def test_optimizer_determinism():
    def run():
        rng = np.random.default_rng(5)
        params = _param_dict(rng.normal(size=8))
        state = OptimizerState(learning_rate=0.01)
        for _ in range(25):
            params["layer.W"].grad = rng.normal(size=8)
            optimizer_step(params, state)
        return params["layer.W"].values.copy()

    assert np.array_equal(run(), run())


def test_optimizer_nonfinite_gradient_names_layer():
    params = _param_dict([1.0])
    params["layer.W"].grad = np.array([np.nan])
    with pytest.raises(NonFiniteGradientError, match="layer.W"):
        optimizer_step(params, OptimizerState(learning_rate=0.1))


def test_grad_clip_rescales_global_norm():
    params = _param_dict([0.0, 0.0])
    params["layer.W"].grad = np.array([30.0, 40.0])
    state = OptimizerState(learning_rate=1.0)
    optimizer_step(params, state, grad_clip=5.0)
    m = state.first_moment["layer.W"]
    assert np.hypot(*(m / 0.1)) == pytest.approx(5.0)


def test_zero_grads_clears():
    params = _param_dict([1.0])
    params["layer.W"].grad = np.ones(1)
    zero_grads(params)
    assert params["layer.W"].grad is None
