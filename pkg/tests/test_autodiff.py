"""Differentiation engine: network Jacobians, tape gradients, finite-difference oracles."""

import numpy as np
import pytest

from contact_pinn import autodiff, loss, network
from contact_pinn.autodiff import (
    ConfigurationError,
    ConstructionError,
    Var,
    check_gradient,
    directional_derivative_fd,
    evaluate_with_jacobian,
    loss_gradient,
    mlp_forward,
    mlp_with_jacobian,
    param_count,
    split_params,
)
from contact_pinn.contact import RigidPlane
from contact_pinn.network import Architecture, init_glorot_uniform


def test_param_count_matches_layer_sum():
    widths = [3, 50, 50, 9]
    assert param_count(widths) == (3 * 50 + 50) + (50 * 50 + 50) + (50 * 9 + 9)


def test_split_params_returns_writable_views():
    widths = [3, 4, 2]
    theta = np.zeros(param_count(widths))
    (w1, b1), (w2, b2) = split_params(theta, widths)
    assert w1.shape == (3, 4) and b1.shape == (4,)
    assert w2.shape == (4, 2) and b2.shape == (2,)
    w1[0, 0] = 5.0
    b2[1] = -1.0
    assert theta[0] == 5.0 and theta[-1] == -1.0


def test_zero_weight_network_outputs_final_bias_with_zero_jacobian():
    widths = [3, 4]
    theta = np.zeros(param_count(widths))
    bias = np.array([1.0, 2.0, 3.0, 4.0])
    split_params(theta, widths)[0][1][...] = bias
    out = evaluate_with_jacobian(theta, widths, [0.7, -0.2, 1.5])
    np.testing.assert_array_equal(out.values, bias)
    np.testing.assert_array_equal(out.d_dx, np.zeros((4, 3)))


def test_single_linear_layer_jacobian_is_weight_matrix(rng):
    widths = [3, 5]
    theta = rng.standard_normal(param_count(widths))
    w, b = split_params(theta, widths)[0]
    x = rng.standard_normal(3)
    out = evaluate_with_jacobian(theta, widths, x)
    np.testing.assert_allclose(out.values, x @ w + b, rtol=0, atol=1e-15)
    np.testing.assert_allclose(out.d_dx, w.T, rtol=0, atol=1e-15)


def test_tanh_network_jacobian_matches_central_differences():
    arch = Architecture()  # 5 hidden layers of width 50
    theta = init_glorot_uniform(arch, seed=11)
    x = np.array([0.3, 0.4, 0.5])
    out = evaluate_with_jacobian(theta, arch.widths, x)
    h = 1e-4
    for j in range(3):
        e = np.zeros(3)
        e[j] = h
        fd = (mlp_forward(theta, arch.widths, (x + e)[None, :])[0]
              - mlp_forward(theta, arch.widths, (x - e)[None, :])[0]) / (2 * h)
        np.testing.assert_allclose(out.d_dx[:, j], fd, rtol=1e-6, atol=1e-10)


def test_batched_jacobian_agrees_with_single_point_calls(small_arch, small_theta, rng):
    pts = rng.uniform(-1.0, 1.0, size=(6, 3))
    packed = mlp_with_jacobian(small_theta, small_arch.widths, pts)
    for i, p in enumerate(pts):
        single = evaluate_with_jacobian(small_theta, small_arch.widths, p)
        np.testing.assert_allclose(packed[i, :, 0], single.values, rtol=0, atol=1e-14)
        np.testing.assert_allclose(packed[i, :, 1:], single.d_dx, rtol=0, atol=1e-14)


def test_mlp_with_jacobian_rejects_wrong_point_shape(small_arch, small_theta):
    with pytest.raises(ConfigurationError):
        mlp_with_jacobian(small_theta, small_arch.widths, np.zeros((4, 2)))


def test_quadratic_objective_gradient_equals_theta(rng):
    theta = rng.standard_normal(17)
    value, grad = loss_gradient(theta, lambda v: autodiff.weighted_square_sum(v, 0.5))
    assert value == pytest.approx(0.5 * float(theta @ theta), rel=1e-14)
    np.testing.assert_array_equal(grad, theta)


def test_mean_squared_spatial_derivative_gradient_matches_fd(small_arch, small_theta, rng):
    pts = rng.uniform(0.1, 0.9, size=(10, 3))
    widths = small_arch.widths

    def objective(v):
        packed = mlp_with_jacobian(v, widths, pts)
        dux_dx = packed[:, 0, 1]
        return autodiff.weighted_square_sum(dux_dx, 1.0 / len(pts))

    value, grad = loss_gradient(small_theta, objective)

    def f(t):
        packed = mlp_with_jacobian(t, widths, pts)
        return float(np.mean(packed[:, 0, 1] ** 2))

    assert value == pytest.approx(f(small_theta), rel=1e-14)
    directions = rng.standard_normal((20, small_theta.size))
    worst = check_gradient(f, grad, small_theta, directions, rtol=1e-5)
    assert worst < 1e-5


def test_complementarity_loss_gradient_matches_fd(small_arch, small_theta, rng):
    from contact_pinn import contact

    pts = np.column_stack([rng.uniform(0, 1, 5), np.zeros(5), rng.uniform(0, 1, 5)])
    plane = RigidPlane.horizontal(0.0)
    transform = network.patch_transform()
    tf = transform.arrays(pts)
    widths = small_arch.widths

    def fields(v):
        packed = mlp_with_jacobian(v, widths, pts)
        return autodiff.add(autodiff.mul(packed[:, :, 0], tf.factor), tf.offset)

    def objective(v):
        vals = fields(v)
        g = contact.gap(pts, vals[:, 0:3], plane)
        state = contact.traction_decomposition(vals[:, 3:9], plane)
        r = contact.kkt_residual(g, state.pressure)
        return autodiff.weighted_square_sum(r, 1.0 / len(pts))

    _, grad = loss_gradient(small_theta, objective)

    def f(t):
        vals = fields(t)
        g = np.asarray(autodiff.value_of(contact.gap(pts, vals[:, 0:3], plane)))
        state = contact.traction_decomposition(vals[:, 3:9], plane)
        r = g - state.pressure - np.sqrt(g**2 + state.pressure**2)
        return float(np.mean(r**2))

    directions = rng.standard_normal((20, small_theta.size))
    worst = check_gradient(f, grad, small_theta, directions, rtol=1e-5)
    assert worst < 1e-5


def test_full_objective_directional_derivatives(small_arch, small_theta, patch_material,
                                                patch_sets_small, rng):
    """Composed momentum+coupling+contact objective against central differences."""
    transform = network.patch_transform()
    assembler = loss.LossAssembler(
        small_arch, patch_material, transform,
        {k: v for k, v in patch_sets_small.items() if k != "evaluation"},
        plane=RigidPlane.horizontal(0.0))
    bd, grad = assembler.value_and_gradient(small_theta)

    def f(t):
        return assembler.breakdown(t).total

    # The complementarity term contributes strong third derivatives, so the
    # h^2 truncation of central differences needs a smaller step here.
    directions = rng.standard_normal((20, small_theta.size))
    worst = check_gradient(f, grad, small_theta, directions, h=1e-5, rtol=1e-5)
    assert worst < 1e-5


def test_guarded_sqrt_is_finite_at_zero():
    leaf = Var(np.array([0.0]))
    root = autodiff.sqrt(leaf)
    autodiff.backward(autodiff.total_sum(root))
    assert np.all(np.isfinite(leaf.grad))
    assert autodiff.value_of(root)[0] == 0.0


def test_sqrt_rejects_negative_values():
    with pytest.raises(ConfigurationError):
        autodiff.sqrt(np.array([-1.0]))


def test_operations_accept_plain_arrays():
    a = np.array([1.0, 2.0])
    b = np.array([3.0, 4.0])
    np.testing.assert_array_equal(autodiff.add(a, b), a + b)
    np.testing.assert_array_equal(autodiff.mul(a, b), a * b)
    np.testing.assert_array_equal(autodiff.sub(a, b), a - b)
    assert autodiff.mean(a) == 1.5
    assert autodiff.weighted_square_sum(a, 2.0) == 2.0 * 5.0


def test_broadcast_gradients_are_summed_correctly():
    leaf = Var(np.array([2.0]))  # broadcasts against a length-3 array
    out = autodiff.mul(leaf, np.array([1.0, 2.0, 3.0]))
    autodiff.backward(autodiff.total_sum(out))
    np.testing.assert_array_equal(leaf.grad, np.array([6.0]))


def test_loss_gradient_rejects_non_var_objective(rng):
    theta = rng.standard_normal(4)
    with pytest.raises(ConstructionError):
        loss_gradient(theta, lambda v: 1.0)
    with pytest.raises(ConstructionError):
        loss_gradient(theta, lambda v: autodiff.mul(v, v))  # non-scalar


def test_check_gradient_flags_wrong_gradient(rng):
    theta = rng.standard_normal(6)

    def f(t):
        return float(t @ t)

    wrong = 2.0 * theta + 0.05
    with pytest.raises(AssertionError):
        check_gradient(f, wrong, theta, rng.standard_normal((5, 6)))


def test_directional_derivative_fd_linear_function_is_exact(rng):
    c = rng.standard_normal(8)
    theta = rng.standard_normal(8)
    v = rng.standard_normal(8)
    fd = directional_derivative_fd(lambda t: float(c @ t), theta, v)
    assert fd == pytest.approx(float(c @ v), rel=1e-9)


def test_jacobian_evaluation_is_deterministic(small_arch, small_theta, rng):
    pts = rng.uniform(0.0, 1.0, size=(12, 3))
    a = mlp_with_jacobian(small_theta, small_arch.widths, pts)
    b = mlp_with_jacobian(small_theta, small_arch.widths, pts)
    np.testing.assert_array_equal(a, b)


def test_loss_and_gradient_are_deterministic(small_arch, small_theta, patch_material,
                                             patch_sets_small):
    transform = network.patch_transform()
    assembler = loss.LossAssembler(
        small_arch, patch_material, transform,
        {k: v for k, v in patch_sets_small.items() if k != "evaluation"},
        plane=RigidPlane.horizontal(0.0))
    bd1, g1 = assembler.value_and_gradient(small_theta)
    bd2, g2 = assembler.value_and_gradient(small_theta)
    assert bd1.as_dict() == bd2.as_dict()
    np.testing.assert_array_equal(g1, g2)
