"""Objective assembly: residual groups, weights, masks, and exactness certificates."""

import numpy as np
import pytest

from contact_pinn import analytic, checks
from contact_pinn.autodiff import ConfigurationError, split_params
from contact_pinn.contact import RigidPlane, kkt_residual
from contact_pinn.geometry import PointSet, hertz_data_lines
from contact_pinn.loss import (
    LossAssembler,
    LossBreakdown,
    LossWeights,
    contact_losses,
    data_loss,
    make_provider,
    pde_loss,
    total_loss,
)
from contact_pinn.network import (
    Architecture,
    hertz_transform,
    init_glorot_uniform,
    patch_transform,
    transformed_fields,
)

FLOOR = RigidPlane.horizontal(0.0)


def exact_patch_params():
    """Single affine layer whose transformed outputs equal the exact solution."""
    arch = Architecture(hidden_layers=0)
    theta = np.zeros(arch.n_params)
    w, b = split_params(theta, arch.widths)[0]
    e, nu, p = 1.33, 0.33, 0.1
    w[1, 1] = -p / e  # raw uy = -(p/E) * y
    b[0] = nu * p / e  # raw ux factor multiplies x
    b[2] = nu * p / e  # raw uz factor multiplies z
    return arch, theta


def test_weights_validation():
    with pytest.raises(ConfigurationError):
        LossWeights(momentum=(1.0, 1.0))
    with pytest.raises(ConfigurationError):
        LossWeights(kkt=-1.0)
    assert LossWeights.hertz_defaults().kkt == 500.0


def test_breakdown_total_is_the_sum_of_parts():
    bd = LossBreakdown.from_parts(pde_momentum=1.0, kkt=0.25, data=0.5)
    assert bd.total == 1.75
    assert bd.as_dict()["total"] == sum(
        v for k, v in bd.as_dict().items() if k != "total")


def test_zero_params_patch_interior_parts(patch_material, patch_sets_small):
    """With all-zero parameters only the constant pressure offset survives, so the
    constitutive residual is (0 - (-p)) = p in the vertical normal component."""
    arch = Architecture(hidden_layers=1, hidden_width=4)
    mom, coup = pde_loss(np.zeros(arch.n_params), arch, patch_sets_small["interior"],
                         patch_material, patch_transform())
    assert mom == 0.0
    assert coup == pytest.approx(0.01, rel=1e-12)


def test_exact_solution_zeroes_every_residual(patch_material, patch_sets_small):
    arch, theta = exact_patch_params()
    bd = total_loss(theta, arch, patch_material, patch_transform(),
                    {k: v for k, v in patch_sets_small.items() if k != "evaluation"},
                    plane=FLOOR)
    assert bd.pde_momentum < 1e-20
    assert bd.pde_coupling < 1e-20
    assert bd.sliding == 0.0
    assert bd.kkt == 0.0
    assert bd.total < 1e-18  # zero-residual certificate


def test_doubling_one_weight_group_doubles_exactly_that_part(small_arch, small_theta,
                                                             patch_material,
                                                             patch_sets_small):
    sets = {k: v for k, v in patch_sets_small.items() if k != "evaluation"}
    base = total_loss(small_theta, small_arch, patch_material, patch_transform(),
                      sets, weights=LossWeights(), plane=FLOOR)
    doubled = total_loss(small_theta, small_arch, patch_material, patch_transform(),
                         sets, weights=LossWeights(kkt=2.0), plane=FLOOR)
    assert doubled.kkt == 2.0 * base.kkt  # power-of-two scaling is exact
    assert doubled.pde_momentum == base.pde_momentum
    assert doubled.pde_coupling == base.pde_coupling
    assert doubled.sliding == base.sliding

    coup2 = total_loss(small_theta, small_arch, patch_material, patch_transform(),
                       sets, weights=LossWeights(coupling=(2.0,) * 6), plane=FLOOR)
    assert coup2.pde_coupling == 2.0 * base.pde_coupling
    assert coup2.kkt == base.kkt


def test_all_zero_weights_give_zero_total(small_arch, small_theta, patch_material,
                                          patch_sets_small):
    weights = LossWeights(momentum=(0.0,) * 3, coupling=(0.0,) * 6,
                          dirichlet=(0.0,) * 3, neumann=(0.0,) * 3, data=(0.0,) * 9,
                          sliding_xi=0.0, sliding_eta=0.0, kkt=0.0)
    bd = total_loss(small_theta, small_arch, patch_material, patch_transform(),
                    {k: v for k, v in patch_sets_small.items() if k != "evaluation"},
                    weights=weights, plane=FLOOR)
    assert bd.total == 0.0


def test_every_part_is_nonnegative(small_arch, hertz_material, hertz_sets_small):
    sets = {k: v for k, v in hertz_sets_small.items() if k != "evaluation"}
    sets["data"] = hertz_data_lines(points_per_line=3)
    plane = RigidPlane.horizontal(-1.0)
    for seed in range(3):
        theta = init_glorot_uniform(small_arch, seed=seed)
        bd = total_loss(theta, small_arch, hertz_material, hertz_transform(), sets,
                        weights=LossWeights.hertz_defaults(), plane=plane)
        for name, value in bd.as_dict().items():
            assert value >= 0.0, name


def test_data_loss_is_zero_when_predictions_match(small_arch, small_theta):
    pts = np.array([[0.2, -0.5, -0.3], [0.4, -0.8, -0.6]])
    values, _ = transformed_fields(small_theta, small_arch, hertz_transform(), pts)
    mask = np.ones((2, 9), dtype=bool)
    data = PointSet(role="data", points=pts, values=values, mask=mask)
    assert data_loss(small_theta, small_arch, data, hertz_transform()) == 0.0


def test_data_loss_single_component_is_weighted_square_error(small_arch, small_theta):
    pts = np.array([[0.2, -0.5, -0.3]])
    values, _ = transformed_fields(small_theta, small_arch, hertz_transform(), pts)
    e = 0.125  # exactly representable, keeps the arithmetic bit-exact
    measured = np.zeros((1, 9))
    measured[0, 4] = values[0, 4] - e
    mask = np.zeros((1, 9), dtype=bool)
    mask[0, 4] = True
    data = PointSet(role="data", points=pts, values=measured, mask=mask)
    assert data_loss(small_theta, small_arch, data, hertz_transform()) == e * e
    weighted = LossWeights(data=(1.0, 1.0, 1.0, 1.0, 4.0, 1.0, 1.0, 1.0, 1.0))
    assert data_loss(small_theta, small_arch, data, hertz_transform(),
                     weights=weighted) == 4.0 * e * e


def test_data_loss_on_reference_lines_with_zero_params():
    """Zero parameters predict sxx = szz = 0 and syy = -p, so the misfit against
    the subsurface profile is large and exactly computable from the oracle."""
    arch = Architecture(hidden_layers=1, hidden_width=4)
    data = hertz_data_lines()
    got = data_loss(np.zeros(arch.n_params), arch, data, hertz_transform())
    truth = analytic.hertz_field_at(data.points, analytic.hertz_constants())
    pred = np.zeros_like(truth)
    pred[:, 1] = -0.5
    expected = float(np.mean((pred - truth) ** 2, axis=0).sum())
    assert got == pytest.approx(expected, rel=1e-12)
    assert got == pytest.approx(34.7916335606684, rel=1e-12)


def test_data_loss_requires_values_and_mask(small_arch, small_theta):
    pts = np.zeros((1, 3))
    with pytest.raises(ConfigurationError):
        data_loss(small_theta, small_arch,
                  PointSet(role="data", points=pts), hertz_transform())
    empty_mask = PointSet(role="data", points=pts, values=np.zeros((1, 9)),
                          mask=np.zeros((1, 9), dtype=bool))
    with pytest.raises(ConfigurationError):
        data_loss(small_theta, small_arch, empty_mask, hertz_transform())


def test_contact_losses_vanish_for_the_resting_state(patch_sets_small):
    """Zero parameters leave the box undeformed under uniform pressure: zero gap
    with compressive pressure satisfies complementarity identically."""
    arch = Architecture(hidden_layers=1, hidden_width=4)
    sliding, kkt = contact_losses(np.zeros(arch.n_params), arch,
                                  patch_sets_small["contact"], patch_transform(), FLOOR)
    assert sliding == 0.0
    assert kkt == 0.0


def test_contact_losses_match_exact_solution(patch_sets_small):
    arch, theta = exact_patch_params()
    sliding, kkt = contact_losses(theta, arch, patch_sets_small["contact"],
                                  patch_transform(), FLOOR)
    assert sliding == 0.0
    assert kkt < 1e-30


def test_uniform_liftoff_with_pressure_penalty_value():
    """Open gap with compressive pressure violates complementarity; the residual
    value is the classic 2 - sqrt(2) at gap 1 and pressure -1."""
    r = float(kkt_residual(1.0, -1.0))
    assert r == pytest.approx(2.0 - np.sqrt(2.0), rel=1e-15)
    w = LossWeights.hertz_defaults().kkt
    assert w * r**2 == pytest.approx(500.0 * (2.0 - np.sqrt(2.0)) ** 2, rel=1e-15)


def test_assembler_validates_inputs(small_arch, patch_material, patch_sets_small):
    transform = patch_transform()
    with pytest.raises(ConfigurationError):
        LossAssembler(small_arch, patch_material, transform, {})  # no interior
    with pytest.raises(ConfigurationError):
        LossAssembler(small_arch, patch_material, transform,
                      {"interior": patch_sets_small["interior"],
                       "contact": patch_sets_small["contact"]})  # no plane
    bare = PointSet(role="neumann_soft", points=np.zeros((2, 3)))
    with pytest.raises(ConfigurationError):
        LossAssembler(small_arch, patch_material, transform,
                      {"interior": patch_sets_small["interior"],
                       "neumann_soft": bare})  # missing normals
    stress_mask = np.zeros((1, 9), dtype=bool)
    stress_mask[0, 4] = True
    bad_dirichlet = PointSet(role="dirichlet", points=np.zeros((1, 3)),
                             values=np.zeros((1, 9)), mask=stress_mask)
    with pytest.raises(ConfigurationError):
        LossAssembler(small_arch, patch_material, transform,
                      {"interior": patch_sets_small["interior"],
                       "dirichlet": bad_dirichlet})


def test_enhanced_assembly_differs_only_in_the_data_part(small_arch, hertz_material,
                                                         hertz_sets_small):
    sets = {k: v for k, v in hertz_sets_small.items() if k != "evaluation"}
    plane = RigidPlane.horizontal(-1.0)
    weights = LossWeights.hertz_defaults()
    theta = init_glorot_uniform(small_arch, seed=0)
    plain = LossAssembler(small_arch, hertz_material, hertz_transform(), sets,
                          weights, plane=plane)
    with_data = LossAssembler(small_arch, hertz_material, hertz_transform(),
                              {**sets, "data": hertz_data_lines(points_per_line=4)},
                              weights, plane=plane)
    b1 = plain.breakdown(theta)
    b2 = with_data.breakdown(theta)
    assert b1.data == 0.0
    assert b2.data > 0.0
    for part in ("pde_momentum", "pde_coupling", "dirichlet", "neumann", "sliding", "kkt"):
        assert getattr(b1, part) == getattr(b2, part), part
    assert b2.total == pytest.approx(b1.total + b2.data, rel=1e-15)


def test_gradient_matches_finite_differences_on_miniatures():
    for benchmark in ("patch", "hertz"):
        result = checks.check_gradient_oracle(benchmark)
        assert result.passed, result.detail


def test_provider_returns_breakdown_and_gradient(small_arch, small_theta,
                                                 patch_material, patch_sets_small):
    assembler = LossAssembler(
        small_arch, patch_material, patch_transform(),
        {k: v for k, v in patch_sets_small.items() if k != "evaluation"},
        plane=FLOOR)
    provider = make_provider(assembler)
    bd, grad = provider(small_theta)
    assert isinstance(bd, LossBreakdown)
    assert grad.shape == (small_theta.size,)
    bd2, grad2 = provider(small_theta)
    assert bd.as_dict() == bd2.as_dict()
    np.testing.assert_array_equal(grad, grad2)


def test_contact_diagnostics_of_the_resting_state(patch_material, patch_sets_small):
    arch = Architecture(hidden_layers=1, hidden_width=4)
    assembler = LossAssembler(
        arch, patch_material, patch_transform(),
        {k: v for k, v in patch_sets_small.items() if k != "evaluation"},
        plane=FLOOR)
    diag = assembler.contact_diagnostics(np.zeros(arch.n_params))
    assert diag["min_gap"] == 0.0
    assert diag["max_pressure"] == -0.1
    assert diag["max_abs_gap_pressure"] == 0.0
    assert diag["max_pressure_magnitude"] == 0.1
