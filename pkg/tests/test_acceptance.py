"""End-to-end acceptance suite.

Eight numbered criteria: fast property checks, gradient oracles, analytical
constants, and full training runs of both benchmarks (the two cylinder runs
take tens of minutes each on one core).  Each test prints a single
"[criterion N] PASS/FAIL" line.
"""

import time

import numpy as np
import pytest

from contact_pinn import analytic, checks
from contact_pinn.harness import (
    apply_overrides,
    default_config,
    read_fields_csv,
    relative_l2,
    run_benchmark,
)

PEAK_PRESSURE_QUOTED = 8.36  # 3-significant-figure analytical peak pressure


def _criterion(number: int, passed: bool, detail: str) -> None:
    status = "PASS" if passed else "FAIL"
    print(f"[criterion {number}] {status}: {detail}")
    assert passed, f"criterion {number} failed: {detail}"


@pytest.fixture(scope="module")
def patch_report(tmp_path_factory):
    config = apply_overrides(default_config("patch"), {
        "output_dir": str(tmp_path_factory.mktemp("patch_run"))})
    return run_benchmark(config)


@pytest.fixture(scope="module")
def hertz_vanilla_report(tmp_path_factory):
    config = apply_overrides(default_config("hertz"), {
        "output_dir": str(tmp_path_factory.mktemp("hertz_run"))})
    return run_benchmark(config)


@pytest.fixture(scope="module")
def hertz_enhanced_report(tmp_path_factory):
    config = apply_overrides(default_config("hertz", data_enhanced=True), {
        "output_dir": str(tmp_path_factory.mktemp("hertz_data_run"))})
    return run_benchmark(config)


def test_criterion_1_property_suite_is_fast_and_green():
    start = time.perf_counter()
    results = [
        checks.check_fb_equivalence(),
        checks.check_fb_origin_gradient(),
        checks.check_hooke_identities(),
        checks.check_momentum_linear_field(),
        checks.check_patch_hard_constraints(),
        checks.check_hertz_hard_constraints(),
        checks.check_glorot_bounds(),
    ]
    elapsed = time.perf_counter() - start
    failed = [r.name for r in results if not r.passed]
    _criterion(1, not failed and elapsed < 60.0,
               f"{len(results)} property checks in {elapsed:.2f}s"
               + (f", failed: {failed}" if failed else ""))


def test_criterion_2_gradient_matches_finite_differences():
    patch = checks.check_gradient_oracle("patch")
    hertz = checks.check_gradient_oracle("hertz")
    _criterion(2, patch.passed and hertz.passed,
               f"patch: {patch.detail}; hertz: {hertz.detail}")


def test_criterion_3_analytical_constants():
    consts = analytic.hertz_constants()
    ok = (round(consts.half_width, 3) == 0.076
          and round(consts.peak_pressure, 2) == PEAK_PRESSURE_QUOTED)
    _criterion(3, ok, f"half_width={consts.half_width:.6f} (want 0.076), "
               f"peak_pressure={consts.peak_pressure:.4f} (want 8.36)")


def test_criterion_4_patch_accuracy_and_contact_conditions(patch_report):
    errs = patch_report.rel_l2
    kkt = patch_report.kkt_violations
    ok = (all(errs[k] < 1.0 for k in ("ux", "uy", "uz", "syy"))
          and kkt["min_gap"] > -1e-3
          and kkt["max_pressure"] < 1e-3
          and kkt["max_abs_gap_pressure"] < 1e-4)
    detail = (", ".join(f"{k}={errs[k]:.4f}%" for k in ("ux", "uy", "uz", "syy"))
              + f"; min_gap={kkt['min_gap']:.2e}, max_pressure={kkt['max_pressure']:.2e}"
              + f", max|gap*p|={kkt['max_abs_gap_pressure']:.2e}")
    _criterion(4, ok, detail)


def test_criterion_5_hertz_vanilla_stress_errors(hertz_vanilla_report):
    errs = hertz_vanilla_report.rel_l2
    ok = all(errs[k] <= 10.0 for k in ("sxx", "syy", "szz", "tau_max"))
    _criterion(5, ok, ", ".join(
        f"{k}={errs[k]:.3f}%" for k in ("sxx", "syy", "szz", "tau_max")))


def test_criterion_6_hertz_data_enhanced_stress_errors(hertz_vanilla_report,
                                                       hertz_enhanced_report):
    plain = hertz_vanilla_report.rel_l2
    rich = hertz_enhanced_report.rel_l2
    keys = ("sxx", "syy", "szz", "tau_max")
    ok = (all(rich[k] <= 1.0 for k in keys)
          and all(rich[k] < plain[k] for k in keys))
    _criterion(6, ok, ", ".join(
        f"{k}={rich[k]:.3f}% (vanilla {plain[k]:.3f}%)" for k in keys))


def test_criterion_7_peak_contact_pressure(hertz_enhanced_report):
    peak = hertz_enhanced_report.max_contact_pressure
    ok = abs(peak - PEAK_PRESSURE_QUOTED) <= 0.05 * PEAK_PRESSURE_QUOTED
    _criterion(7, ok, f"max predicted pressure magnitude {peak:.4f}, "
               f"analytical {PEAK_PRESSURE_QUOTED} (5% band)")


def test_criterion_8_reports_are_bitwise_reproducible(tmp_path_factory):
    # A reduced-scale run keeps this double execution quick; it goes through
    # exactly the same sample -> train -> evaluate -> report pipeline.
    overrides = {
        "hidden_layers": "2", "hidden_width": "16", "interior_points": "300",
        "contact_points": "64", "evaluation_grid": "5", "adam_epochs": "200",
        "lbfgs_max_iterations": "300", "log_every": "50",
    }
    reports = []
    for name in ("repeat_a", "repeat_b"):
        config = apply_overrides(default_config("patch"), {
            **overrides, "output_dir": str(tmp_path_factory.mktemp(name))})
        reports.append(run_benchmark(config))
    same = reports[0].rel_l2 == reports[1].rel_l2
    _criterion(8, same, "two identical runs gave rel_l2 "
               + ("bitwise equal" if same else
                  f"{reports[0].rel_l2} vs {reports[1].rel_l2}"))


# -- report/export consistency (not numbered criteria) ----------------------


def test_patch_report_matches_exported_fields(patch_report):
    pts, values = read_fields_csv(patch_report.artifacts["csv"])
    u_true, s_true = analytic.patch_solution(pts)
    recomputed = {
        "ux": relative_l2(values[:, 0], u_true[:, 0]),
        "uy": relative_l2(values[:, 1], u_true[:, 1]),
        "uz": relative_l2(values[:, 2], u_true[:, 2]),
        "syy": relative_l2(values[:, 4], s_true[:, 1]),
    }
    for key, value in recomputed.items():
        assert value == pytest.approx(patch_report.rel_l2[key], rel=1e-12), key


def test_hertz_report_matches_exported_fields(hertz_vanilla_report):
    pts, values = read_fields_csv(hertz_vanilla_report.artifacts["csv"])
    consts = analytic.hertz_constants()
    depth = pts[:, 1] + 1.0
    sxx_t, syy_t, szz_t, tau_t = analytic.hertz_stress_profile(depth, consts)
    tau_pred = analytic.max_shear_stress(values[:, 3], values[:, 4], values[:, 5],
                                         depth, consts.half_width)
    recomputed = {
        "sxx": relative_l2(values[:, 3], sxx_t),
        "syy": relative_l2(values[:, 4], syy_t),
        "szz": relative_l2(values[:, 5], szz_t),
        "tau_max": relative_l2(tau_pred, tau_t),
    }
    for key, value in recomputed.items():
        assert value == pytest.approx(hertz_vanilla_report.rel_l2[key],
                                      rel=1e-12), key


def test_patch_training_reaches_a_tiny_loss(patch_report):
    assert patch_report.final_loss["total"] < 1e-5
    assert np.isfinite(patch_report.final_loss["total"])
