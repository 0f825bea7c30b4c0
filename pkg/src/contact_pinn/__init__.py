"""Mesh-free mixed-variable solver for 3D frictionless contact problems.

A tanh network maps coordinates to displacement and stress fields; hard
polynomial output transforms pin Dirichlet/Neumann data, interior residuals
enforce momentum balance and the constitutive coupling, and rigid-plane
contact enters through Fischer-Burmeister complementarity residuals.  Two
built-in benchmarks (compression patch test, half-cylinder line contact)
train end to end and score against closed-form references.

Submodule imports stay lazy so the CLI can cap BLAS threads before numpy
loads.
"""

__version__ = "0.1.0"

_EXPORTS = {
    "Architecture": ".network",
    "init_glorot_uniform": ".network",
    "patch_transform": ".network",
    "hertz_transform": ".network",
    "transformed_fields": ".network",
    "MaterialParams": ".elasticity",
    "RigidPlane": ".contact",
    "fischer_burmeister": ".contact",
    "PointSet": ".geometry",
    "sample_patch": ".geometry",
    "sample_hertz": ".geometry",
    "hertz_data_lines": ".geometry",
    "LossAssembler": ".loss",
    "LossWeights": ".loss",
    "LossBreakdown": ".loss",
    "make_provider": ".loss",
    "AdamConfig": ".optimize",
    "LbfgsConfig": ".optimize",
    "adam_run": ".optimize",
    "lbfgs_run": ".optimize",
    "train": ".optimize",
    "hertz_constants": ".analytic",
    "hertz_stress_profile": ".analytic",
    "patch_solution": ".analytic",
    "RunConfig": ".harness",
    "BenchmarkReport": ".harness",
    "default_config": ".harness",
    "run_benchmark": ".harness",
    "relative_l2": ".harness",
    "export_fields": ".harness",
}

__all__ = sorted(_EXPORTS) + ["__version__"]


def __getattr__(name):
    module = _EXPORTS.get(name)
    if module is None:
        raise AttributeError(f"module {__name__!r} has no attribute {name!r}")
    import importlib

    return getattr(importlib.import_module(module, __name__), name)
