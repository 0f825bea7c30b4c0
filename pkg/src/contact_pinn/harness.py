"""End-to-end benchmark runs: configuration, training, metrics, exports.

A RunConfig fully determines a run (benchmark, seed, sampling counts,
architecture, optimizer settings), and identical configs reproduce reports
bitwise.  Runs write a JSON report, a CSV/VTK field export on the
evaluation set, a training-log CSV, and a parameter checkpoint into the
configured output directory.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, fields, replace
from pathlib import Path

import numpy as np

from . import analytic, geometry, network, optimize
from .autodiff import ConfigurationError
from .contact import RigidPlane
from .elasticity import MaterialParams
from .geometry import HertzCounts, HertzDomain, PatchCounts, PatchDomain, PointSet
from .loss import LossAssembler, LossWeights, make_provider
from .network import Architecture

SCHEMA_VERSION = 1

FIELD_NAMES = ("ux", "uy", "uz", "sxx", "syy", "szz", "sxy", "syz", "sxz")
CSV_HEADER = "x,y,z,ux,uy,uz,sxx,syy,szz,sxy,syz,sxz"


@dataclass(frozen=True)
class RunConfig:
    """Flat, file-serializable description of one benchmark run."""

    benchmark: str = "patch"
    data_enhanced: bool = False
    seed: int = 0
    hidden_layers: int = 5
    hidden_width: int = 50
    interior_points: int = 2000
    contact_points: int = 400
    curved_points: int = 1000
    evaluation_grid: int = 21
    evaluation_points: int = 200
    young_modulus: float = 1.33
    poisson_ratio: float = 0.33
    kkt_weight: float = 1.0
    adam_epochs: int = 2000
    adam_learning_rate: float = 0.001
    lbfgs_memory: int = 50
    lbfgs_max_iterations: int = 15000
    lbfgs_gradient_tol: float = 1e-8
    log_every: int = 10
    output_dir: str = "runs/patch"

    def __post_init__(self):
        if self.benchmark not in ("patch", "hertz"):
            raise ConfigurationError(f"unknown benchmark {self.benchmark!r}")
        if self.data_enhanced and self.benchmark != "hertz":
            raise ConfigurationError("data_enhanced applies to the hertz benchmark only")

    def architecture(self) -> Architecture:
        return Architecture(hidden_layers=self.hidden_layers,
                            hidden_width=self.hidden_width)

    def material(self) -> MaterialParams:
        return MaterialParams(young_modulus=self.young_modulus,
                              poisson_ratio=self.poisson_ratio)

    def weights(self) -> LossWeights:
        return LossWeights(kkt=self.kkt_weight)

    def adam_config(self) -> optimize.AdamConfig:
        return optimize.AdamConfig(learning_rate=self.adam_learning_rate,
                                   epochs=self.adam_epochs)

    def lbfgs_config(self) -> optimize.LbfgsConfig:
        return optimize.LbfgsConfig(memory=self.lbfgs_memory,
                                    max_iterations=self.lbfgs_max_iterations,
                                    gradient_tol=self.lbfgs_gradient_tol)


def default_config(benchmark: str, data_enhanced: bool = False,
                   seed: int = 0) -> RunConfig:
    """Benchmark defaults; the hertz run upweights the complementarity term."""
    if benchmark == "patch":
        return RunConfig(benchmark="patch", seed=seed, output_dir="runs/patch")
    if benchmark == "hertz":
        return RunConfig(
            benchmark="hertz", data_enhanced=data_enhanced, seed=seed,
            interior_points=5000, contact_points=500,
            young_modulus=200.0, poisson_ratio=0.3, kkt_weight=500.0,
            output_dir="runs/hertz_data" if data_enhanced else "runs/hertz")
    raise ConfigurationError(f"unknown benchmark {benchmark!r}")


def write_config(config: RunConfig, path) -> None:
    """Flat key = value text form of a RunConfig."""
    with open(path, "w") as fh:
        fh.write("# benchmark run configuration (key = value per line)\n")
        for f in fields(config):
            v = getattr(config, f.name)
            if isinstance(v, bool):
                v = "true" if v else "false"
            fh.write(f"{f.name} = {v}\n")


def read_config(path) -> RunConfig:
    """Parse the flat key = value format written by write_config."""
    raw: dict[str, str] = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ConfigurationError(f"{path}:{lineno}: expected 'key = value'")
            key, _, value = line.partition("=")
            raw[key.strip()] = value.strip()
    return apply_overrides(RunConfig(), raw)


def apply_overrides(config: RunConfig, overrides: dict[str, str]) -> RunConfig:
    """Override config fields from string values (config file or CLI flags)."""
    typed = {}
    by_name = {f.name: f for f in fields(RunConfig)}
    for key, value in overrides.items():
        f = by_name.get(key)
        if f is None:
            raise ConfigurationError(f"unknown config key {key!r}")
        if f.type in ("bool", bool):
            low = str(value).strip().lower()
            if low not in ("true", "false", "1", "0", "yes", "no"):
                raise ConfigurationError(f"config key {key}: expected boolean, got {value!r}")
            typed[key] = low in ("true", "1", "yes")
        elif f.type in ("int", int):
            typed[key] = int(value)
        elif f.type in ("float", float):
            typed[key] = float(value)
        else:
            typed[key] = str(value)
    return replace(config, **typed)


# -- metrics ---------------------------------------------------------------


def relative_l2(pred, truth) -> float:
    """100 * ||pred - truth||_2 / ||truth||_2."""
    pred = np.asarray(pred, dtype=np.float64).ravel()
    truth = np.asarray(truth, dtype=np.float64).ravel()
    if pred.shape != truth.shape or pred.size == 0:
        raise ConfigurationError("prediction and truth must be equal-length, nonempty")
    denom = np.linalg.norm(truth)
    if denom == 0.0:
        raise ValueError("relative L2 undefined for all-zero truth")
    return float(100.0 * np.linalg.norm(pred - truth) / denom)


@dataclass(frozen=True)
class BenchmarkReport:
    """Computed metrics and artifact paths of one finished run."""

    benchmark: str
    data_enhanced: bool
    seed: int
    rel_l2: dict
    max_contact_pressure: float
    kkt_violations: dict
    termination_reason: str
    final_loss: dict
    artifacts: dict

    def as_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "benchmark": self.benchmark,
            "data_enhanced": self.data_enhanced,
            "seed": self.seed,
            "rel_l2": self.rel_l2,
            "max_contact_pressure": self.max_contact_pressure,
            "kkt_violations": self.kkt_violations,
            "termination_reason": self.termination_reason,
            "final_loss": self.final_loss,
            "artifacts": self.artifacts,
        }

    def write_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.as_dict(), fh, indent=2)
            fh.write("\n")


# -- field export ------------------------------------------------------------


def predict_fields(theta, arch: Architecture, transform, points) -> np.ndarray:
    """Transformed 9-component fields at points (n, 3) -> (n, 9)."""
    values, _ = network.transformed_fields(theta, arch, transform, points)
    return values


def polar_stresses(points, values) -> np.ndarray:
    """(srr, stt) about the cylinder axis (the z axis through the origin).

    e_r = (x, y)/r, e_t = (-y, x)/r; srr = e_r . sigma . e_r and likewise
    stt.  On the axis (r = 0) the radial direction degenerates; the downward
    vertical is used there so srr falls back to syy.
    """
    pts = np.asarray(points, dtype=np.float64)
    x, y = pts[:, 0], pts[:, 1]
    r = np.hypot(x, y)
    safe = np.where(r > 0.0, r, 1.0)
    cx = np.where(r > 0.0, x / safe, 0.0)
    cy = np.where(r > 0.0, y / safe, -1.0)
    sxx, syy, sxy = values[:, 3], values[:, 4], values[:, 6]
    srr = cx * cx * sxx + 2.0 * cx * cy * sxy + cy * cy * syy
    stt = cy * cy * sxx - 2.0 * cx * cy * sxy + cx * cx * syy
    return np.column_stack([srr, stt])


def _fmt(v: float) -> str:
    return f"{v:.17g}"


def export_fields(theta, arch: Architecture, transform, point_set: PointSet,
                  base_path, polar: bool = False) -> dict:
    """Write evaluated fields as CSV (exact 12-column schema) and legacy VTK.

    For cylinder benchmarks (polar=True) an extra CSV with polar stress
    components about the cylinder axis is written alongside.
    Returns {kind: path} of everything written.
    """
    base = Path(base_path)
    base.parent.mkdir(parents=True, exist_ok=True)
    pts = point_set.points
    values = predict_fields(theta, arch, transform, pts)
    artifacts = {}

    csv_path = base.with_suffix(".csv")
    with open(csv_path, "w") as fh:
        fh.write(CSV_HEADER + "\n")
        for p, v in zip(pts, values):
            fh.write(",".join(_fmt(c) for c in (*p, *v)) + "\n")
    artifacts["csv"] = str(csv_path)

    extra = {}
    if polar:
        pol = polar_stresses(pts, values)
        polar_path = base.parent / (base.name + "_polar.csv")
        with open(polar_path, "w") as fh:
            fh.write("x,y,z,srr,stt\n")
            for p, v in zip(pts, pol):
                fh.write(",".join(_fmt(c) for c in (*p, *v)) + "\n")
        artifacts["polar_csv"] = str(polar_path)
        extra = {"srr": pol[:, 0], "stt": pol[:, 1]}

    vtk_path = base.with_suffix(".vtk")
    _write_legacy_vtk(vtk_path, pts, values, extra)
    artifacts["vtk"] = str(vtk_path)
    return artifacts


def _write_legacy_vtk(path, points, values, extra_arrays: dict) -> None:
    """Legacy ASCII VTK point cloud with one array per field component."""
    n = points.shape[0]
    arrays = {name: values[:, i] for i, name in enumerate(FIELD_NAMES)}
    arrays.update(extra_arrays)
    with open(path, "w") as fh:
        fh.write("# vtk DataFile Version 3.0\n")
        fh.write("mixed-variable contact solver fields\n")
        fh.write("ASCII\nDATASET UNSTRUCTURED_GRID\n")
        fh.write(f"POINTS {n} double\n")
        for p in points:
            fh.write(f"{_fmt(p[0])} {_fmt(p[1])} {_fmt(p[2])}\n")
        fh.write(f"CELLS {n} {2 * n}\n")
        for i in range(n):
            fh.write(f"1 {i}\n")
        fh.write(f"CELL_TYPES {n}\n")
        for _ in range(n):
            fh.write("1\n")
        fh.write(f"POINT_DATA {n}\n")
        fh.write("VECTORS displacement double\n")
        for v in values:
            fh.write(f"{_fmt(v[0])} {_fmt(v[1])} {_fmt(v[2])}\n")
        for name, arr in arrays.items():
            if name in ("ux", "uy", "uz"):
                continue
            fh.write(f"SCALARS {name} double 1\nLOOKUP_TABLE default\n")
            for v in arr:
                fh.write(f"{_fmt(v)}\n")


def read_fields_csv(path) -> tuple[np.ndarray, np.ndarray]:
    """Parse an export CSV back into (points (n,3), values (n,9))."""
    with open(path) as fh:
        header = fh.readline().strip()
        if header != CSV_HEADER:
            raise ConfigurationError(f"unexpected CSV header {header!r}")
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    return data[:, :3], data[:, 3:]


# -- benchmark assembly ------------------------------------------------------


@dataclass
class BenchmarkSetup:
    """Everything run_benchmark needs besides the optimizer settings."""

    material: MaterialParams
    transform: object
    plane: RigidPlane
    train_sets: dict
    evaluation: PointSet
    weights: LossWeights
    domain: object


def patch_setup(config: RunConfig) -> BenchmarkSetup:
    domain = PatchDomain()
    counts = PatchCounts(interior=config.interior_points,
                         contact=config.contact_points,
                         evaluation_grid=config.evaluation_grid)
    sets = geometry.sample_patch(counts, seed=config.seed, domain=domain)
    transform = network.patch_transform(length=domain.length, height=domain.height,
                                        depth=domain.depth, pressure=domain.pressure)
    return BenchmarkSetup(
        material=config.material(),
        transform=transform,
        plane=RigidPlane.horizontal(0.0),
        train_sets={k: v for k, v in sets.items() if k != "evaluation"},
        evaluation=sets["evaluation"],
        weights=config.weights(),
        domain=domain,
    )


def hertz_setup(config: RunConfig) -> BenchmarkSetup:
    domain = HertzDomain()
    counts = HertzCounts(interior=config.interior_points,
                         curved=config.curved_points,
                         contact=config.contact_points,
                         evaluation=config.evaluation_points)
    sets = geometry.sample_hertz(counts, seed=config.seed, domain=domain)
    transform = network.hertz_transform(young_modulus=config.young_modulus,
                                        pressure=domain.pressure,
                                        width=domain.width)
    train_sets = {k: v for k, v in sets.items() if k != "evaluation"}
    if config.data_enhanced:
        train_sets["data"] = geometry.hertz_data_lines(
            domain, config.young_modulus, config.poisson_ratio)
    return BenchmarkSetup(
        material=config.material(),
        transform=transform,
        plane=RigidPlane.horizontal(domain.plane_height),
        train_sets=train_sets,
        evaluation=sets["evaluation"],
        weights=config.weights(),
        domain=domain,
    )


def _setup_for(config: RunConfig) -> BenchmarkSetup:
    return patch_setup(config) if config.benchmark == "patch" else hertz_setup(config)


def _patch_metrics(values, setup: BenchmarkSetup, config: RunConfig) -> dict:
    u_true, s_true = analytic.patch_solution(
        setup.evaluation.points, config.young_modulus, config.poisson_ratio,
        setup.domain.pressure)
    return {
        "ux": relative_l2(values[:, 0], u_true[:, 0]),
        "uy": relative_l2(values[:, 1], u_true[:, 1]),
        "uz": relative_l2(values[:, 2], u_true[:, 2]),
        "syy": relative_l2(values[:, 4], s_true[:, 1]),
    }


def _hertz_metrics(values, setup: BenchmarkSetup, config: RunConfig) -> dict:
    consts = analytic.hertz_constants(config.young_modulus, config.poisson_ratio,
                                      setup.domain.radius, setup.domain.width,
                                      setup.domain.pressure)
    depth = setup.evaluation.points[:, 1] + setup.domain.radius
    sxx_t, syy_t, szz_t, tau_t = analytic.hertz_stress_profile(
        depth, consts, config.poisson_ratio)
    tau_pred = analytic.max_shear_stress(values[:, 3], values[:, 4], values[:, 5],
                                         depth, consts.half_width)
    return {
        "sxx": relative_l2(values[:, 3], sxx_t),
        "syy": relative_l2(values[:, 4], syy_t),
        "szz": relative_l2(values[:, 5], szz_t),
        "tau_max": relative_l2(tau_pred, tau_t),
    }


def run_benchmark(config: RunConfig, quiet: bool = True) -> BenchmarkReport:
    """Sample, train, evaluate against the analytical reference, export."""
    outdir = Path(config.output_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    setup = _setup_for(config)
    arch = config.architecture()
    theta0 = network.init_glorot_uniform(arch, config.seed)
    assembler = LossAssembler(arch, setup.material, setup.transform,
                              setup.train_sets, setup.weights, plane=setup.plane)
    provider = make_provider(assembler)

    log = optimize.TrainingLog()
    try:
        result = optimize.train(provider, theta0, config.adam_config(),
                                config.lbfgs_config(), log_every=config.log_every,
                                log=log)
    except optimize.TrainingDiverged:
        log.write_csv(outdir / "training_log.csv")  # keep partial logs for diagnosis
        raise

    theta = result.theta
    values = predict_fields(theta, arch, setup.transform, setup.evaluation.points)
    metrics = (_patch_metrics if config.benchmark == "patch" else _hertz_metrics)(
        values, setup, config)
    diag = assembler.contact_diagnostics(theta)
    final_bd = assembler.breakdown(theta)

    artifacts = export_fields(theta, arch, setup.transform, setup.evaluation,
                              outdir / "fields", polar=config.benchmark == "hertz")
    log.write_csv(outdir / "training_log.csv")
    artifacts["training_log"] = str(outdir / "training_log.csv")
    optimize.save_checkpoint(outdir / "checkpoint.bin", theta, arch, config.seed)
    artifacts["checkpoint"] = str(outdir / "checkpoint.bin")
    config_path = outdir / "config.txt"
    write_config(config, config_path)
    artifacts["config"] = str(config_path)

    report = BenchmarkReport(
        benchmark=config.benchmark,
        data_enhanced=config.data_enhanced,
        seed=config.seed,
        rel_l2=metrics,
        max_contact_pressure=diag["max_pressure_magnitude"],
        kkt_violations={k: diag[k] for k in ("min_gap", "max_pressure",
                                             "max_abs_gap_pressure")},
        termination_reason=result.termination_reason,
        final_loss=final_bd.as_dict(),
        artifacts=artifacts,
    )
    report.write_json(outdir / "report.json")
    if not quiet:
        for name, err in metrics.items():
            print(f"rel_l2[{name}] = {err:.6f}%")
    return report
