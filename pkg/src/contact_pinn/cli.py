"""Command-line interface: run benchmarks, verify invariants, export configs.

CONTACT_PINN_THREADS caps the BLAS/OpenMP worker threads; it must take
effect before numpy is first imported, which is why this module applies it
at import time and the package __init__ stays import-light.
"""

from __future__ import annotations

import argparse
import os
import sys


def _apply_thread_cap() -> None:
    cap = os.environ.get("CONTACT_PINN_THREADS")
    if not cap:
        return
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS",
                "NUMEXPR_NUM_THREADS"):
        os.environ.setdefault(var, cap)


_apply_thread_cap()

from . import checks, harness  # noqa: E402  (thread cap must precede numpy)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="contact-pinn",
        description="Train mixed-variable contact solvers and verify their invariants.")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="train a benchmark end to end")
    run.add_argument("benchmark", choices=("patch", "hertz"))
    run.add_argument("--data-enhanced", action="store_true",
                     help="add the reference stress data lines (hertz only)")
    run.add_argument("--config", help="flat key = value config file")
    run.add_argument("--seed", type=int, help="override the run seed")
    run.add_argument("--output-dir", help="override the output directory")
    run.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                     help="override any config key (repeatable)")

    sub.add_parser("verify", help="run the fast invariant/oracle suites")

    exp = sub.add_parser("export-config", help="write a default configuration file")
    exp.add_argument("benchmark", choices=("patch", "hertz"))
    exp.add_argument("--data-enhanced", action="store_true")
    exp.add_argument("--out", default="config.txt", help="destination path")
    return parser


def _config_from_args(args) -> harness.RunConfig:
    if args.config:
        config = harness.read_config(args.config)
        overrides = {}
        if config.benchmark != args.benchmark:
            overrides["benchmark"] = args.benchmark
    else:
        config = harness.default_config(args.benchmark, data_enhanced=args.data_enhanced)
        overrides = {}
    if args.data_enhanced:
        overrides["data_enhanced"] = "true"
    if args.seed is not None:
        overrides["seed"] = str(args.seed)
    if args.output_dir:
        overrides["output_dir"] = args.output_dir
    for item in args.set:
        if "=" not in item:
            raise harness.ConfigurationError(f"--set expects KEY=VALUE, got {item!r}")
        key, _, value = item.partition("=")
        overrides[key.strip()] = value.strip()
    return harness.apply_overrides(config, overrides)


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    if args.command == "run":
        try:
            config = _config_from_args(args)
        except (harness.ConfigurationError, ValueError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 2
        report = harness.run_benchmark(config, quiet=False)
        print(f"benchmark: {report.benchmark}"
              + (" (data-enhanced)" if report.data_enhanced else ""))
        print(f"termination: {report.termination_reason}")
        print(f"max contact pressure magnitude: {report.max_contact_pressure:.6f}")
        print(f"report: {os.path.join(config.output_dir, 'report.json')}")
        return 0
    if args.command == "verify":
        results = checks.run_all()
        failed = 0
        for name, passed, detail in results:
            status = "PASS" if passed else "FAIL"
            suffix = f" ({detail})" if detail else ""
            print(f"[{status}] {name}{suffix}")
            failed += 0 if passed else 1
        print(f"{len(results) - failed}/{len(results)} checks passed")
        return 0 if failed == 0 else 1
    if args.command == "export-config":
        config = harness.default_config(args.benchmark, data_enhanced=args.data_enhanced)
        harness.write_config(config, args.out)
        print(f"wrote {args.out}")
        return 0
    return 2


if __name__ == "__main__":
    sys.exit(main())
