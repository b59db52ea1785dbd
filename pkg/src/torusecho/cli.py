"""Command-line interface.

Subcommands:

* run          -- execute an experiment (preset, config file, or flags)
* presets      -- list built-in presets or emit one as a config file
* validate     -- check a config file and report every violation
* shadow       -- shadowing diagnostics for a given map
* oracle-check -- cross-validate the split-operator against the dense oracle

Exit codes: 0 success, 1 self-test failure, 2 invalid input or config,
3 capacity refused, 4 I/O error. TORUSECHO_MAX_WORKERS caps --threads.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from .dynamics import MapSpec
from .errors import CapacityError, ConfigValidationError, InvalidInputError
from .harness import (
    PRESETS,
    _FIELD_PARSERS,
    _parse_value,
    ExperimentConfig,
    load_config,
    check_config,
    run_experiment,
)
from .initial_states import PositionEigenstate
from .quantum import dense_oracle, exact_fidelity_curve
from .shadowing import shadow_survey, shadow_time_estimate

_ENV_MAX_WORKERS = "TORUSECHO_MAX_WORKERS"

# (dim_n, k, epsilon) combos exercised by oracle-check
_ORACLE_COMBOS = tuple(
    (n, k, eps) for n in (16, 64, 128) for (k, eps) in ((0.8, 5e-3), (10.0, 2e-3))
)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="torusecho",
        description="Fidelity decay of perturbed kicked torus maps: "
        "semiclassical dephasing vs exact quantum propagation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment")
    src = run.add_mutually_exclusive_group()
    src.add_argument("--preset", choices=sorted(PRESETS), help="start from a preset")
    src.add_argument("--config", help="start from a key = value config file")
    for key in _FIELD_PARSERS:
        flag = "--" + key.replace("_", "-")
        run.add_argument(flag, dest=f"cfg_{key}", default=None, metavar="V",
                         help=f"override {key}")
    run.set_defaults(func=_cmd_run)

    presets = sub.add_parser("presets", help="list presets or emit one as a config")
    presets.add_argument("--emit", metavar="NAME", help="print NAME as a config file body")
    presets.set_defaults(func=_cmd_presets)

    val = sub.add_parser("validate", help="validate a config file")
    val.add_argument("--config", required=True, help="config file to check")
    val.set_defaults(func=_cmd_validate)

    shadow = sub.add_parser("shadow", help="shadowing diagnostics")
    shadow.add_argument("--k", type=float, default=0.8)
    shadow.add_argument("--epsilon", type=float, default=5e-3)
    shadow.add_argument("--dim-n", type=int, default=1000)
    shadow.add_argument("--count", type=int, default=32, help="number of orbits")
    shadow.add_argument("--steps", type=int, default=None,
                        help="segment length (default: the epsilon^-1/2 horizon)")
    shadow.add_argument("--seed", type=int, default=0)
    shadow.add_argument("--tol", type=float, default=1e-9)
    shadow.add_argument("--max-iter", type=int, default=40)
    shadow.set_defaults(func=_cmd_shadow)

    oracle = sub.add_parser(
        "oracle-check",
        help="cross-check split-operator vs dense propagation on small grids",
    )
    oracle.add_argument("--steps", type=int, default=30)
    oracle.add_argument("--tol", type=float, default=1e-9)
    oracle.set_defaults(func=_cmd_oracle_check)
    return parser


def _assemble_config(args) -> ExperimentConfig:
    if args.preset:
        base = PRESETS[args.preset]
    elif args.config:
        base = load_config(args.config)
    else:
        base = ExperimentConfig()
    changes = {}
    problems = []
    for key in _FIELD_PARSERS:
        raw = getattr(args, f"cfg_{key}")
        if raw is None:
            continue
        try:
            changes[key] = _parse_value(key, raw)
        except ValueError:
            problems.append(f"flag --{key.replace('_', '-')}: cannot parse {raw!r}")
    if problems:
        raise ConfigValidationError(problems)
    config = base.replace(**changes) if changes else base
    return _cap_threads(config)


def _cap_threads(config: ExperimentConfig) -> ExperimentConfig:
    raw = os.environ.get(_ENV_MAX_WORKERS)
    if raw is None:
        return config
    try:
        cap = int(raw)
    except ValueError:
        cap = -1
    if cap < 1:
        raise ConfigValidationError(
            [f"{_ENV_MAX_WORKERS} must be a positive integer, got {raw!r}"]
        )
    if config.threads > cap:
        return config.replace(threads=cap)
    return config


def _cmd_run(args) -> int:
    config = _assemble_config(args)
    result = run_experiment(config)
    for method, curve in result.curves.items():
        final = curve.fidelity[-1]
        extra = f", samples = {curve.sample_count}" if method == "dr" else ""
        print(f"{method}: M({curve.steps}) = {final:.6g}{extra}")
    if result.comparison is not None:
        c = result.comparison
        print(
            f"compare {c.method_a} vs {c.method_b}: "
            f"mad = {c.mad:.6g}, max = {c.max_dev:.6g} at step {c.argmax}"
        )
    if result.out_path is not None:
        print(f"wrote {result.out_path} and {result.meta_path}")
    return 0


def _emit_value(key, value) -> str:
    if value is None:
        return "none"
    if isinstance(value, tuple):
        return ",".join(value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def emit_config(config: ExperimentConfig, header: str | None = None) -> str:
    lines = [] if header is None else [f"# {header}"]
    for key in _FIELD_PARSERS:
        lines.append(f"{key} = {_emit_value(key, getattr(config, key))}")
    return "\n".join(lines) + "\n"


def _cmd_presets(args) -> int:
    if args.emit:
        if args.emit not in PRESETS:
            raise InvalidInputError(
                f"unknown preset {args.emit!r} (choose from {', '.join(sorted(PRESETS))})"
            )
        sys.stdout.write(emit_config(PRESETS[args.emit], header=f"preset {args.emit}"))
        return 0
    for name in sorted(PRESETS):
        cfg = PRESETS[name]
        print(
            f"{name}: k={cfg.k} epsilon={cfg.epsilon} dim_n={cfg.dim_n} "
            f"state={cfg.state} q0={cfg.q0} steps={cfg.steps} "
            f"sample_mode={cfg.sample_mode} methods={','.join(cfg.methods)}"
        )
    return 0


def _cmd_validate(args) -> int:
    config = load_config(args.config)
    check_config(config)
    print(f"config ok: {args.config}")
    return 0


def _cmd_shadow(args) -> int:
    spec = MapSpec(args.k, args.epsilon, args.dim_n)
    report = shadow_survey(
        spec, count=args.count, steps=args.steps, seed=args.seed,
        tol=args.tol, max_iter=args.max_iter,
    )
    print(f"epsilon = {report['epsilon']:g}, shadow horizon ~ {report['shadow_time']:.4g} steps")
    print(f"orbits: {report['count']} x {report['steps']} steps")
    print(
        f"pseudo-residual vs unperturbed map: max = {report['max_pseudo_residual']:.6g}, "
        f"bound epsilon/(2 pi) = {report['residual_bound']:.6g}, "
        f"violations = {report['bound_violations']}"
    )
    print(
        f"refinement: converged {report['fraction_converged']:.0%}, "
        f"max refined residual = {report['max_refined_residual']:.3g}"
    )
    print(
        f"shadow distance: max = {report['max_shadow_distance']:.6g}, "
        f"mean = {report['mean_shadow_distance']:.6g}"
    )
    return 0


def _cmd_oracle_check(args) -> int:
    failures = 0
    for dim_n, k, eps in _ORACLE_COMBOS:
        spec = MapSpec(k, eps, dim_n)
        state = PositionEigenstate(0.25)  # grid-aligned for every dim here
        split = exact_fidelity_curve(spec, state, args.steps)
        dense = dense_oracle(spec, state, args.steps)
        dev = float(np.abs(split.amplitude - dense.amplitude).max())
        ok = dev <= args.tol
        failures += 0 if ok else 1
        print(
            f"N={dim_n:<4d} k={k:<4g} epsilon={eps:g}: "
            f"max |amp_split - amp_dense| = {dev:.3e} "
            f"{'ok' if ok else 'FAIL'}"
        )
    if failures:
        print(f"oracle-check: {failures} combination(s) FAILED (tol {args.tol:g})")
        return 1
    print(f"oracle-check: all {len(_ORACLE_COMBOS)} combinations within {args.tol:g}")
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigValidationError as exc:
        for violation in exc.violations:
            print(f"error: {violation}", file=sys.stderr)
        return 2
    except InvalidInputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except CapacityError as exc:
        print(f"capacity: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
