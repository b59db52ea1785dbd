"""Experiment configuration, execution, comparison, and serialization.

An experiment fixes the map, the initial state, the sampling strategy,
and which fidelity routes to run (semiclassical dephasing, exact
split-operator, dense-matrix oracle). Results are written as one flat
table (CSV or JSON) with a `.meta.json` sidecar; all floats serialize
with 17 significant digits so files round-trip bitwise and are
byte-identical for any thread count at a fixed seed. Timestamps and
durations live only in the sidecar, never in the data file.
"""

from __future__ import annotations

import dataclasses
import json
import time
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .dephasing import FidelityCurve, dr_curve
from .dynamics import MapSpec
from .errors import CapacityError, ConfigValidationError, InvalidInputError
from .initial_states import (
    GaussianWavepacket,
    PositionEigenstate,
    samples_gaussian,
    samples_position_state,
)
from .quantum import dense_oracle, exact_fidelity_curve

METHOD_ORDER = ("dr", "exact", "dense")
COMPARISON_PRIORITY = (("dr", "exact"), ("dr", "dense"), ("exact", "dense"))
CSV_COLUMNS = ("step", "t", "method", "M", "amp_re", "amp_im", "stderr_re", "stderr_im")

_STATES = ("position", "gaussian")
_POSITION_MODES = ("grid", "monte_carlo")
_GAUSSIAN_MODES = ("wigner", "position_only")
_FORMATS = ("csv", "json")

# capacity ceilings: beyond these the run is refused, not merely warned
_MAX_DIM = 65536
_MAX_SAMPLES = 10_000_000
_MAX_STEPS = 1_000_000
_DENSE_MAX_DIM = 256

_GRID_ALIGN_TOL = 1e-9


@dataclass(frozen=True)
class ExperimentConfig:
    """Declarative description of one fidelity experiment."""

    k: float = 0.8
    epsilon: float = 5e-3
    dim_n: int = 1000
    state: str = "position"
    q0: float = 0.4
    p0: float = 0.0
    sigma: float = 0.05
    steps: int = 50
    samples: int | None = None
    sample_mode: str = "grid"
    seed: int = 0
    methods: tuple[str, ...] = ("dr", "exact")
    out: str | None = None
    format: str = "csv"
    threads: int = 1

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)


PRESETS: dict[str, ExperimentConfig] = {
    # mixed phase space, moderate perturbation
    "fig1-mixed": ExperimentConfig(
        k=0.8, epsilon=5e-3, dim_n=1000, state="position", q0=0.4,
        steps=50, sample_mode="grid", methods=("dr", "exact"),
    ),
    # strongly chaotic regime
    "fig1-chaotic": ExperimentConfig(
        k=10.0, epsilon=2e-3, dim_n=1000, state="position", q0=0.4,
        steps=50, sample_mode="grid", methods=("dr", "exact"),
    ),
}


@dataclass(frozen=True)
class ComparisonReport:
    """Per-step fidelity deviation between two curves of one experiment."""

    method_a: str
    method_b: str
    deviations: np.ndarray
    mad: float
    max_dev: float
    argmax: int
    curve_a: FidelityCurve
    curve_b: FidelityCurve


@dataclass(frozen=True)
class RunResult:
    config: ExperimentConfig
    spec: MapSpec
    curves: dict
    comparison: ComparisonReport | None
    out_path: Path | None = None
    meta_path: Path | None = None
    duration_s: float = 0.0


_FIELD_PARSERS = {
    "k": float,
    "epsilon": float,
    "dim_n": int,
    "state": str,
    "q0": float,
    "p0": float,
    "sigma": float,
    "steps": int,
    "samples": "optional_int",
    "sample_mode": str,
    "seed": int,
    "methods": "method_list",
    "out": "optional_str",
    "format": str,
    "threads": int,
}


def _parse_value(key, raw):
    parser = _FIELD_PARSERS[key]
    if parser == "optional_int":
        return None if raw.lower() == "none" else int(raw)
    if parser == "optional_str":
        return None if raw.lower() == "none" else raw
    if parser == "method_list":
        return tuple(part.strip() for part in raw.split(",") if part.strip())
    if parser is int:
        return int(raw)
    return parser(raw)


def parse_config(text: str) -> ExperimentConfig:
    """Build a config from flat `key = value` text.

    Lines starting with `#` and blank lines are skipped. All problems
    (unknown keys, malformed lines, bad values) are collected with their
    line numbers and raised together as ConfigValidationError.
    """
    values = {}
    violations = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            violations.append(f"line {lineno}: expected 'key = value', got {stripped!r}")
            continue
        key, _, raw = stripped.partition("=")
        key = key.strip()
        raw = raw.strip()
        if key not in _FIELD_PARSERS:
            violations.append(f"line {lineno}: unknown key {key!r}")
            continue
        if key in values:
            violations.append(f"line {lineno}: duplicate key {key!r}")
            continue
        try:
            values[key] = _parse_value(key, raw)
        except ValueError:
            violations.append(f"line {lineno}: cannot parse {key} value {raw!r}")
    if violations:
        raise ConfigValidationError(violations)
    return ExperimentConfig(**values)


def load_config(path) -> ExperimentConfig:
    return parse_config(Path(path).read_text())


def validate_config(config: ExperimentConfig) -> list[str]:
    """All semantic violations for the config; empty when runnable.

    Capacity problems are phrased with the prefix 'capacity:' so callers
    can distinguish resource refusals from invalid input.
    """
    v = []
    if not np.isfinite(config.k):
        v.append(f"k must be finite, got {config.k!r}")
    if not np.isfinite(config.epsilon):
        v.append(f"epsilon must be finite, got {config.epsilon!r}")
    if not isinstance(config.dim_n, int) or config.dim_n < 2:
        v.append(f"dim_n must be an integer >= 2, got {config.dim_n!r}")
    elif config.dim_n > _MAX_DIM:
        v.append(f"capacity: dim_n {config.dim_n} exceeds limit {_MAX_DIM}")
    if config.state not in _STATES:
        v.append(f"state must be one of {_STATES}, got {config.state!r}")
    if not isinstance(config.steps, int) or config.steps < 0:
        v.append(f"steps must be a nonnegative integer, got {config.steps!r}")
    elif config.steps > _MAX_STEPS:
        v.append(f"capacity: steps {config.steps} exceeds limit {_MAX_STEPS}")
    if not (np.isfinite(config.q0) and 0.0 <= config.q0 < 1.0):
        v.append(f"q0 must lie in [0, 1), got {config.q0!r}")
    if not (np.isfinite(config.p0) and 0.0 <= config.p0 < 1.0):
        v.append(f"p0 must lie in [0, 1), got {config.p0!r}")
    if config.format not in _FORMATS:
        v.append(f"format must be one of {_FORMATS}, got {config.format!r}")
    if not isinstance(config.threads, int) or config.threads < 1:
        v.append(f"threads must be a positive integer, got {config.threads!r}")
    if not isinstance(config.seed, int):
        v.append(f"seed must be an integer, got {config.seed!r}")

    if not config.methods:
        v.append("methods must name at least one of dr, exact, dense")
    else:
        for m in config.methods:
            if m not in METHOD_ORDER:
                v.append(f"unknown method {m!r} (choose from dr, exact, dense)")
        if len(set(config.methods)) != len(config.methods):
            v.append(f"methods contains duplicates: {config.methods!r}")
        if "dense" in config.methods and isinstance(config.dim_n, int) and config.dim_n > _DENSE_MAX_DIM:
            v.append(
                f"capacity: dense method supports dim_n <= {_DENSE_MAX_DIM}, got {config.dim_n}"
            )

    if config.samples is not None:
        if not isinstance(config.samples, int) or config.samples < 1:
            v.append(f"samples must be a positive integer or none, got {config.samples!r}")
        elif config.samples > _MAX_SAMPLES:
            v.append(f"capacity: samples {config.samples} exceeds limit {_MAX_SAMPLES}")

    if config.state == "position":
        if config.sample_mode not in _POSITION_MODES:
            v.append(
                f"sample_mode for position states must be one of {_POSITION_MODES}, "
                f"got {config.sample_mode!r}"
            )
        if isinstance(config.dim_n, int) and config.dim_n >= 2 and np.isfinite(config.q0):
            j = config.q0 * config.dim_n
            if abs(j - round(j)) > _GRID_ALIGN_TOL:
                v.append(
                    f"q0={config.q0!r} is not aligned to the dim_n={config.dim_n} grid"
                )
        if (
            config.sample_mode == "grid"
            and config.samples is not None
            and config.samples != config.dim_n
        ):
            v.append(
                f"grid sampling yields exactly dim_n={config.dim_n!r} samples; "
                f"set samples to that or none, got {config.samples!r}"
            )
        if config.sample_mode == "monte_carlo" and config.samples is None and "dr" in config.methods:
            v.append("monte_carlo sampling requires samples")
    elif config.state == "gaussian":
        if config.sample_mode not in _GAUSSIAN_MODES:
            v.append(
                f"sample_mode for gaussian states must be one of {_GAUSSIAN_MODES}, "
                f"got {config.sample_mode!r}"
            )
        if not (np.isfinite(config.sigma) and 0.0 < config.sigma < 0.5):
            v.append(f"sigma must lie in (0, 0.5), got {config.sigma!r}")
        if config.samples is None and "dr" in config.methods:
            v.append("gaussian states require samples for the dr method")
    return v


def check_config(config: ExperimentConfig) -> None:
    """Raise on violations: CapacityError if all are capacity, else config error."""
    violations = validate_config(config)
    if not violations:
        return
    if all(s.startswith("capacity:") for s in violations):
        # the tag routed the exception type; drop it from the message
        raise CapacityError("; ".join(s[len("capacity:"):].strip() for s in violations))
    raise ConfigValidationError(violations)


def _descriptor(config: ExperimentConfig):
    if config.state == "position":
        return PositionEigenstate(config.q0)
    return GaussianWavepacket(config.q0, config.p0, config.sigma)


def _samples(config: ExperimentConfig, spec: MapSpec):
    if config.state == "position":
        return samples_position_state(
            spec, config.q0, count=config.samples,
            mode=config.sample_mode, seed=config.seed,
        )
    return samples_gaussian(
        spec, config.q0, config.p0, config.sigma,
        count=config.samples, mode=config.sample_mode, seed=config.seed,
    )


def compare(curve_a: FidelityCurve, curve_b: FidelityCurve) -> ComparisonReport:
    """Per-step |M_a - M_b| with its mean (mad), max, and argmax."""
    if len(curve_a.amplitude) != len(curve_b.amplitude):
        raise InvalidInputError(
            f"curves have different lengths: {len(curve_a.amplitude)} vs {len(curve_b.amplitude)}"
        )
    for attr in ("k", "epsilon", "dim_n"):
        a, b = getattr(curve_a.spec, attr), getattr(curve_b.spec, attr)
        if a != b:
            raise InvalidInputError(f"curves disagree on {attr}: {a!r} vs {b!r}")
    dev = np.abs(curve_a.fidelity - curve_b.fidelity)
    return ComparisonReport(
        method_a=curve_a.method,
        method_b=curve_b.method,
        deviations=dev,
        mad=float(dev.mean()),
        max_dev=float(dev.max()),
        argmax=int(dev.argmax()),
        curve_a=curve_a,
        curve_b=curve_b,
    )


def curve_rows(curves: dict) -> list[dict]:
    """Flat output rows, method-major in canonical order, steps ascending."""
    rows = []
    for method in METHOD_ORDER:
        curve = curves.get(method)
        if curve is None:
            continue
        for t in range(len(curve.amplitude)):
            rows.append(
                {
                    "step": t,
                    "t": float(t),
                    "method": method,
                    "M": float(curve.fidelity[t]),
                    "amp_re": float(curve.amplitude[t].real),
                    "amp_im": float(curve.amplitude[t].imag),
                    "stderr_re": float(curve.stderr_re[t]),
                    "stderr_im": float(curve.stderr_im[t]),
                }
            )
    return rows


def _fmt(value) -> str:
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


def render_csv(rows: list[dict]) -> str:
    lines = [",".join(CSV_COLUMNS)]
    for row in rows:
        lines.append(",".join(_fmt(row[c]) for c in CSV_COLUMNS))
    return "\n".join(lines) + "\n"


def render_json(rows: list[dict]) -> str:
    return json.dumps(rows, indent=2) + "\n"


def write_result(result: "RunResult", out, fmt: str | None = None):
    """Write the data table and its .meta.json sidecar next to it."""
    out = Path(out)
    fmt = fmt or result.config.format
    rows = curve_rows(result.curves)
    text = render_csv(rows) if fmt == "csv" else render_json(rows)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(text, newline="\n")
    meta_path = out.parent / (out.stem + ".meta.json")
    meta = {
        "created_utc": datetime.now(timezone.utc).isoformat(),
        "duration_s": result.duration_s,
        "package": _package_version(),
        "numpy": np.__version__,
        "config": _config_dict(result.config),
        "methods_run": [m for m in METHOD_ORDER if m in result.curves],
    }
    if result.comparison is not None:
        meta["comparison"] = {
            "method_a": result.comparison.method_a,
            "method_b": result.comparison.method_b,
            "mad": result.comparison.mad,
            "max_dev": result.comparison.max_dev,
            "argmax": result.comparison.argmax,
        }
    meta_path.write_text(json.dumps(meta, indent=2) + "\n", newline="\n")
    return out, meta_path


def _package_version() -> str:
    from torusecho import __version__

    return __version__


def _config_dict(config: ExperimentConfig) -> dict:
    d = dataclasses.asdict(config)
    d["methods"] = list(d["methods"])
    return d


def run_experiment(config: ExperimentConfig, out=None) -> RunResult:
    """Validate, run every requested method, compare, optionally write.

    Methods execute in canonical order (dr, exact, dense). The comparison
    pairs the two highest-priority curves present: (dr, exact), then
    (dr, dense), then (exact, dense). `out` overrides config.out.
    """
    check_config(config)
    spec = MapSpec(config.k, config.epsilon, config.dim_n)
    t0 = time.perf_counter()
    curves = {}
    for method in METHOD_ORDER:
        if method not in config.methods:
            continue
        if method == "dr":
            curves["dr"] = dr_curve(
                spec, _samples(config, spec), config.steps, threads=config.threads
            )
        elif method == "exact":
            curves["exact"] = exact_fidelity_curve(spec, _descriptor(config), config.steps)
        else:
            curves["dense"] = dense_oracle(spec, _descriptor(config), config.steps)

    comparison = None
    for a, b in COMPARISON_PRIORITY:
        if a in curves and b in curves:
            comparison = compare(curves[a], curves[b])
            break

    duration = time.perf_counter() - t0
    result = RunResult(
        config=config, spec=spec, curves=curves, comparison=comparison,
        duration_s=duration,
    )
    target = out if out is not None else config.out
    if target is not None:
        out_path, meta_path = write_result(result, target)
        result = dataclasses.replace(result, out_path=out_path, meta_path=meta_path)
    return result
