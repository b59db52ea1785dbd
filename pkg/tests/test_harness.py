"""Config parsing/validation, experiment runs, serialization, CLI."""

import json

import numpy as np
import pytest

from torusecho import (
    PRESETS,
    CapacityError,
    ConfigValidationError,
    ExperimentConfig,
    InvalidInputError,
    MapSpec,
    compare,
    dr_curve,
    exact_fidelity_curve,
    parse_config,
    run_experiment,
    samples_position_state,
    validate_config,
)
from torusecho.cli import emit_config, main
from torusecho.harness import check_config, curve_rows, render_csv


def test_presets_known():
    assert set(PRESETS) == {"fig1-mixed", "fig1-chaotic"}
    mixed = PRESETS["fig1-mixed"]
    assert (mixed.k, mixed.epsilon, mixed.dim_n) == (0.8, 5e-3, 1000)
    chaotic = PRESETS["fig1-chaotic"]
    assert (chaotic.k, chaotic.epsilon) == (10.0, 2e-3)
    for cfg in PRESETS.values():
        assert validate_config(cfg) == []
        assert cfg.q0 == 0.4 and cfg.steps == 50 and cfg.sample_mode == "grid"


def test_config_text_round_trip():
    for name, cfg in PRESETS.items():
        text = emit_config(cfg, header=f"preset {name}")
        assert parse_config(text) == cfg


def test_parse_collects_every_problem_with_line_numbers():
    text = "\n".join(
        [
            "# comment",
            "k = 0.8",
            "mystery = 3",       # line 3: unknown key
            "dim_n = thousand",  # line 4: bad int
            "no equals here",    # line 5: malformed
            "k = 0.9",           # line 6: duplicate
        ]
    )
    with pytest.raises(ConfigValidationError) as exc:
        parse_config(text)
    msgs = exc.value.violations
    assert len(msgs) == 4
    assert any("line 3" in m and "mystery" in m for m in msgs)
    assert any("line 4" in m for m in msgs)
    assert any("line 5" in m for m in msgs)
    assert any("line 6" in m and "duplicate" in m for m in msgs)


def test_parse_optional_and_list_values():
    cfg = parse_config("samples = none\nout = none\nmethods = dr, dense\nseed = 7")
    assert cfg.samples is None and cfg.out is None
    assert cfg.methods == ("dr", "dense")
    assert cfg.seed == 7
    cfg2 = parse_config("samples = 500\nsample_mode = monte_carlo")
    assert cfg2.samples == 500


def test_validate_reports_all_semantic_violations():
    cfg = ExperimentConfig(
        k=float("nan"), epsilon=float("inf"), dim_n=1, state="plasma",
        q0=1.5, p0=-0.1, steps=-3, samples=0, sample_mode="odd",
        methods=("dr", "warp"), format="xml", threads=0,
    )
    msgs = validate_config(cfg)
    for needle in ("k must", "epsilon must", "dim_n", "state", "q0", "p0",
                   "steps", "samples", "warp", "format", "threads"):
        assert any(needle in m for m in msgs), needle
    # mode checks hang off a valid state
    msgs2 = validate_config(ExperimentConfig(state="position", sample_mode="odd"))
    assert any("sample_mode" in m for m in msgs2)
    msgs3 = validate_config(ExperimentConfig(state="gaussian", sample_mode="grid", samples=10))
    assert any("sample_mode" in m for m in msgs3)


def test_validate_grid_alignment_and_sample_count():
    cfg = ExperimentConfig(q0=0.4005, dim_n=1000)
    assert any("aligned" in m for m in validate_config(cfg))
    cfg2 = ExperimentConfig(samples=999, sample_mode="grid")
    assert any("grid sampling" in m for m in validate_config(cfg2))
    cfg3 = ExperimentConfig(sample_mode="monte_carlo", samples=None)
    assert any("requires samples" in m for m in validate_config(cfg3))
    cfg4 = ExperimentConfig(state="gaussian", sample_mode="wigner", samples=None)
    assert any("require samples" in m for m in validate_config(cfg4))
    cfg5 = ExperimentConfig(state="gaussian", sample_mode="wigner", samples=100, sigma=0.9)
    assert any("sigma" in m for m in validate_config(cfg5))


def test_capacity_violations_raise_capacity_error():
    cfg = ExperimentConfig(dim_n=100_000)
    with pytest.raises(CapacityError):
        check_config(cfg)
    cfg2 = ExperimentConfig(dim_n=1000, methods=("dr", "exact", "dense"))
    with pytest.raises(CapacityError):
        check_config(cfg2)  # dense beyond its grid limit is a capacity refusal
    # capacity mixed with a plain violation reports as config error
    cfg3 = ExperimentConfig(dim_n=100_000, state="plasma")
    with pytest.raises(ConfigValidationError):
        check_config(cfg3)


def test_run_experiment_all_methods_small_grid():
    cfg = ExperimentConfig(
        dim_n=64, q0=0.25, steps=10, methods=("dense", "exact", "dr"),
    )
    result = run_experiment(cfg)
    assert list(result.curves) == ["dr", "exact", "dense"]  # canonical order
    c = result.comparison
    assert (c.method_a, c.method_b) == ("dr", "exact")  # highest-priority pair
    assert c.deviations.shape == (11,)
    assert c.mad >= 0.0 and c.max_dev >= c.mad
    assert c.argmax == int(np.argmax(c.deviations))


def test_comparison_pair_priority_without_dr():
    cfg = ExperimentConfig(dim_n=64, q0=0.25, steps=5, methods=("exact", "dense"))
    result = run_experiment(cfg)
    c = result.comparison
    assert (c.method_a, c.method_b) == ("exact", "dense")
    assert c.max_dev < 1e-12


def test_single_method_run_has_no_comparison():
    cfg = ExperimentConfig(dim_n=64, q0=0.25, steps=5, methods=("exact",))
    result = run_experiment(cfg)
    assert result.comparison is None
    assert list(result.curves) == ["exact"]


def test_compare_validation():
    spec = MapSpec(0.8, 5e-3, 64)
    a = dr_curve(spec, samples_position_state(spec, 0.25), 10)
    b = dr_curve(spec, samples_position_state(spec, 0.25), 8)
    with pytest.raises(InvalidInputError):
        compare(a, b)
    other = MapSpec(0.9, 5e-3, 64)
    c = dr_curve(other, samples_position_state(other, 0.25), 10)
    with pytest.raises(InvalidInputError):
        compare(a, c)


def test_rows_and_csv_round_trip():
    cfg = ExperimentConfig(dim_n=64, q0=0.25, steps=3, methods=("dr", "exact"))
    result = run_experiment(cfg)
    rows = curve_rows(result.curves)
    assert len(rows) == 2 * 4
    assert [r["method"] for r in rows[:4]] == ["dr"] * 4
    assert [r["step"] for r in rows[:4]] == [0, 1, 2, 3]
    text = render_csv(rows)
    lines = text.strip().split("\n")
    assert lines[0] == "step,t,method,M,amp_re,amp_im,stderr_re,stderr_im"
    # 17-significant-digit serialization round-trips bitwise
    for line, row in zip(lines[1:], rows):
        fields = line.split(",")
        assert float(fields[3]) == row["M"]
        assert float(fields[4]) == row["amp_re"]
        assert float(fields[5]) == row["amp_im"]


def test_write_csv_and_sidecar(tmp_path):
    out = tmp_path / "run.csv"
    cfg = ExperimentConfig(dim_n=64, q0=0.25, steps=4, out=str(out))
    result = run_experiment(cfg)
    assert result.out_path == out
    meta_path = tmp_path / "run.meta.json"
    assert result.meta_path == meta_path
    body = out.read_text()
    assert body.startswith("step,t,method,")
    assert "\r" not in body
    meta = json.loads(meta_path.read_text())
    assert meta["config"]["dim_n"] == 64
    assert meta["comparison"]["method_a"] == "dr"
    assert "created_utc" in meta and "duration_s" in meta
    # data file itself carries no timestamp (colons only occur in ISO times)
    assert ":" not in body


def test_write_json_format(tmp_path):
    out = tmp_path / "run.json"
    cfg = ExperimentConfig(dim_n=64, q0=0.25, steps=4, out=str(out), format="json")
    result = run_experiment(cfg)
    rows = json.loads(out.read_text())
    assert len(rows) == 2 * 5
    # json floats round-trip exactly
    assert rows[1]["amp_re"] == float(result.curves["dr"].amplitude[1].real)
    assert result.meta_path.exists()


def test_runs_are_reproducible_bytes(tmp_path):
    cfg = ExperimentConfig(
        dim_n=128, q0=0.25, steps=6, sample_mode="monte_carlo",
        samples=5000, seed=12,
    )
    a = run_experiment(cfg, out=tmp_path / "a.csv")
    b = run_experiment(cfg, out=tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    assert a.curves["dr"].seed == 12
    assert b.comparison.mad == a.comparison.mad


# ---- CLI ----------------------------------------------------------------


def test_cli_run_preset(tmp_path, capsys):
    out = tmp_path / "fig1.csv"
    code = main(["run", "--preset", "fig1-mixed", "--steps", "8", "--out", str(out)])
    assert code == 0
    captured = capsys.readouterr().out
    assert "compare dr vs exact" in captured
    assert out.exists()
    assert (tmp_path / "fig1.meta.json").exists()


def test_cli_flag_overrides_and_json(tmp_path):
    out = tmp_path / "o.json"
    code = main([
        "run", "--dim-n", "64", "--q0", "0.25", "--steps", "4",
        "--methods", "exact,dense", "--format", "json", "--out", str(out),
    ])
    assert code == 0
    rows = json.loads(out.read_text())
    assert {r["method"] for r in rows} == {"exact", "dense"}


def test_cli_validate_good_and_bad(tmp_path, capsys):
    good = tmp_path / "good.cfg"
    good.write_text(emit_config(PRESETS["fig1-mixed"]))
    assert main(["validate", "--config", str(good)]) == 0
    assert "config ok" in capsys.readouterr().out

    bad = tmp_path / "bad.cfg"
    bad.write_text("k = 0.8\nstate = plasma\nsteps = -1\n")
    assert main(["validate", "--config", str(bad)]) == 2
    err = capsys.readouterr().err
    assert "state" in err and "steps" in err


def test_cli_exit_codes(tmp_path, capsys):
    # capacity: dense on a large grid
    cap = tmp_path / "cap.cfg"
    cap.write_text("dim_n = 1000\nmethods = dr,exact,dense\n")
    assert main(["validate", "--config", str(cap)]) == 3
    # io error: missing config file
    assert main(["run", "--config", str(tmp_path / "missing.cfg")]) == 4
    # bad flag value
    assert main(["run", "--dim-n", "furby"]) == 2
    capsys.readouterr()


def test_cli_presets_listing_and_emit(tmp_path, capsys):
    assert main(["presets"]) == 0
    out = capsys.readouterr().out
    assert "fig1-mixed" in out and "fig1-chaotic" in out

    assert main(["presets", "--emit", "fig1-chaotic"]) == 0
    text = capsys.readouterr().out
    cfg = parse_config(text)
    assert cfg == PRESETS["fig1-chaotic"]
    assert main(["presets", "--emit", "nope"]) == 2


def test_cli_worker_cap_env(tmp_path, monkeypatch, capsys):
    out1 = tmp_path / "w1.csv"
    out8 = tmp_path / "w8.csv"
    args = ["run", "--dim-n", "128", "--q0", "0.25", "--steps", "5",
            "--sample-mode", "monte_carlo", "--samples", "9000",
            "--methods", "dr", "--seed", "3"]
    monkeypatch.setenv("TORUSECHO_MAX_WORKERS", "2")
    assert main(args + ["--threads", "8", "--out", str(out8)]) == 0
    monkeypatch.delenv("TORUSECHO_MAX_WORKERS")
    assert main(args + ["--threads", "1", "--out", str(out1)]) == 0
    # capped thread count still yields identical bytes
    assert out1.read_bytes() == out8.read_bytes()
    monkeypatch.setenv("TORUSECHO_MAX_WORKERS", "zero")
    assert main(args) == 2
    capsys.readouterr()


def test_cli_shadow_and_oracle_check(capsys):
    assert main(["shadow", "--epsilon", "0.005", "--count", "4", "--steps", "10"]) == 0
    out = capsys.readouterr().out
    assert "violations = 0" in out
    assert main(["oracle-check", "--steps", "5"]) == 0
    out = capsys.readouterr().out
    assert "all 6 combinations" in out
