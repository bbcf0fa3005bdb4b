import json
import math
import subprocess
import sys

import pytest

from curveflow import __version__
from curveflow import cli


def run_cli(capsys, *argv):
    code = cli.main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def last_json(stdout: str) -> dict:
    for line in reversed(stdout.strip().splitlines()):
        if line.startswith("{"):
            return json.loads(line)
    raise AssertionError(f"no JSON line in output: {stdout!r}")


def test_check_curve_passes_alpha_two(capsys):
    code, out, _ = run_cli(capsys, "check-curve", "--curve", "power", "--alpha", "2")
    assert code == 0
    d = last_json(out)
    assert d["all_pass"] is True
    assert d["constants"]["c1"] == pytest.approx(2.0, rel=1e-6)
    assert d["constants"]["c4"] == pytest.approx(2.0, rel=1e-6)


def test_check_curve_alpha_one_fails_condition_iii(capsys):
    code, out, _ = run_cli(capsys, "check-curve", "--curve", "power", "--alpha", "1")
    assert code == 1
    assert "condition_iii" in out
    assert last_json(out)["condition_iii"]["passed"] is False


def test_carleson_inline_indicator_matches_log(capsys):
    code, out, _ = run_cli(capsys, "carleson", "--u", "const:0",
                           "--f", "indicator:-1:1", "--at", "2")
    assert code == 0
    value = float(out.strip().splitlines()[0])
    assert abs(value - math.log(3.0)) < 1e-2


def test_carleson_at_outside_grid_is_config_error(capsys):
    code, _, err = run_cli(capsys, "carleson", "--u", "const:0",
                           "--f", "indicator:-1:1", "--at", "50")
    assert code == 2
    assert "outside the grid" in err


def test_carleson_strict_coverage_gate(capsys):
    # a gaussian this wide leaves visible mass at the grid edge
    code, _, err = run_cli(capsys, "carleson", "--u", "const:0",
                           "--f", "gauss:0:4", "--at", "1")
    assert code == 2
    assert "cover" in err
    code2, out, _ = run_cli(capsys, "carleson", "--u", "const:0",
                            "--f", "gauss:0:4", "--at", "1", "--no-strict")
    assert code2 == 0


def test_unknown_subcommand_exits_two():
    with pytest.raises(SystemExit) as e:
        cli.main(["frobnicate"])
    assert e.value.code == 2


def test_transform_requires_input(capsys):
    code, _, err = run_cli(capsys, "transform")
    assert code == 2
    assert "--f" in err


def test_config_schema_rejects_unknown_keys(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"bogus_key": 1}')
    code, _, err = run_cli(capsys, "norm-sweep", "--config", str(bad))
    assert code == 2
    assert "bogus_key" in err


def test_bump_check_default_window(capsys):
    code, out, _ = run_cli(capsys, "bump-check", "--points", "20001")
    assert code == 0
    assert last_json(out)["max_deviation"] < 1e-10


def test_geometry_worked_example(capsys):
    code, out, _ = run_cli(capsys, "geometry", "--curve", "power", "--alpha", "2",
                           "--u-abs", "1.0", "--l", "0", "--k", "0", "--tau", "0")
    assert code == 0
    d = last_json(out)
    assert d["N_k"] == 3
    assert d["interval_length"] == pytest.approx(0.5, rel=1e-12)
    assert d["sigma_values"] == pytest.approx([1 / 7, 4 / 9, 9 / 11], rel=1e-12)


def test_geometry_infeasible_bracket_fails(capsys):
    code, out, _ = run_cli(capsys, "geometry", "--curve", "power", "--alpha", "2",
                           "--u-abs", "0.4", "--l", "0", "--k", "0", "--tau", "0")
    assert code == 1
    assert "FAIL" in out and "no admissible interval count" in out


def test_lemma_check_small_run(capsys):
    code, out, _ = run_cli(capsys, "lemma-check", "--seed", "9", "--draws", "40")
    assert code == 0
    d = last_json(out)
    assert d["oscillation_bound_failures"] == 0
    assert d["matrix_lower_bound_failures"] == 0
    assert d["interval_count_unstable"] == 0
    assert d["interval_count_max_seen"] <= d["interval_count_gate"]
    assert d["seed"] == 9


def test_norm_sweep_artifacts_and_reproducibility(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({
        "curve": {"family": "power", "alpha": 2.0},
        "family": {"generator": "gaussians", "count": 2, "seed": 11,
                   "grid": [-8.0, 8.0, 401]},
        "modulations": ["const:0.5", {"kind": "piecewise",
                                      "breakpoints": [0.0], "levels": [1.0, 3.0]}],
        "p": 2.0,
        "threshold": 100.0,
        "seed": 77,
    }))
    out1, out2 = tmp_path / "r1", tmp_path / "r2"
    code1, _, _ = run_cli(capsys, "norm-sweep", "--config", str(cfg), "--out", str(out1))
    code2, _, _ = run_cli(capsys, "norm-sweep", "--config", str(cfg), "--out", str(out2))
    assert code1 == 0 and code2 == 0
    assert (out1 / "norm-sweep.csv").read_bytes() == (out2 / "norm-sweep.csv").read_bytes()
    r1 = json.loads((out1 / "norm-sweep.json").read_text())
    r2 = json.loads((out2 / "norm-sweep.json").read_text())
    r1.pop("environment"), r2.pop("environment")
    assert r1 == r2
    man = json.loads((out1 / "manifest.json").read_text())
    assert man["tool"] == "curveflow"
    assert man["seed"] == 77
    assert man["subcommand"] == "norm-sweep"
    assert "norm-sweep.json" in man["artifacts"]
    assert len(man["config_hash"]) == 16
    assert man["wall_time_s"] > 0


def test_jobs_flag_does_not_change_results(tmp_path, capsys):
    out1, out2 = tmp_path / "j1", tmp_path / "j4"
    code1, _, _ = run_cli(capsys, "norm-sweep", "--jobs", "1", "--out", str(out1))
    code2, _, _ = run_cli(capsys, "norm-sweep", "--jobs", "4", "--out", str(out2))
    assert code1 == 0 and code2 == 0
    r1 = json.loads((out1 / "norm-sweep.json").read_text())
    r2 = json.loads((out2 / "norm-sweep.json").read_text())
    r1.pop("environment"), r2.pop("environment")
    assert r1 == r2


def test_fixtures_env_override(tmp_path, capsys, monkeypatch):
    fx = tmp_path / "fx.json"
    # a gate no fitted exponent can beat forces the verdict failure branch
    fx.write_text(json.dumps({"shift_growth_b_max": -10.0}))
    monkeypatch.setenv("CURVEFLOW_FIXTURES", str(fx))
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({
        "sigmas": [0.0, 4.0],
        "family": {"generator": "indicators", "count": 2, "seed": 3,
                   "grid": [-8.0, 8.0, 1025]},
        "p": 2.0,
    }))
    code, out, _ = run_cli(capsys, "shift-growth", "--config", str(cfg))
    assert code == 1
    assert "FAIL" in out and "growth exponent" in out
    monkeypatch.delenv("CURVEFLOW_FIXTURES")
    code2, out2, _ = run_cli(capsys, "shift-growth", "--config", str(cfg))
    assert code2 == 0


def test_module_entry_point_version():
    proc = subprocess.run([sys.executable, "-m", "curveflow", "--version"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert __version__ in proc.stdout