"""
Test script for the philab command line
Run this to verify config parsing, overrides, CSV reports and exit codes
"""
import os
import sys
import textwrap

import pytest

# Add project root to path
sys.path.append(os.path.dirname(os.path.abspath(__file__)))

from app.experiments import registry
from app.main import EXIT_CHECK_FAIL, EXIT_CONFIG, EXIT_IO, EXIT_NUMERIC, EXIT_PASS, main
from app.services.config import (
    ExperimentConfig, apply_overrides, get_workers, load_experiments, read_sections, suggest_kind
)
from app.services.errors import ConfigError, NumericFailureError
from app.services.report import CSV_HEADER, ReportRow, parse_report, read_report, render_report

NAS_CONFIG = """
[DEFAULT]
seed = 11

[nas-exponential]
kind = nas-sum
summand = exponential_scaled
psi = drift
psi_b = 1

[nas-frechet]
kind = nas-max
mu = indep_frechet
"""

PERTURBED_CONFIG = """
[perturbed]
kind = mid-check
mu = indep_frechet
mid_target = perturbed
"""


def write_config(tmp_path, text, name="experiments.cfg"):
    path = tmp_path / name
    path.write_text(textwrap.dedent(text), encoding="utf-8")
    return str(path)


# ==================== CONFIG PARSING ====================

def test_sections_become_configs(tmp_path):
    print("🧪 Testing config loading...")
    configs = load_experiments(write_config(tmp_path, NAS_CONFIG))
    assert [c.name for c in configs] == ["nas-exponential", "nas-frechet"]
    assert configs[0].kind == "nas-sum"
    assert configs[0].seed == 11 and configs[1].seed == 11
    assert configs[0].schedule_values()[0] == 0.1


def test_list_values_are_parsed():
    config = ExperimentConfig(name="x", kind="max-attraction", subsequence="3, 9, 27", point="0.5 2")
    assert config.subsequence == (3, 9, 27)
    assert config.point == (0.5, 2.0)


def test_overrides_and_seed(tmp_path):
    sections = read_sections(write_config(tmp_path, NAS_CONFIG))
    merged = apply_overrides(sections, ["reps=500", "nas-frechet.mu_alpha1=2"], seed=99)
    assert merged["nas-exponential"]["reps"] == "500"
    assert merged["nas-frechet"]["mu_alpha1"] == "2"
    assert "mu_alpha1" not in merged["nas-exponential"]
    assert merged["nas-frechet"]["seed"] == "99"
    with pytest.raises(ConfigError):
        apply_overrides(sections, ["missing.reps=1"])
    with pytest.raises(ConfigError):
        apply_overrides(sections, ["reps"])


def test_unknown_key_is_a_config_error(tmp_path):
    path = write_config(tmp_path, "[x]\nkind = nas-max\nmu = indep_frechet\nrepz = 10\n")
    with pytest.raises(ConfigError):
        load_experiments(path)


def test_sum_kinds_need_summand_and_psi(tmp_path):
    path = write_config(tmp_path, "[x]\nkind = nas-sum\nsummand = exponential_scaled\n")
    with pytest.raises(ConfigError):
        load_experiments(path)


def test_misspelled_kind_gets_a_suggestion(tmp_path):
    assert suggest_kind("max_limit") == "max-limit"
    assert suggest_kind("lemma-22") == "lemma22"
    assert suggest_kind("zzzz") is None
    path = write_config(tmp_path, "[x]\nkind = sum_attraction\nsummand = cauchy_scaled\npsi = drift\n")
    with pytest.raises(ConfigError, match="did you mean 'sum-attraction'"):
        load_experiments(path)


def test_missing_file_is_a_config_error(tmp_path):
    with pytest.raises(ConfigError):
        load_experiments(str(tmp_path / "nope.cfg"))


def test_workers_from_environment(monkeypatch):
    monkeypatch.setenv("PHILAB_WORKERS", "3")
    assert get_workers() == 3
    monkeypatch.setenv("PHILAB_WORKERS", "zero")
    with pytest.raises(ConfigError):
        get_workers()


# ==================== REPORTS ====================

def test_report_formatting():
    print("🧪 Testing report rendering...")
    row = ReportRow("demo", 1e-3, 1.0 / 3.0, None, 0.05, True)
    assert row.to_fields() == ["demo", "0.001", "0.333333333", "", "0.05", "true"]
    summary = ReportRow("demo", None, 2.0 / 3.0, 0.5, 0.05, False)
    assert summary.is_summary
    text = render_report([row, summary])
    assert text.splitlines()[0] == ",".join(CSV_HEADER)
    assert text.splitlines()[2] == "demo,,0.666666667,0.5,0.05,false"
    assert parse_report(text) == [row, summary]


# ==================== COMMANDS ====================

def test_run_passes_and_writes_csv(tmp_path):
    print("🧪 Testing philab run...")
    config = write_config(tmp_path, NAS_CONFIG)
    out = tmp_path / "out.csv"
    assert main(["run", config, "--out", str(out), "--quiet"]) == EXIT_PASS
    rows = read_report(str(out))
    summaries = [row for row in rows if row.is_summary]
    assert [row.experiment for row in summaries] == ["nas-exponential", "nas-frechet"]
    assert all(row.passed for row in summaries)
    schedule = [row.schedule_value for row in rows if row.experiment == "nas-exponential" and not row.is_summary]
    assert schedule == sorted(schedule, reverse=True)


def test_default_out_path_follows_config(tmp_path):
    config = write_config(tmp_path, NAS_CONFIG, name="nas.cfg")
    assert main(["run", config, "--quiet"]) == EXIT_PASS
    assert (tmp_path / "nas.csv").exists()


def test_reruns_are_byte_identical(tmp_path):
    config = write_config(tmp_path, """
        [subordination]
        kind = subordination
        phi = gamma
        mu = indep_frechet
        draws = 20000
        tolerance = 0.01
    """)
    first, second = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["run", config, "--out", str(first), "--seed", "5", "--quiet"]) == EXIT_PASS
    assert main(["run", config, "--out", str(second), "--seed", "5", "--quiet"]) == EXIT_PASS
    assert first.read_bytes() == second.read_bytes()


def test_check_failure_and_expect_fail(tmp_path):
    config = write_config(tmp_path, PERTURBED_CONFIG)
    out = str(tmp_path / "perturbed.csv")
    assert main(["run", config, "--out", out, "--quiet"]) == EXIT_CHECK_FAIL
    assert main(["run", config, "--out", out, "--quiet", "--expect-fail"]) == EXIT_PASS
    passing = write_config(tmp_path, NAS_CONFIG, name="nas.cfg")
    assert main(["run", passing, "--out", out, "--quiet", "--expect-fail"]) == EXIT_CHECK_FAIL


def test_set_override_can_break_a_check(tmp_path):
    config = write_config(tmp_path, NAS_CONFIG)
    out = str(tmp_path / "out.csv")
    assert main(["run", config, "--out", out, "--quiet", "--set", "tolerance=1e-6"]) == EXIT_CHECK_FAIL


def test_config_errors_exit_2(tmp_path):
    bad_key = write_config(tmp_path, "[x]\nkind = nas-max\nflavour = mint\n")
    assert main(["run", bad_key, "--quiet"]) == EXIT_CONFIG
    bad_schedule = write_config(tmp_path, "[x]\nkind = lemma22\nschedule = 1e-3, 1e-1\n", name="s.cfg")
    assert main(["run", bad_schedule, "--quiet"]) == EXIT_CONFIG
    assert main(["run", str(tmp_path / "missing.cfg"), "--quiet"]) == EXIT_CONFIG


@pytest.mark.parametrize("kind, extra", [
    ("nas-sum", "summand = exponential_scaled\npsi = drift\n"),
    ("nas-max", "mu = indep_frechet\n"),
    ("semigroup", "phi = gamma\nphi_alpha = 0.5\nj = 1\nk = 2\n"),
])
@pytest.mark.parametrize("schedule", ["0", "1e-2, 1e-1", "1e-1, 1e-1"])
def test_residual_schedules_are_validated(tmp_path, kind, extra, schedule):
    config = write_config(tmp_path, f"[x]\nkind = {kind}\n{extra}schedule = {schedule}\n")
    assert main(["run", config, "--out", str(tmp_path / "out.csv"), "--quiet"]) == EXIT_CONFIG


def test_numeric_failure_exits_3(tmp_path, monkeypatch):
    def explode(config, workers=1, chunk_size=10_000):
        raise NumericFailureError("series did not converge")

    monkeypatch.setitem(registry.EXPERIMENT_FUNCTIONS, "nas-sum", explode)
    config = write_config(tmp_path, NAS_CONFIG)
    assert main(["run", config, "--out", str(tmp_path / "out.csv"), "--quiet"]) == EXIT_NUMERIC


def test_unwritable_report_exits_4(tmp_path):
    config = write_config(tmp_path, NAS_CONFIG)
    out = tmp_path / "no" / "such" / "dir" / "out.csv"
    assert main(["run", config, "--out", str(out), "--quiet"]) == EXIT_IO


# ==================== SHIPPED CONFIGS ====================

CONFIG_DIR = os.path.join(os.path.dirname(os.path.abspath(__file__)), "configs")


@pytest.mark.parametrize("name, flags", [
    ("sums.cfg", []),
    ("maxima.cfg", []),
    ("broken_scaling.cfg", ["--expect-fail"]),
    ("perturbed_mid.cfg", ["--expect-fail"]),
])
def test_shipped_configs(tmp_path, name, flags):
    print(f"🧪 Running configs/{name}...")
    out = str(tmp_path / name.replace(".cfg", ".csv"))
    assert main(["run", os.path.join(CONFIG_DIR, name), "--out", out, "--quiet", *flags]) == EXIT_PASS
    summaries = [row for row in read_report(out) if row.is_summary]
    assert summaries
    if not flags:
        assert all(row.passed for row in summaries)


def test_perturbed_config_reports_its_rectangle(tmp_path, capsys):
    out = str(tmp_path / "perturbed.csv")
    assert main(["run", os.path.join(CONFIG_DIR, "perturbed_mid.cfg"), "--out", out]) == EXIT_CHECK_FAIL
    assert "worst rectangle (" in capsys.readouterr().out


def test_list_experiments(capsys):
    assert main(["list-experiments"]) == EXIT_PASS
    output = capsys.readouterr().out
    for definition in registry.EXPERIMENT_DEFINITIONS:
        assert definition["name"] in output
    assert set(registry.EXPERIMENT_FUNCTIONS) == {d["name"] for d in registry.EXPERIMENT_DEFINITIONS}


if __name__ == "__main__":
    print("=" * 60)
    print("PHILAB CLI TEST")
    print("=" * 60)
    sys.exit(pytest.main([__file__, "-q"]))
