"""
Test script for the run tracker and the run ledger
Run this to verify that recorded runs and their rows land in the database
"""
import os
import sys

import pytest

# Add project root to path
sys.path.append(os.path.dirname(os.path.abspath(__file__)))

from app.main import EXIT_PASS, main
from app.services import database
from app.services.convergence_stats import ConvergenceReport
from app.services.report import rows_from_report
from app.services.run_tracker import active_trackers, end_tracking_run, get_tracker, start_tracking_run


@pytest.fixture
def ledger(tmp_path, monkeypatch):
    url = f"sqlite:///{tmp_path / 'ledger.db'}"
    monkeypatch.setenv("PHILAB_DATABASE_URL", url)
    database.init_db(url)
    return url


def sample_report():
    return ConvergenceReport("demo", [1e-1, 1e-2], [0.1, 0.004], tolerance=0.01, residuals=[0.2, 0.02])


def test_tracker_lifecycle():
    print("🧪 Testing tracker lifecycle...")
    tracker = start_tracking_run("run-1", "demo", "nas-sum", seed=7, quiet=True)
    assert get_tracker("demo") is tracker
    report = sample_report()
    tracker.set_report(report, rows_from_report("demo", report))
    assert tracker.passed
    assert tracker.to_dict()["rows"] == 3
    assert end_tracking_run("demo") is tracker
    assert "demo" not in active_trackers
    assert end_tracking_run("demo") is None


def test_status_line_names_the_worst_rectangle(capsys):
    report = ConvergenceReport(
        "mid", [49.0], [0.6], tolerance=1e-9, check_trend=False, schedule_kind="lattice",
        extras={"worst_rectangle": [[0.25, 0.5], [2.0, 4.0]], "worst_delta": 0.6},
    )
    tracker = start_tracking_run("run-4", "mid", "mid-check")
    tracker.set_report(report, rows_from_report("mid", report))
    end_tracking_run("mid")
    output = capsys.readouterr().out
    assert "❌ mid: FAIL" in output
    assert "worst rectangle (0.25, 0.5)-(2, 4)" in output


def test_errors_are_not_recorded(ledger):
    tracker = start_tracking_run("run-2", "broken", "sum-limit", quiet=True)
    tracker.set_error("numeric failure")
    assert not tracker.passed
    assert tracker.save_run() is None
    end_tracking_run("broken")


def test_saved_run_has_rows(ledger):
    print("🧪 Testing run ledger...")
    report = sample_report()
    tracker = start_tracking_run(
        "run-3", "demo", "nas-sum", seed=2 ** 64 - 1, chunk_size=100, workers=2, quiet=True
    )
    tracker.set_report(report, rows_from_report("demo", report))
    pk = tracker.save_run()
    end_tracking_run("demo")
    assert pk is not None

    db = database.get_db()
    try:
        run = db.query(database.ExperimentRun).filter_by(id=pk).one()
        assert run.passed
        assert run.seed == str(2 ** 64 - 1)
        assert run.final_distance == pytest.approx(0.004)
        stored = sorted(run.rows, key=lambda r: r.position)
        assert [r.schedule_value for r in stored] == [0.1, 0.01, None]
        assert [r.passed for r in stored] == [False, True, True]
        assert run.to_dict()["workers"] == 2
        assert run.summary["distances"] == [0.1, 0.004]
        assert run.summary["label"] == "demo"
    finally:
        db.close()


def test_record_flag_and_history(ledger, tmp_path, capsys):
    config = tmp_path / "nas.cfg"
    config.write_text("[nas-frechet]\nkind = nas-max\nmu = indep_frechet\n", encoding="utf-8")
    out = str(tmp_path / "nas.csv")
    assert main(["run", str(config), "--out", out, "--quiet", "--record"]) == EXIT_PASS

    db = database.get_db()
    try:
        runs = db.query(database.ExperimentRun).filter_by(experiment="nas-frechet").all()
        assert len(runs) == 1
        assert runs[0].kind == "nas-max"
        assert len(runs[0].rows) == 8
    finally:
        db.close()

    capsys.readouterr()
    assert main(["history", "--limit", "5"]) == EXIT_PASS
    assert "nas-frechet" in capsys.readouterr().out


if __name__ == "__main__":
    print("=" * 60)
    print("RUN TRACKER TEST")
    print("=" * 60)
    sys.exit(pytest.main([__file__, "-q"]))
