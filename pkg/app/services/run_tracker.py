"""
Run Tracker - Track one experiment section while it runs
Integrates with main.py to print progress and, with --record, store the run
"""
from datetime import datetime
from typing import Dict, List, Optional

from app.services.convergence_stats import ConvergenceReport
from app.services.database import get_db, ExperimentRun, ReportRowRecord
from app.services.report import ReportRow


class ExperimentRunTracker:
    """
    Tracks a single experiment section of a run.
    main.py feeds it the report and rows, then finalizes it.
    """

    def __init__(
            self,
            run_id: str,
            experiment: str,
            kind: str,
            config_path: str = None,
            settings: Dict = None,
            seed: int = None,
            chunk_size: int = None,
            workers: int = None,
            quiet: bool = False
    ):
        self.run_id = run_id
        self.experiment = experiment
        self.kind = kind
        self.config_path = config_path
        self.settings = settings or {}
        self.seed = seed
        self.chunk_size = chunk_size
        self.workers = workers
        self.quiet = quiet

        self.started_at = datetime.utcnow()
        self.finished_at = None

        self.report: Optional[ConvergenceReport] = None
        self.rows: List[ReportRow] = []
        self.error: Optional[str] = None

    def log(self, message: str):
        if not self.quiet:
            print(message)

    def set_report(self, report: ConvergenceReport, rows: List[ReportRow]):
        """Record the finished report and its CSV rows"""
        self.report = report
        self.rows = list(rows)
        self.finished_at = datetime.utcnow()

        marker = "✅" if report.passed else "❌"
        verdict = "PASS" if report.passed else "FAIL"
        self.log(f"{marker} {self.experiment}: {verdict} | final distance "
                 f"{report.final_distance:.3e} (tolerance {report.tolerance:.3e}, "
                 f"trend {'ok' if report.trend_ok else 'broken'})")
        rectangle = report.extras.get("worst_rectangle")
        if rectangle is not None:
            (a1, a2), (b1, b2) = rectangle
            self.log(f"   worst rectangle ({a1:g}, {a2:g})-({b1:g}, {b2:g}), "
                     f"delta {report.extras['worst_delta']:.3e}")

    def set_error(self, message: str):
        self.error = message
        self.finished_at = datetime.utcnow()
        self.log(f"❌ {self.experiment}: {message}")

    @property
    def passed(self) -> bool:
        return self.report is not None and self.report.passed

    @property
    def duration_sec(self) -> float:
        end = self.finished_at or datetime.utcnow()
        return (end - self.started_at).total_seconds()

    def save_run(self) -> Optional[int]:
        """
        Store the run and its rows in the ledger.

        Returns:
            primary key of the stored run
        """
        if self.report is None:
            self.log(f"⚠️  Nothing to record for {self.experiment}")
            return None

        db = get_db()
        try:
            run = ExperimentRun(
                run_id=self.run_id,
                experiment=self.experiment,
                kind=self.kind,
                config_path=self.config_path,
                settings=self.settings,
                seed=None if self.seed is None else str(self.seed),
                chunk_size=self.chunk_size,
                workers=self.workers,
                passed=self.report.passed,
                final_distance=self.report.final_distance,
                tolerance=self.report.tolerance,
                duration_sec=self.duration_sec,
                summary=self.report.to_dict(),
                started_at=self.started_at,
                finished_at=self.finished_at
            )
            for position, row in enumerate(self.rows):
                run.rows.append(ReportRowRecord(
                    position=position,
                    schedule_value=row.schedule_value,
                    distance=row.distance,
                    residual=row.residual,
                    tolerance=row.tolerance,
                    passed=row.passed
                ))
            db.add(run)
            db.commit()

            self.log(f"   Recorded run {self.run_id} ({len(self.rows)} rows)")
            return run.id

        except Exception as e:
            db.rollback()
            self.log(f"⚠️  Could not record {self.experiment}: {e}")
            return None
        finally:
            db.close()

    def to_dict(self) -> Dict:
        """Current state as dict (for debugging)"""
        return {
            "run_id": self.run_id,
            "experiment": self.experiment,
            "kind": self.kind,
            "duration_so_far": self.duration_sec,
            "passed": self.passed,
            "rows": len(self.rows),
            "error": self.error
        }


# ==================== GLOBAL TRACKER STORAGE ====================

# Active trackers for the sections of the current invocation
active_trackers: Dict[str, ExperimentRunTracker] = {}


def start_tracking_run(run_id: str, experiment: str, kind: str, **kwargs) -> ExperimentRunTracker:
    """
    Start tracking one experiment section.
    Call this before dispatching the experiment.
    """
    tracker = ExperimentRunTracker(run_id, experiment, kind, **kwargs)
    active_trackers[experiment] = tracker
    tracker.log(f"📊 Running {experiment} ({kind})")
    return tracker


def get_tracker(experiment: str) -> Optional[ExperimentRunTracker]:
    """Get the tracker for an active section"""
    return active_trackers.get(experiment)


def end_tracking_run(experiment: str, record: bool = False) -> Optional[ExperimentRunTracker]:
    """
    Stop tracking and, when record is set, store the section.
    A ledger failure is reported but never raised.
    """
    tracker = active_trackers.pop(experiment, None)
    if not tracker:
        print(f"⚠️  No tracker found for {experiment}")
        return None

    if record:
        tracker.save_run()

    return tracker
