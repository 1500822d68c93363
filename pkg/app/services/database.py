"""
Database models and setup for the run ledger
Using SQLite by default (PHILAB_DATABASE_URL points anywhere sqlalchemy can)
"""
from datetime import datetime
from typing import Optional

from sqlalchemy import create_engine, Column, Integer, String, DateTime, Boolean, Float, ForeignKey, JSON
from sqlalchemy.orm import declarative_base, sessionmaker, relationship

from app.services.config import get_database_url

# Create base class for models
Base = declarative_base()


class ExperimentRun(Base):
    """
    One experiment section of one `philab run --record` invocation
    """
    __tablename__ = "experiment_runs"

    id = Column(Integer, primary_key=True, autoincrement=True)
    run_id = Column(String(64), index=True, nullable=False)  # shared by all sections of one invocation
    experiment = Column(String(100), nullable=False)
    kind = Column(String(30), nullable=False)
    config_path = Column(String(500))
    settings = Column(JSON)  # validated section, after overrides

    # Reproducibility triple
    seed = Column(String(20))  # up to 2^64 - 1, beyond signed SQL integers
    chunk_size = Column(Integer)
    workers = Column(Integer)

    # Outcome
    passed = Column(Boolean, default=False)
    final_distance = Column(Float)
    tolerance = Column(Float)
    duration_sec = Column(Float)
    summary = Column(JSON)  # report label, trend verdict and extras
    started_at = Column(DateTime)
    finished_at = Column(DateTime, default=datetime.utcnow)

    # Relationships
    rows = relationship("ReportRowRecord", back_populates="run", cascade="all, delete-orphan")

    def __repr__(self):
        return f"<ExperimentRun(run_id={self.run_id}, experiment={self.experiment}, passed={self.passed})>"

    def to_dict(self):
        return {
            "id": self.id,
            "run_id": self.run_id,
            "experiment": self.experiment,
            "kind": self.kind,
            "config_path": self.config_path,
            "seed": self.seed,
            "chunk_size": self.chunk_size,
            "workers": self.workers,
            "passed": self.passed,
            "final_distance": self.final_distance,
            "tolerance": self.tolerance,
            "duration_sec": self.duration_sec,
            "summary": self.summary,
            "finished_at": self.finished_at.isoformat() if self.finished_at else None
        }


class ReportRowRecord(Base):
    """A stored copy of one CSV row"""
    __tablename__ = "report_rows"

    id = Column(Integer, primary_key=True, index=True)
    run_pk = Column(Integer, ForeignKey("experiment_runs.id"), index=True)
    position = Column(Integer)
    schedule_value = Column(Float)  # NULL for the summary row
    distance = Column(Float)
    residual = Column(Float)
    tolerance = Column(Float)
    passed = Column(Boolean)

    # Relationship
    run = relationship("ExperimentRun", back_populates="rows")

    def __repr__(self):
        return f"<ReportRowRecord(run_pk={self.run_pk}, position={self.position}, distance={self.distance})>"


# ==================== DATABASE CONNECTION ====================

engine = None
SessionLocal = None


def init_db(database_url: Optional[str] = None):
    """Bind the ledger to database_url (default PHILAB_DATABASE_URL) and create tables"""
    global engine, SessionLocal
    url = database_url or get_database_url()
    engine = create_engine(url, echo=False)
    SessionLocal = sessionmaker(autocommit=False, autoflush=False, bind=engine)
    Base.metadata.create_all(bind=engine)
    return engine


def get_db():
    """Get database session (caller closes it)"""
    if SessionLocal is None:
        init_db()
    return SessionLocal()
