"""
Database models for the emrseg run registry.

This module defines the schema for recording training runs, their per-epoch
logs, evaluation results and errors raised by the command-line pipeline.
The files written to disk are the contract; the registry is bookkeeping.
"""

from datetime import datetime
from sqlalchemy import create_engine, Column, Integer, String, Text, Boolean, DateTime, ForeignKey, Float
from sqlalchemy.orm import declarative_base, relationship, sessionmaker
import os

Base = declarative_base()


class TrainingRun(Base):
    """
    One invocation of the tagger trainer.

    Stores the provenance chain of the produced model.
    """
    __tablename__ = 'training_runs'

    id = Column(Integer, primary_key=True)
    corpus_kind = Column(String(50), nullable=False)  # headings_only, no_headings, mixed
    encoder_mode = Column(String(10), nullable=False, default='sif')  # sif, ave
    seed = Column(Integer, nullable=False)
    config_hash = Column(String(64), nullable=False)
    corpus_hash = Column(String(64), nullable=True)
    model_hash = Column(String(64), nullable=True)
    model_path = Column(String(1024), nullable=True)
    num_notes = Column(Integer, default=0)
    epochs_completed = Column(Integer, default=0)
    best_dev_nll = Column(Float, nullable=True)
    best_dev_accuracy = Column(Float, nullable=True)
    status = Column(String(20), nullable=False, default='running')  # running, completed, failed
    started_at = Column(DateTime, default=datetime.utcnow)
    finished_at = Column(DateTime, nullable=True)

    # Relationships
    epochs = relationship("EpochLog", back_populates="run", cascade="all, delete-orphan",
                          order_by="EpochLog.epoch")
    evaluations = relationship("EvaluationResult", back_populates="run", cascade="all, delete-orphan")

    def __repr__(self):
        return f"<TrainingRun {self.id} {self.corpus_kind}/{self.encoder_mode} seed={self.seed}>"


class EpochLog(Base):
    """Per-epoch training curve row."""
    __tablename__ = 'epoch_logs'

    id = Column(Integer, primary_key=True)
    run_id = Column(Integer, ForeignKey('training_runs.id'), nullable=False)
    epoch = Column(Integer, nullable=False)
    train_nll = Column(Float, nullable=False)
    dev_nll = Column(Float, nullable=True)
    dev_accuracy = Column(Float, nullable=True)

    # Relationships
    run = relationship("TrainingRun", back_populates="epochs")

    def __repr__(self):
        return f"<EpochLog run={self.run_id} epoch={self.epoch}>"


class EvaluationResult(Base):
    """
    Accuracy of one model on one sample type of a test corpus.

    sample_type 'all' holds the overall accuracy.
    """
    __tablename__ = 'evaluation_results'

    id = Column(Integer, primary_key=True)
    run_id = Column(Integer, ForeignKey('training_runs.id'), nullable=True)  # Null when the model was not trained here
    model_hash = Column(String(64), nullable=False)
    corpus_hash = Column(String(64), nullable=True)
    sample_type = Column(String(10), nullable=False)  # Type1..Type4, all
    accuracy = Column(Float, nullable=False)
    support = Column(Integer, nullable=False)
    report_path = Column(String(1024), nullable=True)
    evaluated_at = Column(DateTime, default=datetime.utcnow)

    # Relationships
    run = relationship("TrainingRun", back_populates="evaluations")

    def __repr__(self):
        return f"<EvaluationResult {self.sample_type}={self.accuracy:.4f}>"


class ErrorLog(Base):
    """
    Stores error logs for debugging.

    Tracks errors to categorize them as user errors vs bugs.
    """
    __tablename__ = 'error_logs'

    id = Column(Integer, primary_key=True)
    error_type = Column(String(100), nullable=False)  # ConfigurationError, ChecksumError, NumericalError, etc.
    error_category = Column(String(50), nullable=False)  # user_error, bug, unknown
    error_message = Column(Text, nullable=False)
    stack_trace = Column(Text, nullable=True)
    command = Column(String(255), nullable=True)  # CLI verb that failed
    exit_code = Column(Integer, nullable=True)
    resolved = Column(Boolean, default=False)
    occurred_at = Column(DateTime, default=datetime.utcnow)

    def __repr__(self):
        return f"<ErrorLog {self.error_type} at {self.occurred_at}>"


# Database initialization
def init_db(db_url=None):
    """
    Initialize the database with tables.

    Args:
        db_url: Database URL (defaults to EMRSEG_DB_URL, then SQLite in the
            data directory)
    """
    if db_url is None:
        db_url = os.getenv('EMRSEG_DB_URL')

    if db_url is None:
        data_dir = os.getenv('DATA_DIR', './data')
        os.makedirs(data_dir, exist_ok=True)
        db_url = f'sqlite:///{data_dir}/emrseg.db'

    engine = create_engine(db_url, echo=False)
    Base.metadata.create_all(engine)
    return engine


def get_session(engine=None):
    """
    Get a database session.

    Args:
        engine: SQLAlchemy engine (creates default if None)

    Returns:
        SQLAlchemy session
    """
    if engine is None:
        engine = init_db()

    Session = sessionmaker(bind=engine)
    return Session()
