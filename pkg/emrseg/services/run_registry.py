"""
Run registry: bookkeeping of training runs, epochs and evaluations in the
SQL database.

Every public method swallows database errors after logging them; the model,
corpus and report files are what the pipeline guarantees.
"""

import logging
from datetime import datetime
from typing import Dict, List, Optional

from emrseg.models import EpochLog, EvaluationResult, TrainingRun, get_session

logger = logging.getLogger(__name__)


class RunRegistry:
    """Thin wrapper over a SQLAlchemy session."""

    def __init__(self, db_session=None):
        self.session = db_session
        if self.session is None:
            try:
                self.session = get_session()
            except Exception as e:
                logger.error(f"Run registry unavailable: {str(e)}", exc_info=True)

    def _commit(self) -> bool:
        try:
            self.session.commit()
            return True
        except Exception as e:
            logger.error(f"Run registry write failed: {str(e)}", exc_info=True)
            self.session.rollback()
            return False

    def start_run(self, corpus_kind: str, encoder_mode: str, seed: int, config_hash: str,
                  corpus_hash: str = None, num_notes: int = 0) -> Optional[int]:
        """Record a new training run; returns its id or None."""
        if self.session is None:
            return None
        try:
            run = TrainingRun(
                corpus_kind=corpus_kind,
                encoder_mode=encoder_mode,
                seed=seed,
                config_hash=config_hash,
                corpus_hash=corpus_hash,
                num_notes=num_notes,
                status='running',
            )
            self.session.add(run)
        except Exception as e:
            logger.error(f"Cannot record training run: {str(e)}", exc_info=True)
            return None
        return run.id if self._commit() else None

    def log_epoch(self, run_id: Optional[int], epoch: int, train_nll: float,
                  dev_nll: float = None, dev_accuracy: float = None):
        if self.session is None or run_id is None:
            return
        try:
            self.session.add(EpochLog(run_id=run_id, epoch=epoch, train_nll=train_nll,
                                      dev_nll=dev_nll, dev_accuracy=dev_accuracy))
        except Exception as e:
            logger.error(f"Cannot record epoch {epoch} of run {run_id}: {str(e)}", exc_info=True)
            return
        self._commit()

    def finish_run(self, run_id: Optional[int], status: str, model_path: str = None, model_hash: str = None,
                   epochs_completed: int = 0, best_dev_nll: float = None, best_dev_accuracy: float = None):
        if self.session is None or run_id is None:
            return
        try:
            run = self.session.get(TrainingRun, run_id)
            if run is None:
                logger.warning(f"Training run {run_id} not found in registry")
                return
            run.status = status
            run.model_path = model_path
            run.model_hash = model_hash
            run.epochs_completed = epochs_completed
            run.best_dev_nll = best_dev_nll
            run.best_dev_accuracy = best_dev_accuracy
            run.finished_at = datetime.utcnow()
        except Exception as e:
            logger.error(f"Cannot update training run {run_id}: {str(e)}", exc_info=True)
            return
        self._commit()

    def find_run(self, model_hash: str) -> Optional[int]:
        if self.session is None or not model_hash:
            return None
        try:
            run = self.session.query(TrainingRun).filter_by(model_hash=model_hash)\
                .order_by(TrainingRun.id.desc()).first()
            return run.id if run else None
        except Exception as e:
            logger.error(f"Run lookup failed: {str(e)}", exc_info=True)
            return None

    def record_evaluation(self, model_hash: str, per_type: Dict[str, Dict], accuracy: float, support: int,
                          corpus_hash: str = None, report_path: str = None):
        """One row per sample type plus an 'all' row."""
        if self.session is None:
            return
        run_id = self.find_run(model_hash)
        rows = [(t, e['accuracy'], e['support']) for t, e in per_type.items()]
        rows.append(('all', accuracy, support))
        try:
            for sample_type, value, count in rows:
                self.session.add(EvaluationResult(
                    run_id=run_id,
                    model_hash=model_hash,
                    corpus_hash=corpus_hash,
                    sample_type=sample_type,
                    accuracy=value,
                    support=count,
                    report_path=report_path,
                ))
        except Exception as e:
            logger.error(f"Cannot record evaluation of {model_hash}: {str(e)}", exc_info=True)
            return
        self._commit()

    def list_runs(self, limit: int = 20) -> List[Dict]:
        """Most recent runs first."""
        if self.session is None:
            return []
        try:
            runs = self.session.query(TrainingRun).order_by(TrainingRun.id.desc()).limit(limit).all()
        except Exception as e:
            logger.error(f"Cannot list runs: {str(e)}", exc_info=True)
            return []
        return [
            {
                'id': run.id,
                'corpus_kind': run.corpus_kind,
                'encoder_mode': run.encoder_mode,
                'seed': run.seed,
                'status': run.status,
                'epochs': run.epochs_completed,
                'best_dev_accuracy': run.best_dev_accuracy,
                'model_hash': (run.model_hash or '')[:12],
                'started_at': run.started_at.isoformat() if run.started_at else None,
            }
            for run in runs
        ]
