"""
Run registry maintenance script for emrseg.

Creates the registry tables if needed, prints a summary of recorded training
runs, evaluations and errors, and can mark recorded bugs as resolved.

Usage:
    python scripts/registry_summary.py [--resolve ERROR_ID ...] [--db-url URL]
"""

import argparse
import logging
import os
import sys

# Add parent directory to path to import emrseg modules
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from emrseg.models import ErrorLog, EvaluationResult, TrainingRun, get_session, init_db
from emrseg.services.error_reporter import ErrorReporter

logging.basicConfig(level=logging.INFO)
logger = logging.getLogger(__name__)


def resolve_errors(session, error_ids):
    """
    Mark error rows as resolved.

    Args:
        session: SQLAlchemy session
        error_ids: ErrorLog ids

    Returns:
        Number of rows updated
    """
    updated = 0
    for error_id in error_ids:
        row = session.get(ErrorLog, error_id)
        if row is None:
            logger.warning(f"Error {error_id} not found, skipping...")
            continue
        row.resolved = True
        updated += 1
    session.commit()
    return updated


def summarize(session):
    """Counts of runs by status, evaluations and errors."""
    runs = session.query(TrainingRun).all()
    by_status = {}
    for run in runs:
        by_status[run.status] = by_status.get(run.status, 0) + 1
    return {
        'runs': len(runs),
        'runs_by_status': by_status,
        'evaluations': session.query(EvaluationResult).filter_by(sample_type='all').count(),
        'errors': ErrorReporter(session).get_error_stats(),
    }


def main(argv=None):
    parser = argparse.ArgumentParser(description='Summarize the emrseg run registry')
    parser.add_argument('--db-url', help='database URL (default: EMRSEG_DB_URL, then $DATA_DIR/emrseg.db)')
    parser.add_argument('--resolve', type=int, nargs='*', default=[], metavar='ERROR_ID',
                        help='mark these error rows as resolved')
    args = parser.parse_args(argv)

    logger.info("=" * 60)
    logger.info("emrseg Run Registry")
    logger.info("=" * 60)

    engine = init_db(args.db_url)
    session = get_session(engine)

    try:
        if args.resolve:
            logger.info(f"Resolved {resolve_errors(session, args.resolve)} error(s)")

        summary = summarize(session)
        logger.info(f"  Training runs: {summary['runs']} {summary['runs_by_status']}")
        logger.info(f"  Evaluations: {summary['evaluations']}")
        errors = summary['errors']
        logger.info(f"  Errors: {errors.get('total_errors', 0)} "
                    f"({errors.get('user_errors', 0)} user, {errors.get('unresolved_bugs', 0)} open bug(s))")
        logger.info("=" * 60)
        return summary

    except Exception as e:
        logger.error(f"Error reading registry: {str(e)}", exc_info=True)
        session.rollback()
        sys.exit(1)

    finally:
        session.close()


if __name__ == '__main__':
    main()
