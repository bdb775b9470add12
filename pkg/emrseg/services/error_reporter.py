"""
Error categorization and logging for command failures.

This module decides whether a failure is the user's (bad input, bad config,
missing file) or a bug in emrseg, and keeps a record of it in the run
registry database.
"""

import logging
import traceback
from typing import Dict

from emrseg.models import ErrorLog, get_session

logger = logging.getLogger(__name__)


class ErrorReporter:
    """
    Handles error categorization and persistence.
    """

    # Known user/config error patterns
    USER_ERROR_PATTERNS = [
        'FileNotFoundError',
        'PermissionError',
        'IsADirectoryError',
        'UnicodeDecodeError',
        'ConfigurationError',
        'GrammarError',
        'ValidationError',
        'EmptyInputError',
        'EmptyNoteError',
        'EmptyCorpusError',
        'NoAnchorSectionError',
        'EmbeddingFormatError',
        'ContainerFormatError',
        'ChecksumError',
        'VersionMismatchError',
        'ShapeMismatchError',
    ]

    def __init__(self, db_session=None):
        """
        Initialize the error reporter.

        Args:
            db_session: SQLAlchemy session (opened lazily when omitted)
        """
        self.session = db_session

    def handle_error(self, error: Exception, command: str = None, exit_code: int = None,
                     context: Dict = None) -> str:
        """
        Categorize an error and record it.

        Args:
            error: The exception that occurred
            command: CLI verb that failed
            exit_code: Exit code the process will return
            context: Additional context about the error

        Returns:
            'user_error', 'bug' or 'unknown'
        """
        error_type = type(error).__name__
        error_message = str(error)
        stack_trace = ''.join(traceback.format_exception(type(error), error, error.__traceback__))
        category = self._categorize_error(error_type, error_message, stack_trace)
        logger.debug(f"Error categorized as: {category}")

        try:
            if self.session is None:
                self.session = get_session()
            self.session.add(ErrorLog(
                error_type=error_type,
                error_category=category,
                error_message=error_message or error_type,
                stack_trace=stack_trace,
                command=command,
                exit_code=exit_code,
            ))
            self.session.commit()
        except Exception as e:
            logger.error(f"Error in error reporter: {str(e)}", exc_info=True)

        if category == 'bug':
            logger.error(f"Unexpected failure in '{command}' ({error_type}); context: {context or {}}")
        return category

    def _categorize_error(self, error_type: str, error_message: str, stack_trace: str) -> str:
        """
        Categorize an error as user error or bug.

        Returns:
            'user_error', 'bug', or 'unknown'
        """
        for pattern in self.USER_ERROR_PATTERNS:
            if pattern.lower() == error_type.lower():
                return 'user_error'

        config_keywords = ['config', 'permission', 'not found', 'no such file']
        if any(keyword in error_message.lower() for keyword in config_keywords):
            return 'user_error'

        # A failure raised from our own package is a bug
        if 'emrseg/' in stack_trace or 'emrseg\\' in stack_trace:
            return 'bug'

        return 'unknown'

    def get_error_stats(self) -> Dict:
        """
        Get statistics about recorded errors.

        Returns:
            Dictionary with error counts per category
        """
        try:
            if self.session is None:
                self.session = get_session()
            total_errors = self.session.query(ErrorLog).count()
            user_errors = self.session.query(ErrorLog).filter_by(error_category='user_error').count()
            bugs = self.session.query(ErrorLog).filter_by(error_category='bug').count()
            return {
                'total_errors': total_errors,
                'user_errors': user_errors,
                'bugs': bugs,
                'unresolved_bugs': self.session.query(ErrorLog).filter_by(error_category='bug', resolved=False).count(),
            }
        except Exception as e:
            logger.error(f"Error getting stats: {str(e)}", exc_info=True)
            return {}
