"""
EMR section segmenter.

A trainable, format-agnostic segmenter that assigns every sentence of a
clinical discharge note to one of 25 canonical section labels using SIF
sentence embeddings, a BiLSTM and a linear-chain CRF.
"""

__version__ = '1.0.0'
__author__ = 'emrseg Project'

import logging
import os


def setup_logging(log_level: str = None, log_dir: str = None):
    """
    Configure application logging.

    Args:
        log_level: Level name (defaults to LOG_LEVEL env var, then INFO)
        log_dir: Directory for the log file (defaults to LOG_DIR env var,
            then $DATA_DIR/logs)
    """
    log_level = (log_level or os.getenv('LOG_LEVEL', 'INFO')).upper()
    data_dir = os.getenv('DATA_DIR', './data')
    log_dir = log_dir or os.getenv('LOG_DIR', os.path.join(data_dir, 'logs'))
    os.makedirs(log_dir, exist_ok=True)

    log_file = os.path.join(log_dir, 'emrseg.log')

    # stderr keeps stdout free for JSON Lines output
    logging.basicConfig(
        level=getattr(logging, log_level, logging.INFO),
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        handlers=[
            logging.StreamHandler(),
            logging.FileHandler(log_file)
        ],
        force=True
    )

    logging.getLogger(__name__).info(f"emrseg v{__version__} initialized")
