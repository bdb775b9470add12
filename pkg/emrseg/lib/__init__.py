"""
lib/__init__.py
Numeric and file-format building blocks for the segmenter.

Small, stateless functions: CRF dynamic programs, the LSTM reference cell,
power iteration for the common SIF component, and the binary tensor
container shared by embeddings and models.
"""

import logging

from .container import read_container, write_container
from .crf import crf_log_partition, crf_marginals, crf_nll, crf_path_score, viterbi_decode
from .lstm import lstm_step
from .power_iteration import dominant_direction

logger = logging.getLogger(__name__)

__all__ = [
    'crf_log_partition',
    'crf_marginals',
    'crf_nll',
    'crf_path_score',
    'dominant_direction',
    'lstm_step',
    'read_container',
    'viterbi_decode',
    'write_container',
]
