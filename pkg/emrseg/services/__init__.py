"""
Services module for emrseg.

This module contains the pipeline stages: text normalization, corpus
building, word vectors, sentence encoding, the BiLSTM-CRF tagger,
segmentation, evaluation and run bookkeeping.
"""

from .error_reporter import ErrorReporter
from .run_registry import RunRegistry
from .segmenter import Segmenter
from .sif_encoder import SifEncoder
from .text_normalizer import TextNormalizer

__all__ = ['ErrorReporter', 'RunRegistry', 'Segmenter', 'SifEncoder', 'TextNormalizer']
