"""
Black-box segmentation of raw notes with a trained model container.

Raw text goes through the stored normalizer, which strips every symbol. An
XML-style section tag typed into a raw note, such as ``<chief_complaint>``,
therefore reaches the tagger as the label words (``chief complaint``), the
tokens of a canonical-label heading, and never as the single ``<slug>`` tag
token that Type4 training samples carry.
"""

import logging
from dataclasses import dataclass
from typing import Dict, List, Optional

import numpy as np

from emrseg.config import SifConfig
from emrseg.notes import LABELS, LabeledNote, RawNote, SectionLabel, file_hash, label_runs
from emrseg.services.sequence_tagger import ModelBundle, label_marginals, load_model, predict_ids
from emrseg.services.sif_encoder import SifEncoder
from emrseg.services.text_normalizer import TextNormalizer

logger = logging.getLogger(__name__)


@dataclass
class SegmentedSentence:
    index: int
    text: str
    tokens: tuple
    label: SectionLabel
    probability: Optional[float] = None

    def to_dict(self, note_id: str) -> Dict:
        record = {
            'note_id': note_id,
            'index': self.index,
            'text': self.text,
            'label': self.label.value,
        }
        if self.probability is not None:
            record['probability'] = self.probability
        return record


class Segmenter:
    """
    Normalizer, sentence encoder and tagger restored from one container.

    Read-only after construction.
    """

    def __init__(self, bundle: ModelBundle, model_hash: str = None):
        self.bundle = bundle
        self.model = bundle.model
        self.model_hash = model_hash
        meta = bundle.meta
        self.normalizer = TextNormalizer.from_settings(meta.get('normalizer', {}))
        encoder = meta.get('encoder', {})
        cfg = SifConfig(
            alpha=encoder.get('alpha', SifConfig.alpha),
            power_steps=encoder.get('power_steps', SifConfig.power_steps),
            power_tolerance=encoder.get('power_tolerance', SifConfig.power_tolerance),
        )
        self.encoder = SifEncoder(bundle.vocab, bundle.embeddings, cfg, encoder.get('mode', 'sif'))

    @classmethod
    def load(cls, path, expected_input_dim: int = None) -> 'Segmenter':
        return cls(load_model(path, expected_input_dim), model_hash=file_hash(path))

    @property
    def meta(self) -> Dict:
        return self.bundle.meta

    def predict_labels(self, note: LabeledNote) -> List[SectionLabel]:
        """Labels for an already normalized note (evaluation path)."""
        if len(note) == 0:
            return []
        encoded = self.encoder.encode(note)
        return [LABELS[i] for i in predict_ids(encoded.vectors, self.model)]

    def segment(self, note: RawNote, marginals: bool = False) -> List[SegmentedSentence]:
        """
        Split, encode and label a raw note.

        Raises:
            EmptyNoteError: the note yields no sentence
        """
        sentences = self.normalizer.split_sentences(note)
        encoded = self.encoder.encode([s.tokens for s in sentences])
        path = predict_ids(encoded.vectors, self.model)
        probabilities = None
        if marginals:
            posterior = label_marginals(encoded.vectors, self.model)
            probabilities = posterior[np.arange(len(path)), path]

        segmented = []
        for i, (sentence, label_id) in enumerate(zip(sentences, path)):
            start, end = sentence.span
            segmented.append(SegmentedSentence(
                index=i,
                text=note.text[start:end],
                tokens=sentence.tokens,
                label=LABELS[label_id],
                probability=None if probabilities is None else float(probabilities[i]),
            ))
        logger.debug(f"Segmented note {note.note_id} into {len(segmented)} sentence(s)")
        return segmented


def sections(note_id: str, segmented: List[SegmentedSentence]) -> List[Dict]:
    """One record per contiguous run of a label."""
    records = []
    for label, first, last in label_runs([s.label for s in segmented]):
        records.append({
            'note_id': note_id,
            'label': label.value,
            'first': first,
            'last': last,
            'text': '\n'.join(s.text for s in segmented[first:last + 1]),
        })
    return records
