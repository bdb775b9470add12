"""
Sentence-level evaluation: accuracy per sample type, confusion matrix and
per-label precision/recall/F1, with the provenance of the model and corpus.
"""

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from emrseg.errors import EmptyCorpusError, ValidationError
from emrseg.notes import LABELS, SAMPLE_TYPES, LabeledNote, SampleType, SectionLabel

logger = logging.getLogger(__name__)

OVERALL = 'all'


@dataclass
class EvalReport:
    """
    Evaluation of one model on one test corpus.

    confusion[g, p] counts sentences with gold label id g predicted as p.
    """

    per_type: Dict[str, Dict] = field(default_factory=dict)
    accuracy: float = 0.0
    support: int = 0
    confusion: np.ndarray = field(default_factory=lambda: np.zeros((len(LABELS), len(LABELS)), dtype=np.int64))
    provenance: Dict = field(default_factory=dict)

    def per_label(self) -> Dict[str, Dict]:
        """Precision, recall and F1 per label; 0.0 where undefined."""
        tp = np.diag(self.confusion).astype(np.float64)
        predicted = self.confusion.sum(axis=0)
        gold = self.confusion.sum(axis=1)
        scores = {}
        for i, label in enumerate(LABELS):
            precision = tp[i] / predicted[i] if predicted[i] else 0.0
            recall = tp[i] / gold[i] if gold[i] else 0.0
            f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
            scores[label.value] = {
                'precision': float(precision),
                'recall': float(recall),
                'f1': float(f1),
                'support': int(gold[i]),
            }
        return scores

    def accuracy_of(self, sample_type: SampleType) -> Optional[float]:
        entry = self.per_type.get(sample_type.value)
        return entry['accuracy'] if entry else None

    def to_dict(self) -> Dict:
        return {
            'per_type': self.per_type,
            'overall': {'accuracy': self.accuracy, 'support': self.support},
            'per_label': self.per_label(),
            'labels': [label.value for label in LABELS],
            'confusion': self.confusion.tolist(),
            'provenance': self.provenance,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def to_text(self) -> str:
        """Aligned tables: accuracy per sample type, then per-label scores."""
        rows = [(t, e['accuracy'], e['support']) for t, e in self.per_type.items()]
        rows.append((OVERALL, self.accuracy, self.support))
        accuracy = pd.DataFrame(rows, columns=['sample_type', 'accuracy', 'support'])
        labels = pd.DataFrame.from_dict(self.per_label(), orient='index')
        lines = [
            _provenance_line(self.provenance),
            '',
            accuracy.to_string(index=False, float_format=lambda v: f"{v:.4f}"),
            '',
            labels.to_string(float_format=lambda v: f"{v:.4f}"),
        ]
        return '\n'.join(lines) + '\n'


def _provenance_line(provenance: Dict) -> str:
    keys = ('corpus_kind', 'encoder_mode', 'seed', 'model_hash', 'corpus_hash', 'config_hash')
    return '  '.join(f"{k}={provenance[k]}" for k in keys if provenance.get(k) is not None)


def build_report(
    predictions: Iterable[Tuple[SampleType, Sequence[SectionLabel], Sequence[SectionLabel]]],
    provenance: Dict = None
) -> EvalReport:
    """
    Aggregate (sample type, gold labels, predicted labels) triples.

    Raises:
        EmptyCorpusError: no sentence to score
        ValidationError: a prediction length differs from its gold length
    """
    confusion = np.zeros((len(LABELS), len(LABELS)), dtype=np.int64)
    correct: Dict[SampleType, int] = {}
    support: Dict[SampleType, int] = {}
    for sample_type, gold, predicted in predictions:
        if len(gold) != len(predicted):
            raise ValidationError(f"{len(predicted)} predictions for {len(gold)} gold labels")
        for g, p in zip(gold, predicted):
            confusion[g.index, p.index] += 1
        support[sample_type] = support.get(sample_type, 0) + len(gold)
        correct[sample_type] = correct.get(sample_type, 0) + sum(g == p for g, p in zip(gold, predicted))

    total = int(sum(support.values()))
    if total == 0:
        raise EmptyCorpusError("Cannot evaluate on an empty test corpus")

    per_type = {}
    for sample_type in SAMPLE_TYPES:
        if support.get(sample_type):
            per_type[sample_type.value] = {
                'accuracy': correct[sample_type] / support[sample_type],
                'support': support[sample_type],
                'correct': int(correct[sample_type]),
            }
    return EvalReport(
        per_type=per_type,
        accuracy=int(np.trace(confusion)) / total,
        support=total,
        confusion=confusion,
        provenance=dict(provenance or {}),
    )


def evaluate(segmenter, corpus: Sequence[LabeledNote], provenance: Dict = None) -> EvalReport:
    """Predict every note of a labeled test corpus and score the predictions."""
    if not corpus:
        raise EmptyCorpusError("Cannot evaluate on an empty test corpus")
    logger.info(f"=== Evaluating on {len(corpus)} note(s) ===")
    report = build_report(
        ((note.sample_type, note.labels, segmenter.predict_labels(note)) for note in corpus),
        provenance,
    )
    summary = ', '.join(f"{t} {e['accuracy']:.4f}" for t, e in report.per_type.items())
    logger.info(f"Accuracy {report.accuracy:.4f} over {report.support} sentence(s) ({summary})")
    return report


def write_report(report: EvalReport, directory, stem: str = 'eval') -> Tuple[str, str]:
    """Write ``<stem>.json`` and ``<stem>.txt`` into a directory."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    json_path = directory / f"{stem}.json"
    text_path = directory / f"{stem}.txt"
    json_path.write_text(report.to_json() + '\n', encoding='utf-8')
    text_path.write_text(report.to_text(), encoding='utf-8')
    logger.info(f"Wrote report {json_path}")
    return str(json_path), str(text_path)


def accuracy_matrix(reports: Dict[str, EvalReport]) -> Dict[str, Dict[str, Optional[float]]]:
    """Row per training corpus kind, one cell per test sample type."""
    return {
        kind: {t.value: report.accuracy_of(t) for t in SAMPLE_TYPES}
        for kind, report in reports.items()
    }


def matrix_table(matrix: Dict[str, Dict[str, Optional[float]]]) -> str:
    """Aligned text table of an accuracy matrix."""
    frame = pd.DataFrame.from_dict(matrix, orient='index', columns=[t.value for t in SAMPLE_TYPES])
    frame.index.name = 'training corpus'
    return frame.to_string(float_format=lambda v: f"{v:.4f}", na_rep='-') + '\n'
