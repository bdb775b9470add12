import json

import numpy as np
import pytest

from emrseg.errors import EmptyCorpusError, ValidationError
from emrseg.notes import LABELS, SampleType, SectionLabel
from emrseg.services.corpus_builder import build_test_corpus
from emrseg.services.evaluation import accuracy_matrix, build_report, evaluate, matrix_table, write_report

SEX, SERVICE, ALLERGIES = SectionLabel.SEX, SectionLabel.SERVICE, SectionLabel.ALLERGIES


class TestBuildReport:

    def test_eight_of_ten(self):
        gold = [SEX] * 5 + [SERVICE] * 5
        predicted = [SEX] * 5 + [SERVICE] * 3 + [ALLERGIES] * 2
        report = build_report([(SampleType.TYPE1, gold, predicted)])
        assert report.accuracy == pytest.approx(0.8)
        assert report.support == 10
        assert report.per_type['Type1'] == {'accuracy': 0.8, 'support': 10, 'correct': 8}

    def test_identity_predictions(self):
        gold = list(LABELS)
        report = build_report([(t, gold, gold) for t in SampleType])
        assert report.accuracy == 1.0
        assert all(entry['accuracy'] == 1.0 for entry in report.per_type.values())
        assert all(scores['f1'] == 1.0 for scores in report.per_label().values())

    def test_confusion_matrix_invariants(self):
        rng = np.random.default_rng(0)
        triples = []
        for t in SampleType:
            gold = [LABELS[i] for i in rng.integers(0, 25, size=40)]
            predicted = [LABELS[i] for i in rng.integers(0, 25, size=40)]
            triples.append((t, gold, predicted))
        report = build_report(triples)
        assert report.confusion.sum() == report.support == 160
        assert report.accuracy == pytest.approx(np.trace(report.confusion) / 160)
        gold_counts = np.bincount([g.index for _, gold, _ in triples for g in gold], minlength=25)
        np.testing.assert_array_equal(report.confusion.sum(axis=1), gold_counts)

    def test_per_label_scores(self):
        gold = [SEX, SEX, SERVICE, SERVICE]
        predicted = [SEX, SERVICE, SERVICE, SERVICE]
        scores = build_report([(SampleType.TYPE2, gold, predicted)]).per_label()
        assert scores['sex'] == {'precision': 1.0, 'recall': 0.5, 'f1': pytest.approx(2 / 3), 'support': 2}
        assert scores['service']['precision'] == pytest.approx(2 / 3)
        assert scores['allergies'] == {'precision': 0.0, 'recall': 0.0, 'f1': 0.0, 'support': 0}

    def test_empty(self):
        with pytest.raises(EmptyCorpusError):
            build_report([])
        with pytest.raises(EmptyCorpusError):
            build_report([(SampleType.TYPE1, [], [])])

    def test_length_mismatch(self):
        with pytest.raises(ValidationError):
            build_report([(SampleType.TYPE1, [SEX, SEX], [SEX])])


class TestReportOutput:

    @pytest.fixture
    def report(self):
        return build_report(
            [(SampleType.TYPE1, [SEX, SERVICE], [SEX, SEX]), (SampleType.TYPE3, [SEX], [SEX])],
            provenance={'corpus_kind': 'mixed', 'seed': 42, 'model_hash': 'abc', 'corpus_hash': None},
        )

    def test_json_document(self, report):
        data = json.loads(report.to_json())
        assert data['overall'] == {'accuracy': pytest.approx(2 / 3), 'support': 3}
        assert set(data['per_type']) == {'Type1', 'Type3'}
        assert data['labels'] == [label.value for label in LABELS]
        assert len(data['confusion']) == 25
        assert data['provenance']['model_hash'] == 'abc'

    def test_text_tables(self, report):
        text = report.to_text()
        assert text.splitlines()[0] == 'corpus_kind=mixed  seed=42  model_hash=abc'
        assert '0.5000' in text
        assert 'family history' in text

    def test_reports_are_reproducible(self, report, tmp_path):
        first = write_report(report, tmp_path / 'a')
        second = write_report(report, tmp_path / 'b', stem='eval')
        for a, b in zip(first, second):
            assert open(a, 'rb').read() == open(b, 'rb').read()


class TestAccuracyMatrix:

    def test_cells_and_missing_types(self):
        full = build_report([(t, [SEX], [SEX]) for t in SampleType])
        partial = build_report([(SampleType.TYPE2, [SEX, SEX], [SEX, SERVICE])])
        matrix = accuracy_matrix({'headings_only': full, 'no_headings': partial, 'mixed': full})
        assert sum(len(row) for row in matrix.values()) == 12
        assert matrix['no_headings'] == {'Type1': None, 'Type2': 0.5, 'Type3': None, 'Type4': None}

        table = matrix_table(matrix)
        assert 'training corpus' in table
        assert '-' in table.splitlines()[-2]
        assert '0.5000' in table


class TestEvaluate:

    def test_uses_the_segmenter_per_note(self, labeled_notes, mocker):
        corpus = build_test_corpus(labeled_notes[:3])
        segmenter = mocker.Mock()
        segmenter.predict_labels.side_effect = lambda note: list(note.labels)
        report = evaluate(segmenter, corpus, provenance={'seed': 1})
        assert segmenter.predict_labels.call_count == len(corpus)
        assert report.accuracy == 1.0
        assert set(report.per_type) == {t.value for t in SampleType}

    def test_empty_corpus(self, mocker):
        with pytest.raises(EmptyCorpusError):
            evaluate(mocker.Mock(), [])
