"""
Shared fixtures: an isolated data directory and database per test, a small
synthetic corpus, random word vectors and an untrained model container.
"""

from pathlib import Path

import numpy as np
import pytest
import torch

from emrseg.services.corpus_builder import label_notes
from emrseg.services.embeddings import EmbeddingMatrix, build_vocabulary
from emrseg.services.sequence_tagger import SectionTagger, save_model
from emrseg.services.sif_encoder import SifEncoder
from emrseg.services.synthetic_notes import default_grammar, generate_synthetic_notes
from emrseg.services.text_normalizer import TextNormalizer

RESOURCES = Path(__file__).resolve().parent.parent / 'resources'

# Global flags that shrink every model so command tests run in seconds
TINY_FLAGS = [
    '--set', 'skipgram.dim=16',
    '--set', 'skipgram.window=4',
    '--set', 'skipgram.epochs=1',
    '--set', 'skipgram.batch_size=256',
    '--set', 'train.hidden_size=16',
    '--set', 'train.max_epochs=2',
    '--set', 'train.dev_fraction=0.2',
]


@pytest.fixture(autouse=True)
def isolated_environment(tmp_path, monkeypatch):
    """Logs, data and the run registry live under the test's tmp_path."""
    monkeypatch.setenv('DATA_DIR', str(tmp_path / 'data'))
    monkeypatch.setenv('LOG_DIR', str(tmp_path / 'logs'))
    monkeypatch.setenv('EMRSEG_DB_URL', f"sqlite:///{tmp_path / 'registry.db'}")
    monkeypatch.delenv('EMRSEG_SEED', raising=False)
    monkeypatch.delenv('LOG_LEVEL', raising=False)


@pytest.fixture
def grammar():
    return default_grammar()


@pytest.fixture
def raw_notes(grammar):
    return generate_synthetic_notes(grammar, 12, seed=7)


@pytest.fixture
def labeled_notes(raw_notes):
    labeled, skipped = label_notes(raw_notes)
    assert not skipped
    return labeled


@pytest.fixture
def vocab_and_embeddings(labeled_notes):
    vocab = build_vocabulary(labeled_notes)
    vectors = np.random.default_rng(0).normal(size=(len(vocab), 8))
    return vocab, EmbeddingMatrix(vectors=vectors, vocab_hash=vocab.vocab_hash())


@pytest.fixture
def model_path(tmp_path, vocab_and_embeddings):
    """Untrained tagger packed with the random vectors."""
    vocab, matrix = vocab_and_embeddings
    torch.manual_seed(0)
    model = SectionTagger(matrix.dim, 6)
    meta = {
        'encoder': SifEncoder(vocab, matrix).settings(),
        'normalizer': TextNormalizer().settings(),
    }
    return save_model(tmp_path / 'model.emrseg', model, vocab, matrix, meta)
