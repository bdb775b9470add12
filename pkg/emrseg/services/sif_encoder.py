"""
Sentence vectors for the tagger.

SIF mode weights every in-vocabulary word vector by alpha / (alpha + p(w)),
averages them, and removes from every sentence of a note its projection on
the note's dominant singular direction. AVE mode is the plain mean of the
word vectors with no removal.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from emrseg.config import SifConfig
from emrseg.errors import ConfigurationError
from emrseg.lib.power_iteration import dominant_direction
from emrseg.notes import LabeledNote
from emrseg.services.embeddings import EmbeddingMatrix, Vocabulary

logger = logging.getLogger(__name__)

SIF = 'sif'
AVE = 'ave'
ENCODER_MODES = (SIF, AVE)


def sif_weight(p: float, alpha: float) -> float:
    """alpha / (alpha + p); 1.0 for an unseen word."""
    return alpha / (alpha + p)


@dataclass
class EncodedNote:
    """
    Sentence vectors of one note.

    oov[j] is True when sentence j had no in-vocabulary token and its vector
    is zero. direction is the removed unit vector (None in AVE mode or for
    an all-zero note).
    """

    vectors: np.ndarray
    oov: List[bool] = field(default_factory=list)
    direction: Optional[np.ndarray] = None

    def __len__(self) -> int:
        return int(self.vectors.shape[0])


def weighted_sentence_vector(
    tokens: Sequence[str],
    vocab: Vocabulary,
    embeddings: EmbeddingMatrix,
    cfg: SifConfig = None
) -> Tuple[np.ndarray, bool]:
    """
    SIF weighted average of the word vectors of one sentence.

    Out-of-vocabulary tokens are skipped; n counts in-vocabulary tokens only.

    Returns:
        (d-vector, flag) where flag is True for an all-OOV sentence
    """
    cfg = cfg or SifConfig()
    ids = vocab.ids(tokens)
    if not ids:
        return np.zeros(embeddings.dim, dtype=np.float64), True
    weights = cfg.alpha / (cfg.alpha + vocab.probabilities[ids])
    return (weights[:, None] * embeddings.vectors[ids]).mean(axis=0), False


def common_direction(vectors: np.ndarray, cfg: SifConfig = None) -> Optional[np.ndarray]:
    """Dominant left singular direction of a note's sentence vectors."""
    cfg = cfg or SifConfig()
    direction, _ = dominant_direction(vectors, max_steps=cfg.power_steps, tolerance=cfg.power_tolerance)
    return direction


def remove_common_component(vectors, cfg: SifConfig = None) -> np.ndarray:
    """
    Subtract from every sentence vector its projection on the note's
    dominant singular direction u: s - u (u . s).

    An all-zero input comes back unchanged.

    Args:
        vectors: (J, d) sentence vectors of one note, J >= 1

    Returns:
        (J, d) array
    """
    vectors = np.asarray(vectors, dtype=np.float64)
    direction = common_direction(vectors, cfg)
    if direction is None:
        return vectors.copy()
    return vectors - np.outer(vectors @ direction, direction)


def _sentences_of(note) -> List[Sequence[str]]:
    if isinstance(note, LabeledNote):
        return note.token_sequences
    return list(note)


def encode_note(
    note,
    vocab: Vocabulary,
    embeddings: EmbeddingMatrix,
    cfg: SifConfig = None,
    mode: str = SIF
) -> EncodedNote:
    """
    Encode every sentence of a note.

    Args:
        note: LabeledNote or a sequence of token sequences
        mode: 'sif' or 'ave'

    Returns:
        EncodedNote with one vector per sentence
    """
    return SifEncoder(vocab, embeddings, cfg, mode).encode(note)


class SifEncoder:
    """
    Sentence encoder bound to one vocabulary and embedding matrix.

    Word weights are computed once; the encoder is read-only afterwards, so
    one instance can serve many threads.
    """

    def __init__(
        self,
        vocab: Vocabulary,
        embeddings: EmbeddingMatrix,
        cfg: SifConfig = None,
        mode: str = SIF
    ):
        if mode not in ENCODER_MODES:
            raise ConfigurationError(f"Unknown encoder mode '{mode}' (expected one of {ENCODER_MODES})")
        self.cfg = cfg or SifConfig()
        self.cfg.validate()
        embeddings.check(vocab)
        self.vocab = vocab
        self.embeddings = embeddings
        self.mode = mode
        if mode == SIF:
            self.weights = self.cfg.alpha / (self.cfg.alpha + vocab.probabilities)
        else:
            self.weights = np.ones(len(vocab), dtype=np.float64)

    @property
    def dim(self) -> int:
        return self.embeddings.dim

    def settings(self) -> Dict:
        return {
            'mode': self.mode,
            'alpha': self.cfg.alpha,
            'power_steps': self.cfg.power_steps,
            'power_tolerance': self.cfg.power_tolerance,
        }

    def sentence_vector(self, tokens: Sequence[str]) -> Tuple[np.ndarray, bool]:
        ids = self.vocab.ids(tokens)
        if not ids:
            return np.zeros(self.dim, dtype=np.float64), True
        return (self.weights[ids, None] * self.embeddings.vectors[ids]).mean(axis=0), False

    def encode(self, note) -> EncodedNote:
        sentences = _sentences_of(note)
        if not sentences:
            return EncodedNote(vectors=np.zeros((0, self.dim), dtype=np.float64))

        rows, flags = zip(*(self.sentence_vector(tokens) for tokens in sentences))
        vectors = np.vstack(rows)
        if self.mode == AVE:
            return EncodedNote(vectors=vectors, oov=list(flags))

        direction = common_direction(vectors, self.cfg)
        if direction is not None:
            vectors = vectors - np.outer(vectors @ direction, direction)
        return EncodedNote(vectors=vectors, oov=list(flags), direction=direction)

    def encode_many(self, notes: Iterable, threads: int = 1) -> List[EncodedNote]:
        """Encode notes, optionally on a thread pool; results keep input order."""
        notes = list(notes)
        if threads <= 1 or len(notes) < 2:
            encoded = [self.encode(note) for note in notes]
        else:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                encoded = list(pool.map(self.encode, notes))

        flagged = sum(sum(e.oov) for e in encoded)
        if flagged:
            logger.info(f"{flagged} sentence(s) had no in-vocabulary token and were encoded as zero vectors")
        logger.debug(f"Encoded {len(encoded)} note(s) in {self.mode} mode")
        return encoded
