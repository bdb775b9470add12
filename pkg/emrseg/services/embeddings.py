"""
Vocabulary statistics and skip-gram word vectors.

The vocabulary keeps exact token counts so that p(w) = n_w / n_all is
available for SIF weighting. Word vectors are trained with skip-gram and
negative sampling (negatives drawn in proportion to count^0.75) on the note
token streams.
"""

import hashlib
import logging
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Sequence, Tuple

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

from emrseg.config import SkipGramConfig
from emrseg.errors import EmbeddingFormatError, EmptyCorpusError, ShapeMismatchError, ValidationError
from emrseg.lib.container import is_container, pack_json, read_container, unpack_json, write_container
from emrseg.notes import LabeledNote

logger = logging.getLogger(__name__)

NEGATIVE_POWER = 0.75


class Vocabulary:
    """
    Token ids and counts.

    Ids are dense in [0, |V|); p(w) = n_w / n_all.
    """

    def __init__(self, tokens: Sequence[str], counts: Sequence[int]):
        if len(tokens) != len(counts):
            raise ValidationError(f"{len(tokens)} tokens but {len(counts)} counts")
        self.tokens: List[str] = list(tokens)
        self.counts = np.asarray(counts, dtype=np.int64)
        self.index: Dict[str, int] = {token: i for i, token in enumerate(self.tokens)}
        if len(self.index) != len(self.tokens):
            raise ValidationError("Vocabulary tokens must be unique")
        if len(self.counts) and self.counts.min() < 1:
            raise ValidationError("Every vocabulary count must be >= 1")

    def __len__(self) -> int:
        return len(self.tokens)

    def __contains__(self, token: str) -> bool:
        return token in self.index

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def probabilities(self) -> np.ndarray:
        return self.counts / float(self.total)

    def probability(self, token: str) -> float:
        """p(w); 0.0 for tokens outside the vocabulary."""
        i = self.index.get(token)
        return 0.0 if i is None else float(self.counts[i]) / self.total

    def ids(self, tokens: Iterable[str]) -> List[int]:
        """Ids of in-vocabulary tokens; unknown tokens are skipped."""
        return [self.index[t] for t in tokens if t in self.index]

    def vocab_hash(self) -> str:
        digest = hashlib.sha256()
        for token, count in zip(self.tokens, self.counts):
            digest.update(f"{token}\t{int(count)}\n".encode('utf-8'))
        return digest.hexdigest()


@dataclass
class EmbeddingMatrix:
    """|V| x d word vectors paired with the hash of their vocabulary."""

    vectors: np.ndarray
    vocab_hash: str
    epoch_losses: List[float] = field(default_factory=list)

    @property
    def dim(self) -> int:
        return int(self.vectors.shape[1])

    def check(self, vocab: Vocabulary):
        if self.vectors.shape[0] != len(vocab):
            raise ShapeMismatchError(
                f"Embedding matrix has {self.vectors.shape[0]} rows for a vocabulary of {len(vocab)}"
            )
        if self.vocab_hash != vocab.vocab_hash():
            raise ShapeMismatchError("Embedding matrix was built for a different vocabulary")
        if not np.all(np.isfinite(self.vectors)):
            raise EmbeddingFormatError("Embedding matrix contains non-finite values")


def note_token_streams(corpus: Iterable) -> List[List[str]]:
    """
    Token stream of each note: its sentences concatenated.

    Accepts LabeledNote items or plain token sequences.
    """
    streams = []
    for item in corpus:
        if isinstance(item, LabeledNote):
            streams.append([token for sentence in item.sentences for token in sentence.tokens])
        else:
            streams.append(list(item))
    return streams


def build_vocabulary(corpus: Iterable) -> Vocabulary:
    """
    Count every token occurrence.

    Ids are ordered by descending count, ties broken alphabetically.

    Raises:
        EmptyCorpusError: the corpus holds no token
    """
    counter = Counter()
    for stream in note_token_streams(corpus):
        counter.update(stream)
    if not counter:
        raise EmptyCorpusError("Cannot build a vocabulary from an empty corpus")

    ordered = sorted(counter.items(), key=lambda item: (-item[1], item[0]))
    vocab = Vocabulary([token for token, _ in ordered], [count for _, count in ordered])
    logger.info(f"Built vocabulary of {len(vocab)} types over {vocab.total} tokens")
    return vocab


def sgns_loss(center: torch.Tensor, context: torch.Tensor, negatives: torch.Tensor) -> torch.Tensor:
    """
    Summed skip-gram negative-sampling loss.

    -[log sigmoid(c . o) + sum_k log sigmoid(-c . n_k)] summed over the batch.

    Args:
        center: (B, d) input-side vectors
        context: (B, d) output-side vectors of the observed contexts
        negatives: (B, k, d) output-side vectors of the sampled negatives
    """
    positive = F.logsigmoid((center * context).sum(dim=-1))
    negative = F.logsigmoid(-torch.bmm(negatives, center.unsqueeze(2)).squeeze(2)).sum(dim=-1)
    return -(positive + negative).sum()


class SkipGramModel(nn.Module):
    """Input and output embedding tables."""

    def __init__(self, vocab_size: int, dim: int):
        super(SkipGramModel, self).__init__()
        self.in_embed = nn.Embedding(vocab_size, dim, sparse=True)
        self.out_embed = nn.Embedding(vocab_size, dim, sparse=True)
        bound = 0.5 / dim
        with torch.no_grad():
            self.in_embed.weight.uniform_(-bound, bound)
            self.out_embed.weight.zero_()

    def forward(self, center: torch.Tensor, context: torch.Tensor, negatives: torch.Tensor) -> torch.Tensor:
        return sgns_loss(self.in_embed(center), self.out_embed(context), self.out_embed(negatives))


class SkipGramTrainer:
    """
    Trains word vectors with SGD and a linearly decaying learning rate.

    Deterministic for a fixed seed when torch runs on one thread.
    """

    NOTES_PER_CHUNK = 64

    def __init__(self, config: SkipGramConfig = None):
        self.config = config or SkipGramConfig()
        self.config.validate()
        self.epoch_losses: List[float] = []

    def _pairs(self, streams: List[np.ndarray], rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
        """(center, context) id pairs with word2vec's reduced window."""
        centers, contexts = [], []
        for ids in streams:
            n = len(ids)
            if n < 2:
                continue
            reach = rng.integers(1, self.config.window + 1, size=n)
            for offset in range(1, min(self.config.window, n - 1) + 1):
                left = np.nonzero(reach[offset:] >= offset)[0] + offset
                right = np.nonzero(reach[:n - offset] >= offset)[0]
                centers.extend((ids[left], ids[right]))
                contexts.extend((ids[left - offset], ids[right + offset]))
        if not centers:
            return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
        return np.concatenate(centers), np.concatenate(contexts)

    def expected_pairs(self, streams: List[np.ndarray]) -> float:
        """Expected pair count of one epoch under the reduced window."""
        window = self.config.window
        total = 0.0
        for ids in streams:
            n = len(ids)
            for offset in range(1, min(window, n - 1) + 1):
                total += 2.0 * (n - offset) * (window - offset + 1) / window
        return total

    def train(self, corpus: Iterable, vocab: Vocabulary) -> EmbeddingMatrix:
        """
        Train vectors for every vocabulary id.

        Notes are visited in a fresh seeded order each epoch; pairs are
        generated and shuffled a chunk of notes at a time.

        Raises:
            EmptyCorpusError: no tokens at all
            ValidationError: the corpus is smaller than one window
        """
        cfg = self.config
        streams = [np.asarray(vocab.ids(s), dtype=np.int64) for s in note_token_streams(corpus)]
        total_tokens = sum(len(s) for s in streams)
        if total_tokens == 0:
            raise EmptyCorpusError("Cannot train word vectors on an empty corpus")
        if total_tokens <= cfg.window:
            raise ValidationError(
                f"Corpus of {total_tokens} tokens is smaller than one window ({cfg.window})"
            )
        planned = self.expected_pairs(streams) * cfg.epochs
        if planned == 0:
            raise ValidationError("Corpus produced no (center, context) pairs")

        torch.manual_seed(cfg.seed)
        rng = np.random.default_rng(cfg.seed)
        model = SkipGramModel(len(vocab), cfg.dim)
        optimizer = torch.optim.SGD(model.parameters(), lr=cfg.learning_rate)

        weights = vocab.counts.astype(np.float64) ** NEGATIVE_POWER
        cdf = np.cumsum(weights / weights.sum())
        cdf[-1] = 1.0

        logger.info(f"=== Training skip-gram: |V|={len(vocab)}, d={cfg.dim}, window={cfg.window}, "
                    f"{cfg.epochs} epoch(s), ~{int(planned)} pair(s) ===")
        self.epoch_losses = []
        processed = 0
        for epoch in range(1, cfg.epochs + 1):
            epoch_loss, epoch_pairs = 0.0, 0
            note_order = rng.permutation(len(streams))
            for first in range(0, len(note_order), self.NOTES_PER_CHUNK):
                chunk = [streams[i] for i in note_order[first:first + self.NOTES_PER_CHUNK]]
                centers, contexts = self._pairs(chunk, rng)
                order = rng.permutation(len(centers))
                centers, contexts = centers[order], contexts[order]

                for start in range(0, len(centers), cfg.batch_size):
                    lr = max(cfg.min_learning_rate, cfg.learning_rate * (1.0 - processed / planned))
                    for group in optimizer.param_groups:
                        group['lr'] = lr

                    batch_centers = torch.from_numpy(centers[start:start + cfg.batch_size])
                    batch_contexts = torch.from_numpy(contexts[start:start + cfg.batch_size])
                    draws = rng.random((len(batch_centers), cfg.negatives))
                    negatives = torch.from_numpy(np.searchsorted(cdf, draws, side='right').astype(np.int64))
                    negatives.clamp_(max=len(vocab) - 1)

                    optimizer.zero_grad()
                    loss = model(batch_centers, batch_contexts, negatives)
                    loss.backward()
                    optimizer.step()
                    epoch_loss += float(loss.item())
                    processed += len(batch_centers)
                epoch_pairs += len(centers)

            mean_loss = epoch_loss / max(epoch_pairs, 1)
            self.epoch_losses.append(mean_loss)
            logger.info(f"Skip-gram epoch {epoch}/{cfg.epochs}: mean pair loss {mean_loss:.4f} "
                        f"over {epoch_pairs} pair(s)")

        vectors = model.in_embed.weight.detach().double().numpy().copy()
        return EmbeddingMatrix(vectors=vectors, vocab_hash=vocab.vocab_hash(), epoch_losses=list(self.epoch_losses))


def train_skipgram(corpus: Iterable, vocab: Vocabulary, cfg: SkipGramConfig = None) -> EmbeddingMatrix:
    return SkipGramTrainer(cfg).train(corpus, vocab)


def embedding_tensors(vocab: Vocabulary, matrix: EmbeddingMatrix) -> Dict[str, np.ndarray]:
    """Container tensors for a vocabulary and its vectors."""
    matrix.check(vocab)
    return {
        'embeddings': np.asarray(matrix.vectors, dtype=np.float64),
        'vocab.counts': vocab.counts,
        'vocab.tokens': pack_json(vocab.tokens),
    }


def embeddings_from_tensors(tensors: Dict[str, np.ndarray]) -> Tuple[Vocabulary, EmbeddingMatrix]:
    missing = {'embeddings', 'vocab.counts', 'vocab.tokens'} - set(tensors)
    if missing:
        raise EmbeddingFormatError(f"Container lacks tensor(s) {sorted(missing)}")
    vocab = Vocabulary(unpack_json(tensors['vocab.tokens']), tensors['vocab.counts'])
    vectors = tensors['embeddings']
    if vectors.ndim != 2 or vectors.shape[0] != len(vocab):
        raise ShapeMismatchError(f"Embedding shape {vectors.shape} does not fit a vocabulary of {len(vocab)}")
    matrix = EmbeddingMatrix(vectors=vectors, vocab_hash=vocab.vocab_hash())
    return vocab, matrix


def save_embeddings(path, vocab: Vocabulary, matrix: EmbeddingMatrix) -> str:
    """Write vocabulary and vectors to the binary container."""
    written = write_container(path, embedding_tensors(vocab, matrix))
    logger.info(f"Saved {len(vocab)} x {matrix.dim} embeddings to {written}")
    return written


def counts_path(path) -> Path:
    return Path(str(path) + '.counts')


def save_word2vec_text(path, vocab: Vocabulary, matrix: EmbeddingMatrix) -> str:
    """
    Write word2vec text format plus a ``<path>.counts`` sidecar.

    Values use 17 significant digits so reading them back is exact.
    """
    matrix.check(vocab)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', encoding='utf-8', newline='\n') as f:
        f.write(f"{len(vocab)} {matrix.dim}\n")
        for token, row in zip(vocab.tokens, matrix.vectors):
            f.write(token + ' ' + ' '.join(format(float(v), '.17g') for v in row) + '\n')
    with open(counts_path(path), 'w', encoding='utf-8', newline='\n') as f:
        for token, count in zip(vocab.tokens, vocab.counts):
            f.write(f"{token}\t{int(count)}\n")
    logger.info(f"Saved {len(vocab)} x {matrix.dim} embeddings as word2vec text to {path}")
    return str(path)


def _read_counts(path: Path, tokens: List[str]) -> List[int]:
    sidecar = counts_path(path)
    if not sidecar.exists():
        logger.warning(f"No counts sidecar {sidecar}; every count defaults to 1")
        return [1] * len(tokens)

    counts = {}
    for line_no, line in enumerate(sidecar.read_text(encoding='utf-8').splitlines(), start=1):
        if not line.strip():
            continue
        try:
            token, count = line.rsplit('\t', 1)
            counts[token] = int(count)
        except ValueError as e:
            raise EmbeddingFormatError(f"{sidecar}:{line_no}: expected 'word<TAB>count'") from e
    missing = [t for t in tokens if t not in counts]
    if missing:
        raise EmbeddingFormatError(f"{sidecar} has no count for {len(missing)} token(s), e.g. {missing[0]!r}")
    return [counts[t] for t in tokens]


def load_word2vec_text(path) -> Tuple[Vocabulary, EmbeddingMatrix]:
    """
    Read word2vec text format: a "V d" header, then "word v1 ... vd" rows.

    Raises:
        EmbeddingFormatError: unknown header, wrong row count or dimension
    """
    path = Path(path)
    with open(path, 'r', encoding='utf-8') as f:
        header = f.readline().split()
        if len(header) != 2 or not all(part.isdigit() for part in header):
            raise EmbeddingFormatError(f"{path}: unknown header {' '.join(header)!r}, expected 'V d'")
        size, dim = int(header[0]), int(header[1])

        tokens, rows = [], []
        for line_no, line in enumerate(f, start=2):
            parts = line.split()
            if not line.strip():
                continue
            if len(parts) != dim + 1:
                raise EmbeddingFormatError(
                    f"{path}:{line_no}: expected {dim} values, got {len(parts) - 1}"
                )
            try:
                rows.append([float(v) for v in parts[1:]])
            except ValueError as e:
                raise EmbeddingFormatError(f"{path}:{line_no}: non-numeric value") from e
            tokens.append(parts[0])

    if len(rows) != size:
        raise EmbeddingFormatError(f"{path}: header announces {size} rows, found {len(rows)}")
    if len(set(tokens)) != len(tokens):
        raise EmbeddingFormatError(f"{path}: duplicate tokens")

    vocab = Vocabulary(tokens, _read_counts(path, tokens))
    vectors = np.asarray(rows, dtype=np.float64).reshape(size, dim)
    return vocab, EmbeddingMatrix(vectors=vectors, vocab_hash=vocab.vocab_hash())


def load_embeddings(path) -> Tuple[Vocabulary, EmbeddingMatrix]:
    """Read embeddings from the binary container or word2vec text format."""
    if is_container(path):
        vocab, matrix = embeddings_from_tensors(read_container(path))
    else:
        vocab, matrix = load_word2vec_text(path)
    matrix.check(vocab)
    logger.info(f"Loaded {len(vocab)} x {matrix.dim} embeddings from {path}")
    return vocab, matrix
