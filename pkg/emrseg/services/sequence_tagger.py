"""
BiLSTM-CRF sentence tagger.

A single-layer bidirectional LSTM reads the sentence vectors of a note, a
linear layer turns each 2H-dim context vector into 25 emission scores, and
a linear-chain CRF with START/STOP transitions scores label paths. Training
minimizes the mean per-note CRF negative log-likelihood; decoding is Viterbi.
"""

import copy
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np
import torch
from torch import nn
from torch.nn.utils.rnn import pack_padded_sequence, pad_packed_sequence

from emrseg.config import TrainConfig
from emrseg.errors import (
    ContainerFormatError,
    EmptyCorpusError,
    NumericalError,
    ShapeMismatchError,
    ValidationError,
)
from emrseg.lib.container import pack_json, read_container, unpack_json, write_container
from emrseg.lib.crf import constrain_transitions, crf_marginals, crf_nll, viterbi_decode
from emrseg.lib.lstm import reset_lstm_parameters
from emrseg.notes import LABELS, LabeledNote, SampleType, SectionLabel
from emrseg.services.embeddings import EmbeddingMatrix, Vocabulary, embedding_tensors, embeddings_from_tensors

logger = logging.getLogger(__name__)

MODEL_FORMAT = 'emrseg-tagger'
_DTYPES = {'float32': torch.float32, 'float64': torch.float64}


class SectionTagger(nn.Module):
    """BiLSTM encoder, emission projection and CRF transition table."""

    def __init__(self, input_dim: int, hidden_size: int, num_labels: int = len(LABELS)):
        super(SectionTagger, self).__init__()
        self.input_dim = input_dim
        self.hidden_size = hidden_size
        self.num_labels = num_labels
        self.lstm = nn.LSTM(input_dim, hidden_size, num_layers=1, batch_first=True, bidirectional=True)
        self.emission = nn.Linear(2 * hidden_size, num_labels)
        # rows/columns num_labels and num_labels + 1 are START and STOP
        self.transitions = nn.Parameter(torch.zeros(num_labels + 2, num_labels + 2))
        self.reset_parameters()

    def reset_parameters(self):
        reset_lstm_parameters(self.lstm)
        bound = 1.0 / math.sqrt(self.emission.in_features)
        with torch.no_grad():
            self.emission.weight.uniform_(-bound, bound)
            self.emission.bias.zero_()
            self.transitions.zero_()

    @property
    def dtype(self) -> torch.dtype:
        return self.transitions.dtype

    def constrained_transitions(self) -> torch.Tensor:
        return constrain_transitions(self.transitions)

    def encode(self, inputs: torch.Tensor, lengths: torch.Tensor) -> torch.Tensor:
        """(B, L, d_in) padded inputs -> (B, L, 2H) context vectors, zero at padding."""
        packed = pack_padded_sequence(inputs, lengths.cpu(), batch_first=True, enforce_sorted=False)
        output, _ = self.lstm(packed)
        output, _ = pad_packed_sequence(output, batch_first=True, total_length=inputs.shape[1])
        return output

    def emissions(self, inputs: torch.Tensor, lengths: torch.Tensor) -> torch.Tensor:
        return self.emission(self.encode(inputs, lengths))

    def forward(self, inputs: torch.Tensor, lengths: torch.Tensor, labels: torch.Tensor) -> torch.Tensor:
        """Per-note CRF negative log-likelihood, shape (B,)."""
        mask = length_mask(lengths, inputs.shape[1])
        return crf_nll(self.emissions(inputs, lengths), self.constrained_transitions(), labels, mask)

    def note_emissions(self, vectors) -> torch.Tensor:
        """(L, Y) emission scores of one note."""
        inputs = torch.as_tensor(np.asarray(vectors), dtype=self.dtype).unsqueeze(0)
        lengths = torch.tensor([inputs.shape[1]])
        return self.emissions(inputs, lengths)[0]


def length_mask(lengths: torch.Tensor, max_length: int) -> torch.Tensor:
    return torch.arange(max_length).unsqueeze(0) < lengths.unsqueeze(1)


def bilstm_encode(vectors, model: SectionTagger) -> torch.Tensor:
    """
    Context vectors of one note: [forward h_t ; backward h_t] per position,
    both directions starting from zero state.

    Returns:
        (L, 2H) tensor
    """
    inputs = torch.as_tensor(np.asarray(vectors), dtype=model.dtype).unsqueeze(0)
    if inputs.shape[1] == 0:
        raise ValidationError("Cannot encode an empty sentence sequence (L = 0)")
    return model.encode(inputs, torch.tensor([inputs.shape[1]]))[0]


@dataclass
class EncodedExample:
    """Sentence vectors and gold label ids of one training note."""

    note_id: str
    vectors: np.ndarray
    labels: np.ndarray
    sample_type: Optional[SampleType] = None

    def __len__(self) -> int:
        return int(self.vectors.shape[0])


def make_examples(corpus: Sequence[LabeledNote], encoded) -> List[EncodedExample]:
    """Pair encoded notes with their gold labels; empty notes are dropped."""
    examples = []
    for note, enc in zip(corpus, encoded):
        if len(note) == 0:
            continue
        examples.append(EncodedExample(
            note_id=note.note_id,
            vectors=enc.vectors,
            labels=np.array([label.index for label in note.labels], dtype=np.int64),
            sample_type=note.sample_type,
        ))
    return examples


def pad_batch(examples: Sequence[EncodedExample], dtype: torch.dtype = torch.float32):
    """
    Pad a batch of notes.

    Returns:
        (inputs (B, L, d), lengths (B,), labels (B, L)) with zeros as padding
    """
    lengths = torch.tensor([len(e) for e in examples], dtype=torch.long)
    max_length = int(lengths.max())
    dim = examples[0].vectors.shape[1]
    inputs = torch.zeros(len(examples), max_length, dim, dtype=dtype)
    labels = torch.zeros(len(examples), max_length, dtype=torch.long)
    for i, example in enumerate(examples):
        inputs[i, :len(example)] = torch.as_tensor(example.vectors, dtype=dtype)
        labels[i, :len(example)] = torch.as_tensor(example.labels)
    return inputs, lengths, labels


@dataclass
class EpochRecord:
    epoch: int
    train_nll: float
    dev_nll: Optional[float] = None
    dev_accuracy: Optional[float] = None

    def to_dict(self) -> Dict:
        return {
            'epoch': self.epoch,
            'train_nll': self.train_nll,
            'dev_nll': self.dev_nll,
            'dev_accuracy': self.dev_accuracy,
        }


@dataclass
class TrainResult:
    model: SectionTagger
    history: List[EpochRecord] = field(default_factory=list)
    best_epoch: int = 0
    initial_train_nll: float = float('nan')

    @property
    def best(self) -> Optional[EpochRecord]:
        for record in self.history:
            if record.epoch == self.best_epoch:
                return record
        return None


class TaggerTrainer:
    """
    Adam training with global-norm clipping and early stopping on held-out NLL.

    The held-out part is the last floor(n * dev_fraction) notes of a seeded
    shuffle; with no held-out notes, early stopping watches the training NLL.
    Batches group notes of similar length.
    """

    def __init__(self, config: TrainConfig = None, on_epoch: Callable[[EpochRecord], None] = None):
        self.config = config or TrainConfig()
        self.config.validate()
        self.on_epoch = on_epoch

    def _split(self, examples: List[EncodedExample], rng: np.random.Generator):
        order = rng.permutation(len(examples))
        n_dev = int(math.floor(len(examples) * self.config.dev_fraction))
        if n_dev >= len(examples):
            n_dev = 0
        train = [examples[i] for i in order[:len(examples) - n_dev]]
        dev = [examples[i] for i in order[len(examples) - n_dev:]]
        return train, dev

    def _batches(self, examples: List[EncodedExample], rng: np.random.Generator) -> List[List[EncodedExample]]:
        shuffled = [examples[i] for i in rng.permutation(len(examples))]
        shuffled.sort(key=len)
        size = self.config.batch_size
        batches = [shuffled[i:i + size] for i in range(0, len(shuffled), size)]
        return [batches[i] for i in rng.permutation(len(batches))]

    def _mean_nll(self, model: SectionTagger, examples: List[EncodedExample]) -> float:
        total = 0.0
        with torch.no_grad():
            for first in range(0, len(examples), self.config.batch_size):
                inputs, lengths, labels = pad_batch(examples[first:first + self.config.batch_size], model.dtype)
                total += float(model(inputs, lengths, labels).sum())
        return total / len(examples)

    def _accuracy(self, model: SectionTagger, examples: List[EncodedExample]) -> float:
        correct = total = 0
        for example in examples:
            path = predict_ids(example.vectors, model)
            correct += int(np.sum(np.asarray(path) == example.labels))
            total += len(example)
        return correct / total if total else 0.0

    def train(self, examples: Sequence[EncodedExample]) -> TrainResult:
        """
        Train a tagger on encoded notes.

        Raises:
            EmptyCorpusError: no training note
            NumericalError: a batch loss or gradient is not finite
        """
        cfg = self.config
        examples = [e for e in examples if len(e) > 0]
        if not examples:
            raise EmptyCorpusError("Cannot train the tagger on an empty corpus")

        torch.manual_seed(cfg.seed)
        rng = np.random.default_rng(cfg.seed)
        input_dim = examples[0].vectors.shape[1]
        model = SectionTagger(input_dim, cfg.hidden_size).to(_DTYPES[cfg.dtype])
        optimizer = torch.optim.Adam(model.parameters(), lr=cfg.learning_rate)

        train_set, dev_set = self._split(examples, rng)
        result = TrainResult(model=model, initial_train_nll=self._mean_nll(model, train_set))
        logger.info(f"=== Training tagger: {len(train_set)} train / {len(dev_set)} dev note(s), "
                    f"d_in={input_dim}, H={cfg.hidden_size}, initial NLL {result.initial_train_nll:.4f} ===")

        best_score, best_state, stale = float('inf'), None, 0
        for epoch in range(1, cfg.max_epochs + 1):
            model.train()
            epoch_total = 0.0
            for batch in self._batches(train_set, rng):
                inputs, lengths, labels = pad_batch(batch, model.dtype)
                optimizer.zero_grad()
                losses = model(inputs, lengths, labels)
                loss = losses.mean()
                if not torch.isfinite(loss):
                    raise NumericalError(
                        f"Non-finite loss {float(loss)} at epoch {epoch} on notes {[e.note_id for e in batch]}"
                    )
                loss.backward()
                grad_norm = nn.utils.clip_grad_norm_(model.parameters(), cfg.clip_norm)
                if not torch.isfinite(grad_norm):
                    raise NumericalError(f"Non-finite gradient norm at epoch {epoch}")
                optimizer.step()
                epoch_total += float(losses.detach().sum())

            model.eval()
            record = EpochRecord(epoch=epoch, train_nll=epoch_total / len(train_set))
            if dev_set:
                record.dev_nll = self._mean_nll(model, dev_set)
                record.dev_accuracy = self._accuracy(model, dev_set)
            result.history.append(record)
            logger.info(f"Epoch {epoch}/{cfg.max_epochs}: train NLL {record.train_nll:.4f}, "
                        f"dev NLL {_fmt(record.dev_nll)}, dev accuracy {_fmt(record.dev_accuracy)}")
            if self.on_epoch:
                self.on_epoch(record)

            score = record.dev_nll if record.dev_nll is not None else record.train_nll
            if score < best_score:
                best_score, stale = score, 0
                best_state = copy.deepcopy(model.state_dict())
                result.best_epoch = epoch
            else:
                stale += 1
                if stale >= cfg.patience:
                    logger.info(f"Early stop after epoch {epoch}; best epoch {result.best_epoch}")
                    break

        if best_state is not None:
            model.load_state_dict(best_state)
        model.eval()
        return result


def _fmt(value: Optional[float]) -> str:
    return 'n/a' if value is None else f"{value:.4f}"


def train(examples: Sequence[EncodedExample], cfg: TrainConfig = None,
          on_epoch: Callable[[EpochRecord], None] = None) -> TrainResult:
    return TaggerTrainer(cfg, on_epoch).train(examples)


def _check_input(vectors, model: SectionTagger) -> np.ndarray:
    vectors = np.asarray(vectors)
    if vectors.ndim != 2 or vectors.shape[0] == 0:
        raise ValidationError(f"Expected a non-empty (L, d) array of sentence vectors, got shape {vectors.shape}")
    if vectors.shape[1] != model.input_dim:
        raise ValidationError(f"Sentence vectors have dimension {vectors.shape[1]}, model expects {model.input_dim}")
    return vectors


def predict_ids(vectors, model: SectionTagger) -> List[int]:
    vectors = _check_input(vectors, model)
    with torch.no_grad():
        emissions = model.note_emissions(vectors)
        path, _ = viterbi_decode(emissions, model.constrained_transitions())
    return path


def predict(vectors, model: SectionTagger) -> List[SectionLabel]:
    """
    Viterbi labels for one note.

    Raises:
        ValidationError: vector dimension differs from the model's d_in
    """
    return [LABELS[i] for i in predict_ids(vectors, model)]


def label_marginals(vectors, model: SectionTagger) -> np.ndarray:
    """(L, Y) posterior label probabilities of one note."""
    vectors = _check_input(vectors, model)
    with torch.no_grad():
        emissions = model.note_emissions(vectors).double()
        return crf_marginals(emissions, model.constrained_transitions().double()).numpy()


@dataclass
class ModelBundle:
    """Everything a model container holds."""

    model: SectionTagger
    vocab: Vocabulary
    embeddings: EmbeddingMatrix
    meta: Dict


def model_tensors(model: SectionTagger, vocab: Vocabulary, embeddings: EmbeddingMatrix,
                  meta: Dict) -> Dict[str, np.ndarray]:
    if embeddings.dim != model.input_dim:
        raise ShapeMismatchError(f"Embedding dimension {embeddings.dim} differs from tagger input {model.input_dim}")
    tensors = {f"tagger.{name}": value.detach().cpu().numpy() for name, value in model.state_dict().items()}
    tensors.update(embedding_tensors(vocab, embeddings))
    header = dict(meta)
    header.update({
        'format': MODEL_FORMAT,
        'input_dim': model.input_dim,
        'hidden_size': model.hidden_size,
        'labels': [label.value for label in LABELS],
        'dtype': 'float64' if model.dtype == torch.float64 else 'float32',
    })
    tensors['meta'] = pack_json(header)
    return tensors


def save_model(path, model: SectionTagger, vocab: Vocabulary, embeddings: EmbeddingMatrix,
               meta: Dict = None) -> str:
    """
    Write a self-contained model container: tagger parameters in their native
    precision, the vocabulary, the embedding matrix and a JSON header
    (encoder and normalizer settings, provenance).
    """
    written = write_container(path, model_tensors(model, vocab, embeddings, meta or {}))
    logger.info(f"Saved model to {written}")
    return written


def load_model(path, expected_input_dim: int = None) -> ModelBundle:
    """
    Read a model container.

    Raises:
        ModelIOError: unreadable file (subclasses for bad magic, checksum or
            version)
        ShapeMismatchError: tensors disagree with the header, or the model
            input dimension differs from expected_input_dim
    """
    tensors = read_container(path)
    if 'meta' not in tensors:
        raise ContainerFormatError(f"{path} holds no model header")
    meta = unpack_json(tensors['meta'])
    if meta.get('format') != MODEL_FORMAT:
        raise ContainerFormatError(f"{path} is not a tagger model (format {meta.get('format')!r})")
    if meta.get('labels') != [label.value for label in LABELS]:
        raise ShapeMismatchError(f"{path} was trained on a different label inventory")

    input_dim, hidden_size = int(meta['input_dim']), int(meta['hidden_size'])
    if expected_input_dim is not None and expected_input_dim != input_dim:
        raise ShapeMismatchError(f"Model expects d_in={input_dim}, pipeline provides {expected_input_dim}")

    model = SectionTagger(input_dim, hidden_size).to(_DTYPES.get(meta.get('dtype'), torch.float32))
    state = {}
    for name, reference in model.state_dict().items():
        key = f"tagger.{name}"
        if key not in tensors:
            raise ContainerFormatError(f"{path} lacks tensor '{key}'")
        if tuple(tensors[key].shape) != tuple(reference.shape):
            raise ShapeMismatchError(
                f"Tensor '{key}' has shape {tuple(tensors[key].shape)}, expected {tuple(reference.shape)}"
            )
        state[name] = torch.from_numpy(tensors[key]).to(reference.dtype)
    model.load_state_dict(state)
    model.eval()

    vocab, embeddings = embeddings_from_tensors(tensors)
    if embeddings.dim != input_dim:
        raise ShapeMismatchError(f"Embedding dimension {embeddings.dim} differs from tagger input {input_dim}")
    logger.info(f"Loaded model from {path}: d_in={input_dim}, H={hidden_size}, |V|={len(vocab)}")
    return ModelBundle(model=model, vocab=vocab, embeddings=embeddings, meta=meta)
