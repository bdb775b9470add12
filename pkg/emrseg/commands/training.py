"""
Training verbs: train-embeddings (vocabulary + skip-gram vectors) and train
(BiLSTM-CRF tagger into a self-contained model container).
"""

import logging
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import pandas as pd

from emrseg.config import PipelineConfig
from emrseg.errors import EmptyCorpusError, ValidationError
from emrseg.notes import CorpusKind, LabeledNote, SampleType, file_hash, read_corpus
from emrseg.services.embeddings import (
    EmbeddingMatrix,
    Vocabulary,
    build_vocabulary,
    load_embeddings,
    save_embeddings,
    save_word2vec_text,
    train_skipgram,
)
from emrseg.services.run_registry import RunRegistry
from emrseg.services.sequence_tagger import TrainResult, make_examples, save_model, train
from emrseg.services.sif_encoder import ENCODER_MODES, SifEncoder
from emrseg.services.text_normalizer import TextNormalizer

logger = logging.getLogger(__name__)


def register(subparsers):
    embed = subparsers.add_parser('train-embeddings', help='build the vocabulary and train skip-gram word vectors')
    embed.add_argument('corpus', nargs='+', help='JSON Lines corpus file(s)')
    embed.add_argument('--out', help='output path (default: paths.embeddings)')
    embed.add_argument('--format', choices=('container', 'text'), default='container',
                       help='binary container or word2vec text with a .counts sidecar')
    embed.set_defaults(handler=cmd_train_embeddings)

    tagger = subparsers.add_parser('train', help='train the BiLSTM-CRF tagger')
    tagger.add_argument('corpus', nargs='?', help='training corpus (default: paths.corpus)')
    tagger.add_argument('--embeddings', help='word vectors to use (default: paths.embeddings, else trained here)')
    tagger.add_argument('--out', help='model container path (default: paths.model)')
    tagger.add_argument('--log', help='per-epoch training log CSV (default: <out>.log.csv)')
    tagger.add_argument('--encoder-mode', choices=ENCODER_MODES, help='sentence encoder (overrides config)')
    tagger.set_defaults(handler=cmd_train)


def read_corpora(paths: Sequence[str]) -> List[LabeledNote]:
    """Read and concatenate corpora; malformed records raise ValidationError."""
    notes = []
    for path in paths:
        try:
            notes.extend(read_corpus(path))
        except ValueError as e:
            raise ValidationError(str(e)) from e
    return notes


def fit_embeddings(corpus: Sequence[LabeledNote], config: PipelineConfig) -> Tuple[Vocabulary, EmbeddingMatrix]:
    vocab = build_vocabulary(corpus)
    return vocab, train_skipgram(corpus, vocab, config.skipgram)


def prepare_embeddings(corpus: Sequence[LabeledNote], config: PipelineConfig,
                       path: Optional[str] = None) -> Tuple[Vocabulary, EmbeddingMatrix]:
    """Load word vectors from ``path`` or train them on the corpus."""
    if path:
        return load_embeddings(path)
    logger.info("No embeddings given; training word vectors on the training corpus")
    return fit_embeddings(corpus, config)


def infer_kind(corpus: Sequence[LabeledNote]) -> str:
    """Corpus kind from the sample types present."""
    types = {note.sample_type for note in corpus}
    if types == {SampleType.TYPE2}:
        return CorpusKind.HEADINGS_ONLY.value
    if types == {SampleType.TYPE1}:
        return CorpusKind.NO_HEADINGS.value
    return CorpusKind.MIXED.value


def write_training_log(path, result: TrainResult) -> str:
    frame = pd.DataFrame([record.to_dict() for record in result.history],
                         columns=['epoch', 'train_nll', 'dev_nll', 'dev_accuracy'])
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, float_format='%.6f')
    return str(path)


def fit_tagger(
    corpus: Sequence[LabeledNote],
    config: PipelineConfig,
    vocab: Vocabulary,
    embeddings: EmbeddingMatrix,
    out_path,
    log_path=None,
    encoder_mode: str = None,
    corpus_kind: str = None,
    corpus_hash: str = None,
    registry: RunRegistry = None
) -> Tuple[str, str, TrainResult]:
    """
    Encode a corpus, train a tagger and write the model container and log.

    Returns:
        (model path, model hash, training result)
    """
    if not corpus:
        raise EmptyCorpusError("Cannot train the tagger on an empty corpus")
    encoder_mode = encoder_mode or config.encoder_mode
    corpus_kind = corpus_kind or infer_kind(corpus)
    normalizer = TextNormalizer.from_config(config)
    encoder = SifEncoder(vocab, embeddings, config.sif, encoder_mode)
    examples = make_examples(corpus, encoder.encode_many(corpus, config.threads))

    registry = registry or RunRegistry()
    run_id = registry.start_run(corpus_kind, encoder_mode, config.seed, config.config_hash(),
                                corpus_hash=corpus_hash, num_notes=len(examples))

    def on_epoch(record):
        registry.log_epoch(run_id, record.epoch, record.train_nll, record.dev_nll, record.dev_accuracy)

    try:
        result = train(examples, config.train, on_epoch)
    except Exception:
        registry.finish_run(run_id, 'failed')
        raise

    meta = {
        'encoder': encoder.settings(),
        'normalizer': normalizer.settings(),
        'best_epoch': result.best_epoch,
        'history': [record.to_dict() for record in result.history],
        'provenance': {
            'corpus_kind': corpus_kind,
            'encoder_mode': encoder_mode,
            'seed': config.seed,
            'config_hash': config.config_hash(),
            'corpus_hash': corpus_hash,
            'vocab_hash': vocab.vocab_hash(),
        },
    }
    model_path = save_model(out_path, result.model, vocab, embeddings, meta)
    model_hash = file_hash(model_path)
    log_path = write_training_log(log_path or f"{model_path}.log.csv", result)

    best = result.best
    registry.finish_run(
        run_id, 'completed', model_path=model_path, model_hash=model_hash,
        epochs_completed=len(result.history),
        best_dev_nll=best.dev_nll if best else None,
        best_dev_accuracy=best.dev_accuracy if best else None,
    )
    logger.info(f"Model {model_path} (sha256 {model_hash[:12]}), training log {log_path}")
    return model_path, model_hash, result


def cmd_train_embeddings(args, config: PipelineConfig) -> int:
    out = args.out or config.paths.embeddings
    if not out:
        raise ValidationError("No output path: pass --out or set paths.embeddings")
    vocab, matrix = fit_embeddings(read_corpora(args.corpus), config)
    if args.format == 'text':
        save_word2vec_text(out, vocab, matrix)
    else:
        save_embeddings(out, vocab, matrix)
    losses = ', '.join(f"{loss:.4f}" for loss in matrix.epoch_losses)
    logger.info(f"Word vectors written to {out}; mean pair loss per epoch: {losses}")
    return 0


def cmd_train(args, config: PipelineConfig) -> int:
    corpus_path = args.corpus or config.paths.corpus
    out = args.out or config.paths.model
    if not corpus_path:
        raise ValidationError("No training corpus: pass it as an argument or set paths.corpus")
    if not out:
        raise ValidationError("No output path: pass --out or set paths.model")

    corpus = read_corpora([corpus_path])
    vocab, embeddings = prepare_embeddings(corpus, config, args.embeddings or config.paths.embeddings)
    fit_tagger(corpus, config, vocab, embeddings, out, log_path=args.log,
               encoder_mode=args.encoder_mode, corpus_hash=file_hash(corpus_path))
    return 0
