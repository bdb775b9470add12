"""
Corpus verbs: synth (synthetic labeled notes) and prep (label, render and
split raw notes).
"""

import logging
from pathlib import Path

from emrseg.config import PipelineConfig
from emrseg.errors import ValidationError
from emrseg.notes import CorpusKind, write_corpus
from emrseg.services.corpus_builder import as_labeled, build_corpus, build_test_corpus, label_notes, split_train_test
from emrseg.services.note_sources import load_notes
from emrseg.services.synthetic_notes import default_grammar, generate_synthetic_notes, load_grammar
from emrseg.services.text_normalizer import TextNormalizer

logger = logging.getLogger(__name__)


def register(subparsers):
    synth = subparsers.add_parser('synth', help='generate a synthetic labeled corpus (Type2)')
    synth.add_argument('--grammar', help='grammar INI file (default: built-in grammar)')
    synth.add_argument('-n', '--count', type=int, required=True, help='number of notes')
    synth.add_argument('--out', required=True, help='output JSON Lines corpus')
    synth.add_argument('--raw-dir', help='also write each raw note as <note_id>.txt here')
    synth.set_defaults(handler=cmd_synth)

    prep = subparsers.add_parser('prep', help='label raw notes and write train/test corpora')
    prep.add_argument('source', help='directory of *.txt notes, NOTEEVENTS.csv[.gz] or a Type2 JSON Lines corpus')
    prep.add_argument('--kind', help='training corpus kind: headings_only, no_headings or mixed')
    prep.add_argument('--train-fraction', type=float, help='share of notes for training')
    prep.add_argument('--limit', type=int, help='read at most this many notes')
    prep.add_argument('--out-dir', required=True, help='directory for train.jsonl and test.jsonl')
    prep.set_defaults(handler=cmd_prep)


def parse_kind(text: str) -> CorpusKind:
    try:
        return CorpusKind.parse(text)
    except ValueError as e:
        raise ValidationError(f"Unknown corpus kind '{text}' (expected headings_only, no_headings or mixed)") from e


def grammar_for(path: str = None):
    return load_grammar(path) if path else default_grammar()


def cmd_synth(args, config: PipelineConfig) -> int:
    """
    Write ``count`` synthetic notes, labeled by the heading rules, as Type2.

    Invocations with the same grammar, count and seed write identical files.
    """
    grammar = grammar_for(args.grammar or config.paths.grammar)
    if args.count < 0:
        raise ValidationError(f"--count must be >= 0 (got {args.count})")
    if args.count == 0:
        logger.warning("Requested 0 notes; writing an empty corpus")

    notes = generate_synthetic_notes(grammar, args.count, config.seed)
    if args.raw_dir:
        raw_dir = Path(args.raw_dir)
        raw_dir.mkdir(parents=True, exist_ok=True)
        for note in notes:
            (raw_dir / f"{note.note_id}.txt").write_text(note.text, encoding='utf-8')
        logger.info(f"Wrote {len(notes)} raw note(s) to {raw_dir}")

    labeled, skipped = label_notes(notes, TextNormalizer.from_config(config))
    write_corpus(args.out, labeled)
    logger.info(f"Synthesized {len(labeled)} note(s) ({len(skipped)} skipped) into {args.out}")
    return 0


def cmd_prep(args, config: PipelineConfig) -> int:
    """
    normalize -> label -> split by note -> render.

    The train side becomes a corpus of the requested kind; the test side is
    rendered in all four sample types.
    """
    kind = parse_kind(args.kind) if args.kind else config.corpus_kind
    fraction = args.train_fraction if args.train_fraction is not None else config.train_fraction

    notes = load_notes(args.source, limit=args.limit)
    labeled = as_labeled(notes, TextNormalizer.from_config(config))
    train_notes, test_notes = split_train_test(labeled, fraction, config.seed)

    out_dir = Path(args.out_dir)
    train_path = out_dir / 'train.jsonl'
    test_path = out_dir / 'test.jsonl'
    write_corpus(train_path, build_corpus(train_notes, kind, config.seed))
    write_corpus(test_path, build_test_corpus(test_notes))
    logger.info(f"Prepared {kind.value} training corpus {train_path} and test corpus {test_path}")
    return 0
