"""
Evaluation verbs: eval (one model on one test corpus), reproduce (three
training-corpus kinds x four test sample types, plus the SIF/AVE comparison)
and runs (list the run registry).
"""

import json
import logging
import sys
from pathlib import Path
from typing import Dict

import pandas as pd

from emrseg.commands.corpus import grammar_for
from emrseg.commands.training import fit_embeddings, fit_tagger, read_corpora
from emrseg.config import PipelineConfig
from emrseg.errors import ValidationError
from emrseg.notes import CorpusKind, file_hash, write_corpus
from emrseg.services.corpus_builder import build_corpus, build_test_corpus, label_notes, split_train_test
from emrseg.services.evaluation import accuracy_matrix, evaluate, matrix_table, write_report
from emrseg.services.run_registry import RunRegistry
from emrseg.services.segmenter import Segmenter
from emrseg.services.sif_encoder import AVE, SIF
from emrseg.services.synthetic_notes import generate_synthetic_notes
from emrseg.services.text_normalizer import TextNormalizer

logger = logging.getLogger(__name__)


def register(subparsers):
    ev = subparsers.add_parser('eval', help='sentence accuracy of a model on a labeled test corpus')
    ev.add_argument('corpus', help='labeled test corpus (JSON Lines)')
    ev.add_argument('--model', help='model container (default: paths.model)')
    ev.add_argument('--report-dir', help='directory for eval.json / eval.txt (default: paths.reports)')
    ev.add_argument('--name', default='eval', help='report file stem')
    ev.set_defaults(handler=cmd_eval)

    rep = subparsers.add_parser('reproduce', help='train three corpus kinds and evaluate on four sample types')
    rep.add_argument('--grammar', help='grammar INI file (default: built-in grammar)')
    rep.add_argument('--n-train', type=int, help='synthetic training notes (default: synth.n_train)')
    rep.add_argument('--n-test', type=int, help='synthetic test notes (default: synth.n_test)')
    rep.add_argument('--out-dir', help='output directory (default: <paths.reports>/reproduce)')
    rep.add_argument('--skip-ave', action='store_true', help='do not train the AVE-mode comparison model')
    rep.set_defaults(handler=cmd_reproduce)

    runs = subparsers.add_parser('runs', help='list recorded training runs')
    runs.add_argument('--limit', type=int, default=20)
    runs.set_defaults(handler=cmd_runs)


def provenance_of(segmenter: Segmenter, corpus_hash: str, config: PipelineConfig) -> Dict:
    model = segmenter.meta.get('provenance', {})
    return {
        'corpus_kind': model.get('corpus_kind'),
        'encoder_mode': segmenter.encoder.mode,
        'seed': model.get('seed', config.seed),
        'model_hash': segmenter.model_hash,
        'corpus_hash': corpus_hash,
        'config_hash': model.get('config_hash'),
        'training_corpus_hash': model.get('corpus_hash'),
    }


def cmd_eval(args, config: PipelineConfig) -> int:
    model_path = args.model or config.paths.model
    if not model_path:
        raise ValidationError("No model: pass --model or set paths.model")

    segmenter = Segmenter.load(model_path)
    corpus = read_corpora([args.corpus])
    corpus_hash = file_hash(args.corpus)
    report = evaluate(segmenter, corpus, provenance_of(segmenter, corpus_hash, config))

    json_path, _ = write_report(report, args.report_dir or config.paths.reports, args.name)
    RunRegistry().record_evaluation(segmenter.model_hash, report.per_type, report.accuracy, report.support,
                                    corpus_hash=corpus_hash, report_path=json_path)
    sys.stdout.write(report.to_text())
    return 0


def cmd_reproduce(args, config: PipelineConfig) -> int:
    """
    Synthetic analogue of the accuracy matrix.

    Word vectors are trained once on the Mixed rendering of the training
    notes; the three taggers differ only in their training corpus.
    """
    n_train = args.n_train if args.n_train is not None else config.synth.n_train
    n_test = args.n_test if args.n_test is not None else config.synth.n_test
    if n_train < 1 or n_test < 1:
        raise ValidationError(f"Need at least one training and one test note (got {n_train} / {n_test})")
    out_dir = Path(args.out_dir or Path(config.paths.reports) / 'reproduce')
    out_dir.mkdir(parents=True, exist_ok=True)

    grammar = grammar_for(args.grammar or config.paths.grammar)
    notes = generate_synthetic_notes(grammar, n_train + n_test, config.seed)
    labeled, _ = label_notes(notes, TextNormalizer.from_config(config))
    train_notes, test_notes = split_train_test(labeled, n_train / (n_train + n_test), config.seed)

    test_path = out_dir / 'test.jsonl'
    write_corpus(test_path, build_test_corpus(test_notes))
    test_corpus = read_corpora([test_path])
    test_hash = file_hash(test_path)

    mixed = build_corpus(train_notes, CorpusKind.MIXED, config.seed)
    vocab, embeddings = fit_embeddings(mixed, config)

    registry = RunRegistry()
    reports, models = {}, {}
    plan = [(kind, SIF) for kind in CorpusKind]
    if not args.skip_ave:
        plan.append((CorpusKind.MIXED, AVE))
    for kind, mode in plan:
        name = kind.value if mode == SIF else f"{kind.value}_{mode}"
        logger.info(f"=== Reproduce: {name} ===")
        corpus = mixed if kind is CorpusKind.MIXED else build_corpus(train_notes, kind, config.seed)
        corpus_path = out_dir / f"train_{kind.value}.jsonl"
        write_corpus(corpus_path, corpus)
        model_path, model_hash, _ = fit_tagger(
            corpus, config, vocab, embeddings, out_dir / f"model_{name}.emrseg",
            encoder_mode=mode, corpus_kind=kind.value, corpus_hash=file_hash(corpus_path), registry=registry,
        )
        segmenter = Segmenter.load(model_path)
        report = evaluate(segmenter, test_corpus, provenance_of(segmenter, test_hash, config))
        json_path, _ = write_report(report, out_dir, f"eval_{name}")
        registry.record_evaluation(model_hash, report.per_type, report.accuracy, report.support,
                                   corpus_hash=test_hash, report_path=json_path)
        reports[name] = report
        models[name] = model_hash

    matrix = accuracy_matrix({kind.value: reports[kind.value] for kind in CorpusKind})
    summary = {
        'matrix': matrix,
        'overall': {name: report.accuracy for name, report in reports.items()},
        'provenance': {
            'seed': config.seed,
            'config_hash': config.config_hash(),
            'test_corpus_hash': test_hash,
            'model_hashes': models,
            'n_train': len(train_notes),
            'n_test': len(test_notes),
        },
    }
    table = matrix_table(matrix)
    if not args.skip_ave:
        sif_mixed = reports[CorpusKind.MIXED.value].accuracy
        ave_mixed = reports[f"{CorpusKind.MIXED.value}_{AVE}"].accuracy
        summary['encoder_comparison'] = {'sif': sif_mixed, 'ave': ave_mixed}
        table += f"\nencoder comparison (mixed, overall accuracy): sif {sif_mixed:.4f}  ave {ave_mixed:.4f}\n"

    (out_dir / 'reproduce.json').write_text(json.dumps(summary, indent=2, sort_keys=True) + '\n', encoding='utf-8')
    (out_dir / 'reproduce.txt').write_text(table, encoding='utf-8')
    sys.stdout.write(table)
    logger.info(f"Reproduction report written to {out_dir}")
    return 0


def cmd_runs(args, config: PipelineConfig) -> int:
    runs = RunRegistry().list_runs(args.limit)
    if not runs:
        sys.stdout.write("No recorded runs\n")
        return 0
    sys.stdout.write(pd.DataFrame(runs).to_string(index=False) + '\n')
    return 0
