"""
Inference verb: segment a raw note with a trained model container.

Output is JSON Lines on stdout (or --out): one record per sentence
{note_id, index, text, label}, or one per section with --sections.
"""

import json
import logging
import sys
from pathlib import Path

from emrseg.config import PipelineConfig
from emrseg.errors import EmptyNoteError, ValidationError
from emrseg.notes import RawNote
from emrseg.services.segmenter import Segmenter, sections

logger = logging.getLogger(__name__)


def register(subparsers):
    segment = subparsers.add_parser('segment', help='label every sentence of a raw note')
    segment.add_argument('note', help="note text file, or '-' for stdin")
    segment.add_argument('--model', help='model container (default: paths.model)')
    segment.add_argument('--note-id', help='note id for the output records (default: file stem)')
    segment.add_argument('--sections', action='store_true', help='one record per contiguous section')
    segment.add_argument('--marginals', action='store_true', help='add the posterior probability of each label')
    segment.add_argument('--out', help='write JSON Lines here instead of stdout')
    segment.set_defaults(handler=cmd_segment)


def read_note_text(source: str) -> str:
    """
    Read raw note bytes and decode them as strict UTF-8.

    Raises:
        UnicodeDecodeError: the input is not valid UTF-8
        EmptyNoteError: the input is empty or whitespace only
    """
    data = sys.stdin.buffer.read() if source == '-' else Path(source).read_bytes()
    text = data.decode('utf-8')
    if not text.strip():
        raise EmptyNoteError(f"Input note {source} is empty")
    return text


def cmd_segment(args, config: PipelineConfig) -> int:
    model_path = args.model or config.paths.model
    if not model_path:
        raise ValidationError("No model: pass --model or set paths.model")

    segmenter = Segmenter.load(model_path)
    text = read_note_text(args.note)
    note_id = args.note_id or ('stdin' if args.note == '-' else Path(args.note).stem)
    segmented = segmenter.segment(RawNote(note_id=note_id, text=text), marginals=args.marginals)

    if args.sections:
        records = sections(note_id, segmented)
    else:
        records = [s.to_dict(note_id) for s in segmented]
    lines = ''.join(json.dumps(record, ensure_ascii=False, sort_keys=True) + '\n' for record in records)

    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(lines, encoding='utf-8')
    else:
        sys.stdout.write(lines)
        sys.stdout.flush()
    logger.info(f"Segmented note {note_id}: {len(segmented)} sentence(s), {len(records)} record(s)")
    return 0
