"""
Readers for the places raw notes come from.

Supported inputs:
    - a directory of ``*.txt`` files, one note per file (note_id = file stem)
    - a MIMIC-style ``NOTEEVENTS.csv`` / ``.csv.gz`` export (discharge
      summaries only, note_id = ROW_ID)
    - a labeled-corpus JSON Lines file (already Type2-labeled notes)
"""

import logging
from pathlib import Path
from typing import List, Optional, Union

import pandas as pd

from emrseg.errors import ValidationError
from emrseg.notes import LabeledNote, RawNote, SampleType, read_corpus

logger = logging.getLogger(__name__)

DISCHARGE_CATEGORY = 'Discharge summary'


def read_text_directory(directory) -> List[RawNote]:
    """Read every ``*.txt`` file of a directory, sorted by file name."""
    directory = Path(directory)
    notes = []
    for path in sorted(directory.glob('*.txt')):
        notes.append(RawNote(note_id=path.stem, text=path.read_text(encoding='utf-8')))
    logger.info(f"Read {len(notes)} note(s) from {directory}")
    return notes


def read_noteevents(path, category: Optional[str] = DISCHARGE_CATEGORY, limit: Optional[int] = None) -> List[RawNote]:
    """
    Read notes from a NOTEEVENTS-style CSV export.

    Args:
        path: CSV file, optionally gzip-compressed
        category: CATEGORY value to keep (None keeps every row)
        limit: Keep at most this many notes

    Raises:
        ValidationError: required columns are missing
    """
    frame = pd.read_csv(path, usecols=lambda c: c.upper() in ('ROW_ID', 'CATEGORY', 'TEXT'),
                        dtype=str, keep_default_na=False, compression='infer')
    frame.columns = [c.upper() for c in frame.columns]
    missing = {'ROW_ID', 'TEXT'} - set(frame.columns)
    if missing:
        raise ValidationError(f"{path} is missing column(s) {sorted(missing)}")

    if category is not None and 'CATEGORY' in frame.columns:
        frame = frame[frame['CATEGORY'].str.strip().str.lower() == category.lower()]
    if limit is not None:
        frame = frame.head(limit)

    notes = [RawNote(note_id=str(row_id), text=text) for row_id, text in zip(frame['ROW_ID'], frame['TEXT'])]
    logger.info(f"Read {len(notes)} note(s) from {path}")
    return notes


def load_notes(source, limit: Optional[int] = None) -> List[Union[RawNote, LabeledNote]]:
    """
    Read notes from a directory, a NOTEEVENTS CSV or a labeled JSON Lines file.

    Raises:
        FileNotFoundError: the source does not exist
        ValidationError: a labeled corpus is malformed or holds notes that are
            not Type2
    """
    source = Path(source)
    if not source.exists():
        raise FileNotFoundError(f"Note source not found: {source}")

    if source.is_dir():
        notes = read_text_directory(source)
    elif source.name.lower().endswith(('.csv', '.csv.gz')):
        notes = read_noteevents(source, limit=limit)
    else:
        try:
            notes = read_corpus(source)
        except ValueError as e:
            raise ValidationError(str(e)) from e
        if any(note.sample_type is not SampleType.TYPE2 for note in notes):
            raise ValidationError(f"{source}: labeled input must hold Type2 notes only")

    if limit is not None:
        notes = notes[:limit]
    return notes
