"""
Domain records shared by every module: section labels, sample types, raw and
labeled notes, and the JSON Lines corpus format.
"""

import hashlib
import json
import logging
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Iterable, Iterator, List, Optional, Tuple

logger = logging.getLogger(__name__)


class SectionLabel(Enum):
    """The 25 canonical parts of a discharge summary, in clinical order."""

    ADMISSION_DATE = 'admission date'
    DISCHARGE_DATE = 'discharge date'
    DATE_OF_BIRTH = 'date of birth'
    SEX = 'sex'
    SERVICE = 'service'
    ALLERGIES = 'allergies'
    ATTENDING = 'attending'
    CHIEF_COMPLAINT = 'chief complaint'
    MAJOR_PROCEDURE = 'major surgical or invasive procedure'
    HISTORY_OF_PRESENT_ILLNESS = 'history of present illness'
    REVIEW_OF_SYSTEM = 'review of system'
    PAST_MEDICAL_HISTORY = 'past medical history'
    SOCIAL_HISTORY = 'social history'
    FAMILY_HISTORY = 'family history'
    PHYSICAL_EXAM = 'physical exam'
    PERTINENT_RESULT = 'pertinent result'
    HOSPITAL_COURSE = 'hospital course'
    MEDICATION_ON_ADMISSION = 'medication on admission'
    DISCHARGE_MEDICATIONS = 'discharge medications'
    DISCHARGE_DISPOSITION = 'discharge disposition'
    FACILITY = 'facility'
    DISCHARGE_DIAGNOSIS = 'discharge diagnosis'
    DISCHARGE_CONDITION = 'discharge condition'
    DISCHARGE_INSTRUCTION = 'discharge instruction'
    FOLLOW_UP_INSTRUCTION = 'follow-up instruction'

    @property
    def canonical(self) -> str:
        return self.value

    @property
    def index(self) -> int:
        return LABELS.index(self)

    @property
    def slug(self) -> str:
        """Identifier form used for XML-style tags, e.g. follow_up_instruction."""
        return self.value.replace(' ', '_').replace('-', '_')

    @classmethod
    def parse(cls, text: str) -> 'SectionLabel':
        """
        Resolve a label from its canonical string or enum name.

        Raises:
            ValueError: if the text names no label
        """
        key = text.strip().lower()
        for label in cls:
            if key in (label.value, label.name.lower(), label.slug):
                return label
        raise ValueError(f"Unknown section label: {text!r}")


LABELS: List[SectionLabel] = list(SectionLabel)


class SampleType(Enum):
    """Heading formats a labeled note can be rendered in."""

    TYPE1 = 'Type1'  # headings removed
    TYPE2 = 'Type2'  # original headings kept
    TYPE3 = 'Type3'  # headings replaced by canonical labels
    TYPE4 = 'Type4'  # XML-style open/close tags around every section


SAMPLE_TYPES: List[SampleType] = list(SampleType)


class CorpusKind(Enum):
    """Training-corpus compositions."""

    HEADINGS_ONLY = 'headings_only'
    NO_HEADINGS = 'no_headings'
    MIXED = 'mixed'

    @classmethod
    def parse(cls, text: str) -> 'CorpusKind':
        key = text.strip().lower().replace('-', '_')
        aliases = {
            'headingsonly': cls.HEADINGS_ONLY,
            'noheadings': cls.NO_HEADINGS,
        }
        if key in aliases:
            return aliases[key]
        return cls(key)


@dataclass(frozen=True)
class RawNote:
    """Unprocessed note body as it comes from the source."""

    note_id: str
    text: str


@dataclass(frozen=True)
class Sentence:
    """
    Normalized token sequence cut from a raw note.

    span holds (start, end) character offsets into RawNote.text and
    line_index the 0-based line the sentence came from.
    """

    tokens: Tuple[str, ...]
    span: Tuple[int, int]
    line_index: int = 0


@dataclass(frozen=True)
class LabeledSentence:
    tokens: Tuple[str, ...]
    label: SectionLabel
    heading: bool = False

    def to_dict(self) -> dict:
        return {
            'tokens': list(self.tokens),
            'label': self.label.value,
            'heading': self.heading,
        }

    @classmethod
    def from_dict(cls, data: dict) -> 'LabeledSentence':
        return cls(
            tokens=tuple(data['tokens']),
            label=SectionLabel.parse(data['label']),
            heading=bool(data.get('heading', False)),
        )


@dataclass(frozen=True)
class LabeledNote:
    """Ordered sentences of one note with their section labels."""

    note_id: str
    sample_type: SampleType
    sentences: Tuple[LabeledSentence, ...] = field(default_factory=tuple)

    @property
    def labels(self) -> List[SectionLabel]:
        return [s.label for s in self.sentences]

    @property
    def token_sequences(self) -> List[Tuple[str, ...]]:
        return [s.tokens for s in self.sentences]

    def __len__(self) -> int:
        return len(self.sentences)

    def with_type(self, sample_type: SampleType, sentences: Iterable[LabeledSentence]) -> 'LabeledNote':
        return replace(self, sample_type=sample_type, sentences=tuple(sentences))

    def to_dict(self) -> dict:
        return {
            'note_id': self.note_id,
            'sample_type': self.sample_type.value,
            'sentences': [s.to_dict() for s in self.sentences],
        }

    @classmethod
    def from_dict(cls, data: dict) -> 'LabeledNote':
        return cls(
            note_id=str(data['note_id']),
            sample_type=SampleType(data['sample_type']),
            sentences=tuple(LabeledSentence.from_dict(s) for s in data['sentences']),
        )


def label_runs(labels: List[SectionLabel]) -> List[Tuple[SectionLabel, int, int]]:
    """
    Collapse a label sequence into contiguous runs.

    Returns:
        List of (label, first index, last index inclusive)
    """
    runs = []
    for i, label in enumerate(labels):
        if runs and runs[-1][0] == label:
            runs[-1] = (label, runs[-1][1], i)
        else:
            runs.append((label, i, i))
    return runs


def _dump_line(note: LabeledNote) -> str:
    return json.dumps(note.to_dict(), ensure_ascii=False, sort_keys=True, separators=(',', ':'))


def write_corpus(path, notes: Iterable[LabeledNote]) -> int:
    """
    Write labeled notes as JSON Lines, one note per line.

    Args:
        path: Output file path
        notes: Notes to write, in order

    Returns:
        Number of records written
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    count = 0
    with open(path, 'w', encoding='utf-8', newline='\n') as f:
        for note in notes:
            f.write(_dump_line(note))
            f.write('\n')
            count += 1
    logger.info(f"Wrote {count} labeled notes to {path}")
    return count


def iter_corpus(path) -> Iterator[LabeledNote]:
    with open(path, 'r', encoding='utf-8') as f:
        for line_no, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                yield LabeledNote.from_dict(json.loads(line))
            except (KeyError, ValueError, TypeError) as e:
                raise ValueError(f"{path}:{line_no}: malformed corpus record: {e}") from e


def read_corpus(path) -> List[LabeledNote]:
    notes = list(iter_corpus(path))
    logger.info(f"Read {len(notes)} labeled notes from {path}")
    return notes


def file_hash(path: Optional[str]) -> Optional[str]:
    """SHA-256 of a file's bytes, or None when the path is unset."""
    if not path:
        return None
    digest = hashlib.sha256()
    with open(path, 'rb') as f:
        for block in iter(lambda: f.read(1 << 20), b''):
            digest.update(block)
    return digest.hexdigest()
