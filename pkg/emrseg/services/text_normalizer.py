"""
Text normalization and sentence splitting for discharge notes.

This module turns raw note text into lowercase, masked token sequences:
MIMIC-style privacy masks collapse to one category token, digit runs become
[num], unit words become [unit], and every punctuation or symbol character
is replaced by a space.
"""

import logging
import re
import unicodedata
from functools import lru_cache
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

from emrseg.errors import ConfigurationError, EmptyNoteError
from emrseg.notes import RawNote, Sentence

logger = logging.getLogger(__name__)

DATE = '[date]'
NAME = '[name]'
LOCATION = '[location]'
PHONE = '[phone]'
ID = '[id]'
NUM = '[num]'
UNIT = '[unit]'

MASK_TOKENS = (DATE, NAME, LOCATION, PHONE, ID, NUM, UNIT)
MASK_CATEGORIES = {token[1:-1]: token for token in MASK_TOKENS}

DEFAULT_UNITS = (
    'mg', 'mcg', 'g', 'kg', 'ml', 'l', 'mmhg', 'bpm', 'meq', 'units',
    'mm', 'cm', 'percent',
)

# First matching cue wins; bodies with no cue fall back to [id]
DEFAULT_MASK_CUES: Tuple[Tuple[str, str], ...] = (
    ('telephone', 'phone'),
    ('fax', 'phone'),
    ('phone', 'phone'),
    ('pager', 'phone'),
    ('name', 'name'),
    ('doctor', 'name'),
    ('lastname', 'name'),
    ('firstname', 'name'),
    ('initials', 'name'),
    ('hospital', 'location'),
    ('location', 'location'),
    ('address', 'location'),
    ('street', 'location'),
    ('state', 'location'),
    ('country', 'location'),
    ('university', 'location'),
    ('company', 'location'),
    ('ward', 'location'),
    ('apartment', 'location'),
    ('date', 'date'),
    ('month', 'date'),
    ('year', 'date'),
    ('holiday', 'date'),
)

DEFAULT_MAX_SENTENCE_TOKENS = 512

_DATE_BODY = re.compile(r'^\s*(?:\d{1,4}[-/]\d{1,2}(?:[-/]\d{1,4})?|\d{4})\s*$')
_PRIVACY_MASK = re.compile(r'\[\*\*(.*?)\*\*\]')
_MASK_OR_PRIVACY = re.compile(
    r'\[\*\*.*?\*\*\]|\[(?:' + '|'.join(MASK_CATEGORIES) + r')\]'
)
_NUMBER = re.compile(r'\d+(?:\.\d+)*')
_RAW_WORD = re.compile(r'(?:\[\*\*.*?\*\*\]|[^\s\[]|\[(?!\*\*))+')
_LIST_MARKER = re.compile(r'^\d+\.$')
_SENTENCE_END = ('.', '!', '?')
_TRAILING_CLOSERS = '"\')]'


@lru_cache(maxsize=None)
def _replace_char(ch: str) -> str:
    category = unicodedata.category(ch)
    if category[0] in ('P', 'S', 'Z') or category in ('Cc', 'Cf'):
        return ' '
    if category[0] == 'N':
        # numerics that are not decimal digits (superscripts, fractions)
        return f' {NUM} '
    return ch


def load_unit_lexicon(path) -> Tuple[str, ...]:
    """
    Read a unit lexicon: one unit per line, '#' starts a comment.

    Raises:
        ConfigurationError: if the file cannot be read or holds no units
    """
    try:
        text = Path(path).read_text(encoding='utf-8')
    except OSError as e:
        raise ConfigurationError(f"Cannot read unit lexicon {path}: {e}") from e

    units = []
    for line in text.splitlines():
        entry = line.split('#', 1)[0].strip().lower()
        if entry:
            units.append(entry)
    if not units:
        raise ConfigurationError(f"Unit lexicon {path} is empty")
    logger.info(f"Loaded {len(units)} unit(s) from {path}")
    return tuple(units)


def load_mask_cues(path) -> Tuple[Tuple[str, str], ...]:
    """
    Read a mask cue table: 'cue<TAB>category' per line, in priority order.

    Raises:
        ConfigurationError: unreadable file, malformed line or unknown category
    """
    try:
        text = Path(path).read_text(encoding='utf-8')
    except OSError as e:
        raise ConfigurationError(f"Cannot read mask cue table {path}: {e}") from e

    cues = []
    for line_no, line in enumerate(text.splitlines(), start=1):
        entry = line.split('#', 1)[0].strip()
        if not entry:
            continue
        parts = entry.split('\t')
        if len(parts) != 2:
            raise ConfigurationError(f"{path}:{line_no}: expected 'cue<TAB>category', got {line!r}")
        cue, category = parts[0].strip().lower(), parts[1].strip().lower().strip('[]')
        if category not in MASK_CATEGORIES:
            raise ConfigurationError(f"{path}:{line_no}: unknown mask category '{category}'")
        cues.append((cue, category))
    logger.info(f"Loaded {len(cues)} mask cue(s) from {path}")
    return tuple(cues)


class TextNormalizer:
    """
    Normalizer carrying the unit lexicon, mask cue table and sentence cap.

    Instances are immutable after construction and safe to share between
    threads.
    """

    def __init__(
        self,
        units: Optional[Iterable[str]] = None,
        mask_cues: Optional[Sequence[Tuple[str, str]]] = None,
        max_sentence_tokens: int = DEFAULT_MAX_SENTENCE_TOKENS
    ):
        if max_sentence_tokens < 1:
            raise ConfigurationError(f"max_sentence_tokens must be >= 1 (got {max_sentence_tokens})")
        self.units = frozenset(u.lower() for u in (units if units is not None else DEFAULT_UNITS))
        self.mask_cues = tuple(mask_cues if mask_cues is not None else DEFAULT_MASK_CUES)
        self.max_sentence_tokens = max_sentence_tokens

    @classmethod
    def from_config(cls, config) -> 'TextNormalizer':
        """Build from a PipelineConfig, loading resource files when configured."""
        units = load_unit_lexicon(config.paths.units) if config.paths.units else None
        cues = load_mask_cues(config.paths.mask_cues) if config.paths.mask_cues else None
        return cls(units=units, mask_cues=cues, max_sentence_tokens=config.max_sentence_tokens)

    def settings(self) -> Dict:
        """Serializable form, embedded in model containers."""
        return {
            'units': sorted(self.units),
            'mask_cues': [list(c) for c in self.mask_cues],
            'max_sentence_tokens': self.max_sentence_tokens,
        }

    @classmethod
    def from_settings(cls, settings: Dict) -> 'TextNormalizer':
        return cls(
            units=settings.get('units'),
            mask_cues=[tuple(c) for c in settings['mask_cues']] if 'mask_cues' in settings else None,
            max_sentence_tokens=settings.get('max_sentence_tokens', DEFAULT_MAX_SENTENCE_TOKENS),
        )

    def classify_privacy_mask(self, mask_body: str) -> str:
        """
        Category token for the interior of a ``[**...**]`` span.

        Date-shaped bodies are [date]; otherwise the first cue found in the
        lowercased body decides; no cue gives [id].
        """
        if _DATE_BODY.match(mask_body):
            return DATE
        body = mask_body.lower()
        for cue, category in self.mask_cues:
            if cue in body:
                return MASK_CATEGORIES[category]
        return ID

    def _plain_tokens(self, text: str) -> List[str]:
        tokens = []
        position = 0
        for match in _NUMBER.finditer(text):
            tokens.extend(self._symbol_free_words(text[position:match.start()]))
            tokens.append(NUM)
            position = match.end()
        tokens.extend(self._symbol_free_words(text[position:]))
        return tokens

    def _symbol_free_words(self, text: str) -> List[str]:
        cleaned = ''.join(_replace_char(ch) for ch in text)
        return [UNIT if word in self.units else word for word in cleaned.split()]

    def normalize_word(self, word: str) -> List[str]:
        """Tokens produced by one whitespace-free chunk of raw text."""
        tokens = []
        position = 0
        lowered = word.lower()
        for match in _MASK_OR_PRIVACY.finditer(lowered):
            tokens.extend(self._plain_tokens(lowered[position:match.start()]))
            text = match.group(0)
            if text.startswith('[**'):
                tokens.append(self.classify_privacy_mask(text[3:-3]))
            else:
                tokens.append(text)
            position = match.end()
        tokens.extend(self._plain_tokens(lowered[position:]))
        return tokens

    def normalize_tokens(self, raw: Union[str, bytes]) -> List[str]:
        text = _ensure_text(raw)
        tokens = []
        for match in _RAW_WORD.finditer(text):
            tokens.extend(self.normalize_word(match.group(0)))
        return tokens

    def normalize_text(self, raw: Union[str, bytes]) -> str:
        """
        Lowercased, masked, symbol-free text with single spaces.

        Args:
            raw: Note text; bytes are decoded as strict UTF-8

        Returns:
            Normalized string ("" for empty input)

        Raises:
            UnicodeDecodeError: bytes input that is not valid UTF-8
        """
        return ' '.join(self.normalize_tokens(raw))

    def tokenize(self, text: str) -> List[str]:
        return text.split()

    def split_sentences(self, note: RawNote) -> List[Sentence]:
        """
        Cut a note into normalized sentences.

        Lines are split first, then after words ending in '.', '!' or '?'
        (a bare list number such as "2." does not end a sentence). Sentences
        longer than max_sentence_tokens are cut into consecutive pieces.
        Sentences with no tokens left after normalization are dropped.

        Raises:
            EmptyNoteError: when the note yields no sentence
        """
        sentences = []
        line_start = 0
        for line_index, line in enumerate(note.text.split('\n')):
            pending: List[Tuple[str, int, int]] = []
            for match in _RAW_WORD.finditer(line):
                word = match.group(0)
                pending.append((word, line_start + match.start(), line_start + match.end()))
                stripped = word.rstrip(_TRAILING_CLOSERS)
                if stripped.endswith(_SENTENCE_END) and not _LIST_MARKER.match(stripped):
                    sentences.extend(self._emit(pending, line_index))
                    pending = []
            sentences.extend(self._emit(pending, line_index))
            line_start += len(line) + 1

        if not sentences:
            raise EmptyNoteError(f"Note '{note.note_id}' contains no sentences")
        return sentences

    def _emit(self, words: List[Tuple[str, int, int]], line_index: int) -> List[Sentence]:
        tokens: List[str] = []
        starts: List[int] = []
        ends: List[int] = []
        for word, start, end in words:
            for token in self.normalize_word(word):
                tokens.append(token)
                starts.append(start)
                ends.append(end)

        cap = self.max_sentence_tokens
        pieces = []
        for first in range(0, len(tokens), cap):
            last = min(first + cap, len(tokens)) - 1
            pieces.append(Sentence(
                tokens=tuple(tokens[first:last + 1]),
                span=(starts[first], ends[last]),
                line_index=line_index,
            ))
        return pieces


def _ensure_text(raw: Union[str, bytes]) -> str:
    if isinstance(raw, (bytes, bytearray)):
        return bytes(raw).decode('utf-8')
    return raw


_default = TextNormalizer()


def normalize_text(raw: Union[str, bytes]) -> str:
    return _default.normalize_text(raw)


def classify_privacy_mask(mask_body: str) -> str:
    return _default.classify_privacy_mask(mask_body)


def split_sentences(note: RawNote) -> List[Sentence]:
    return _default.split_sentences(note)


def tokenize(text: str) -> List[str]:
    return _default.tokenize(text)


def default_normalizer() -> TextNormalizer:
    return _default
