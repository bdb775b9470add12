"""
Corpus building: rule-based gold labels from original headings, rendering of
the four heading formats, training-corpus composition and train/test split.

Labeling rules:
    match:        a heading whose normalized text is a substring of a canonical
                  label (or contains one) takes that label; the longest canonical
                  form wins, ties go to the earlier label.
    continuation: a heading that matches no label continues the nearest preceding
                  matched section.
"""

import logging
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, TypeVar

import numpy as np

from emrseg.errors import EmptyInputError, NoAnchorSectionError, ValidationError
from emrseg.notes import (
    LABELS,
    SAMPLE_TYPES,
    CorpusKind,
    LabeledNote,
    LabeledSentence,
    RawNote,
    SampleType,
    SectionLabel,
    label_runs,
)
from emrseg.services.text_normalizer import TextNormalizer, default_normalizer

logger = logging.getLogger(__name__)

MAX_HEADING_WORDS = 8

T = TypeVar('T')


def _canonical_forms(normalizer: TextNormalizer) -> List[Tuple[SectionLabel, str]]:
    return [(label, normalizer.normalize_text(label.canonical)) for label in LABELS]


_CANONICAL = _canonical_forms(default_normalizer())


def is_heading_line(line: str) -> bool:
    """A line of at most 8 words that ends with ':' or is entirely upper-case."""
    stripped = line.strip()
    if not stripped:
        return False
    if len(stripped.split()) > MAX_HEADING_WORDS:
        return False
    return stripped.endswith(':') or stripped.isupper()


def detect_headings(note: RawNote) -> List[Tuple[int, str]]:
    """
    Heading candidates of a note in document order.

    Returns:
        List of (0-based line index, stripped heading text)
    """
    return [
        (index, line.strip())
        for index, line in enumerate(note.text.split('\n'))
        if is_heading_line(line)
    ]


def match_heading(heading: str, normalizer: Optional[TextNormalizer] = None) -> Optional[SectionLabel]:
    """
    Substring match of a heading against the canonical labels.

    The heading is normalized first, so case and the trailing colon do not
    matter. An empty heading matches nothing.

    Returns:
        The matched SectionLabel, or None when Unmatched
    """
    normalizer = normalizer or default_normalizer()
    text = normalizer.normalize_text(heading)
    if not text:
        return None

    canonical = _CANONICAL if normalizer is default_normalizer() else _canonical_forms(normalizer)
    best = None
    for label, form in canonical:
        if text in form or form in text:
            if best is None or len(form) > len(best[1]):
                best = (label, form)
    return best[0] if best else None


def assign_labels(note: RawNote, normalizer: Optional[TextNormalizer] = None) -> LabeledNote:
    """
    Label every sentence of a note from its original headings (Type2 form).

    Heading sentences carry their section's label and heading=True. Text
    before the first matched heading is dropped.

    Raises:
        NoAnchorSectionError: no heading in the note matches a label
        EmptyNoteError: the note yields no sentence
    """
    normalizer = normalizer or default_normalizer()
    headings: Dict[int, Optional[SectionLabel]] = {
        index: match_heading(text, normalizer) for index, text in detect_headings(note)
    }
    if not any(label is not None for label in headings.values()):
        raise NoAnchorSectionError(note.note_id)

    sentences = []
    current: Optional[SectionLabel] = None
    dropped = 0
    for sentence in normalizer.split_sentences(note):
        is_heading = sentence.line_index in headings
        if is_heading and headings[sentence.line_index] is not None:
            current = headings[sentence.line_index]
        if current is None:
            dropped += 1
            continue
        sentences.append(LabeledSentence(tokens=sentence.tokens, label=current, heading=is_heading))

    if dropped:
        logger.debug(f"Note {note.note_id}: dropped {dropped} sentence(s) before the first matched heading")
    if not sentences:
        raise NoAnchorSectionError(note.note_id)
    return LabeledNote(note_id=note.note_id, sample_type=SampleType.TYPE2, sentences=tuple(sentences))


def label_tokens(label: SectionLabel, normalizer: Optional[TextNormalizer] = None) -> Tuple[str, ...]:
    """Tokens of the canonical label text, e.g. follow-up -> (follow, up, instruction)."""
    normalizer = normalizer or default_normalizer()
    return tuple(normalizer.normalize_tokens(label.canonical))


def open_tag(label: SectionLabel) -> str:
    return f"<{label.slug}>"


def close_tag(label: SectionLabel) -> str:
    return f"</{label.slug}>"


def make_sample(labeled: LabeledNote, sample_type: SampleType) -> LabeledNote:
    """
    Render a Type2 note in another heading format.

    Type1 drops heading sentences, Type3 swaps their tokens for the
    canonical label text, Type4 drops them and wraps every section in
    one-token open and close tag sentences labeled with that section.
    Content sentences are identical in every format.

    Raises:
        ValidationError: input is not in Type2 form
    """
    if labeled.sample_type is not SampleType.TYPE2:
        raise ValidationError(
            f"Note '{labeled.note_id}' must be Type2 to render other formats (got {labeled.sample_type.value})"
        )

    if sample_type is SampleType.TYPE2:
        return labeled

    if sample_type is SampleType.TYPE1:
        return labeled.with_type(sample_type, (s for s in labeled.sentences if not s.heading))

    if sample_type is SampleType.TYPE3:
        return labeled.with_type(sample_type, (
            LabeledSentence(tokens=label_tokens(s.label), label=s.label, heading=True) if s.heading else s
            for s in labeled.sentences
        ))

    sentences = []
    for label, first, last in label_runs(labeled.labels):
        sentences.append(LabeledSentence(tokens=(open_tag(label),), label=label, heading=True))
        sentences.extend(s for s in labeled.sentences[first:last + 1] if not s.heading)
        sentences.append(LabeledSentence(tokens=(close_tag(label),), label=label, heading=True))
    return labeled.with_type(sample_type, sentences)


def label_notes(
    notes: Iterable[RawNote],
    normalizer: Optional[TextNormalizer] = None
) -> Tuple[List[LabeledNote], List[str]]:
    """
    Apply assign_labels to many notes, skipping the ones without an anchor.

    Returns:
        (labeled notes in input order, skipped note ids)
    """
    labeled, skipped = [], []
    for note in notes:
        try:
            labeled.append(assign_labels(note, normalizer))
        except (NoAnchorSectionError, EmptyInputError) as e:
            logger.warning(f"Skipping note {note.note_id}: {str(e)}")
            skipped.append(note.note_id)
    if skipped:
        logger.warning(f"Skipped {len(skipped)} note(s) without a matched heading")
    return labeled, skipped


def as_labeled(notes, normalizer: Optional[TextNormalizer] = None) -> List[LabeledNote]:
    """Label raw notes (skipping anchorless ones) or pass Type2 notes through."""
    items = list(notes)
    raw = [n for n in items if isinstance(n, RawNote)]
    if raw and len(raw) != len(items):
        raise ValidationError("Cannot mix raw and labeled notes in one corpus")
    if raw:
        return label_notes(raw, normalizer)[0]
    return items


def mixed_types(count: int, seed: int) -> List[SampleType]:
    """
    Balanced sample-type assignment for a Mixed corpus.

    A seeded permutation of Type1..Type4 repeated, so every position gets
    each type with probability 1/4 and the counts differ by at most one.
    """
    cycle = [SAMPLE_TYPES[i % len(SAMPLE_TYPES)] for i in range(count)]
    order = np.random.default_rng(seed).permutation(count)
    return [cycle[i] for i in order]


def build_corpus(
    notes: Iterable,
    kind: CorpusKind,
    seed: int,
    normalizer: Optional[TextNormalizer] = None
) -> List[LabeledNote]:
    """
    Compose a training corpus of one kind.

    Args:
        notes: RawNote items (labeled here, anchorless ones skipped) or
            Type2 LabeledNote items
        kind: HeadingsOnly (Type2), NoHeadings (Type1) or Mixed
        seed: Seed for the Mixed type assignment

    Returns:
        Rendered notes in input order
    """
    labeled = as_labeled(notes, normalizer)
    if not labeled:
        logger.warning("No notes to build a corpus from; the corpus is empty")
        return []

    if kind is CorpusKind.HEADINGS_ONLY:
        types = [SampleType.TYPE2] * len(labeled)
    elif kind is CorpusKind.NO_HEADINGS:
        types = [SampleType.TYPE1] * len(labeled)
    else:
        types = mixed_types(len(labeled), seed)

    corpus = [make_sample(note, sample_type) for note, sample_type in zip(labeled, types)]
    histogram = {t.value: types.count(t) for t in SAMPLE_TYPES if t in types}
    logger.info(f"Built {kind.value} corpus of {len(corpus)} notes: {histogram}")
    return corpus


def build_test_corpus(notes: Iterable, normalizer: Optional[TextNormalizer] = None) -> List[LabeledNote]:
    """Render every note in all four sample types, in type order per note."""
    labeled = as_labeled(notes, normalizer)
    corpus = [make_sample(note, sample_type) for note in labeled for sample_type in SAMPLE_TYPES]
    logger.info(f"Built test corpus of {len(corpus)} samples from {len(labeled)} notes")
    return corpus


def split_train_test(items: Sequence[T], train_fraction: float, seed: int) -> Tuple[List[T], List[T]]:
    """
    Split records by note_id into disjoint train and test parts.

    Records sharing a note_id always land on the same side. The train side
    gets round(n * train_fraction) note ids, clamped to [1, n - 1].

    Raises:
        ValidationError: fewer than 2 distinct notes, or fraction outside (0, 1)
    """
    if not 0 < train_fraction < 1:
        raise ValidationError(f"train_fraction must be in (0, 1) (got {train_fraction})")

    note_ids = list(dict.fromkeys(item.note_id for item in items))
    if len(note_ids) < 2:
        raise ValidationError(f"Need at least 2 notes to split, got {len(note_ids)}")

    n_train = min(max(int(round(len(note_ids) * train_fraction)), 1), len(note_ids) - 1)
    order = np.random.default_rng(seed).permutation(len(note_ids))
    train_ids = {note_ids[i] for i in order[:n_train]}

    train = [item for item in items if item.note_id in train_ids]
    test = [item for item in items if item.note_id not in train_ids]
    logger.info(f"Split {len(note_ids)} notes into {n_train} train / {len(note_ids) - n_train} test")
    return train, test
