from dataclasses import replace

import pytest

from emrseg.errors import GrammarError
from emrseg.notes import LABELS, SectionLabel
from emrseg.services.corpus_builder import assign_labels, detect_headings, match_heading
from emrseg.services.synthetic_notes import (
    MANDATORY,
    generate_synthetic_note,
    generate_synthetic_notes,
    load_grammar,
    validate_grammar,
)
from tests.conftest import RESOURCES

MINIMAL = """
[admission date]
headings = Admission Date
templates = [**{date}**]
sentences = 1

[sex]
headings = Sex
templates =
    Female
    Male
sentences = 1

[service]
headings = Service
templates = Medicine
sentences = 1
"""


def write_grammar(tmp_path, text):
    path = tmp_path / 'grammar.ini'
    path.write_text(text, encoding='utf-8')
    return path


class TestDefaultGrammar:

    def test_covers_every_label_in_order(self, grammar):
        assert [spec.label for spec in grammar.sections] == LABELS

    def test_aliases_resolve_to_their_section(self, grammar):
        for spec in grammar.sections:
            assert spec.headings
            for heading in spec.headings:
                assert match_heading(heading) is spec.label
            for subheading in spec.subheadings:
                assert match_heading(subheading) is None

    def test_lab_is_a_physical_exam_sub_heading(self, grammar):
        assert 'LAB' in grammar.section(SectionLabel.PHYSICAL_EXAM).subheadings


class TestGeneration:

    def test_same_seed_same_note(self, grammar):
        assert generate_synthetic_note(grammar, 0) == generate_synthetic_note(grammar, 0)

    def test_different_seeds_differ(self, grammar):
        assert generate_synthetic_note(grammar, 0).text != generate_synthetic_note(grammar, 1).text

    def test_batch_is_deterministic(self, grammar):
        first = generate_synthetic_notes(grammar, 5, seed=9)
        second = generate_synthetic_notes(grammar, 5, seed=9)
        assert first == second
        assert [n.note_id for n in first] == [f"synth-9-{i:06d}" for i in range(5)]

    def test_zero_notes(self, grammar):
        assert generate_synthetic_notes(grammar, 0, seed=1) == []

    def test_mandatory_headings_always_present(self, grammar):
        for note in generate_synthetic_notes(grammar, 40, seed=3):
            matched = {match_heading(text) for _, text in detect_headings(note)}
            assert set(MANDATORY) <= matched

    def test_body_lines_are_never_headings(self, grammar):
        # every heading line a generated note contains is a section heading or a sub-heading
        aliases = {h.upper() for spec in grammar.sections for h in spec.headings + spec.subheadings}
        for note in generate_synthetic_notes(grammar, 100, seed=17):
            for _, text in detect_headings(note):
                assert text.rstrip(':').upper() in aliases, text

    def test_generated_notes_label_cleanly(self, grammar):
        for note in generate_synthetic_notes(grammar, 20, seed=5):
            labeled = assign_labels(note)
            assert labeled.labels[0] is SectionLabel.ADMISSION_DATE


class TestGrammarFiles:

    def test_example_grammar_loads(self):
        grammar = load_grammar(RESOURCES / 'grammar_example.ini')
        assert len(grammar.sections) == 8
        assert grammar.section(SectionLabel.PHYSICAL_EXAM).subheadings == ['LAB', 'VITALS']
        assert grammar.common_rate == pytest.approx(0.4)

    def test_example_grammar_generates_notes(self):
        grammar = load_grammar(RESOURCES / 'grammar_example.ini')
        labeled = assign_labels(generate_synthetic_note(grammar, 12))
        assert {SectionLabel.ADMISSION_DATE, SectionLabel.SEX, SectionLabel.SERVICE} <= set(labeled.labels)

    def test_minimal_grammar(self, tmp_path):
        grammar = load_grammar(write_grammar(tmp_path, MINIMAL))
        assert [spec.label for spec in grammar.sections] == list(MANDATORY)
        assert grammar.section(SectionLabel.SEX).templates == ['Female', 'Male']

    def test_alias_that_does_not_resolve(self, tmp_path):
        text = MINIMAL.replace("headings = Service", "headings = Service, Department")
        with pytest.raises(GrammarError, match='Department'):
            load_grammar(write_grammar(tmp_path, text))

    def test_sub_heading_that_resolves(self, tmp_path):
        text = MINIMAL.replace("headings = Sex\n", "headings = Sex\nsubheadings = FAMILY HISTORY\n")
        with pytest.raises(GrammarError):
            load_grammar(write_grammar(tmp_path, text))

    def test_unknown_section(self, tmp_path):
        with pytest.raises(GrammarError, match='unknown section'):
            load_grammar(write_grammar(tmp_path, MINIMAL + "\n[billing codes]\npool = a, b\n"))

    def test_unknown_key(self, tmp_path):
        with pytest.raises(GrammarError, match='unknown key'):
            load_grammar(write_grammar(tmp_path, MINIMAL + "\n[allergies]\ncolour = blue\n"))

    def test_missing_mandatory_section(self, tmp_path):
        text = MINIMAL.split('[service]')[0]
        with pytest.raises(GrammarError, match='service'):
            load_grammar(write_grammar(tmp_path, text))

    @pytest.mark.parametrize('extra', [
        "\n[facility]\npresence = 1.5\npool = north\n",
        "\n[facility]\nsentences = 3-1\npool = north\n",
        "\n[facility]\nwords = many\npool = north\n",
        "\n[facility]\npresence = 0.5\n",
    ])
    def test_invalid_section_values(self, tmp_path, extra):
        with pytest.raises(GrammarError):
            load_grammar(write_grammar(tmp_path, MINIMAL + extra))

    def test_unreadable_file(self, tmp_path):
        with pytest.raises(GrammarError):
            load_grammar(tmp_path / 'missing.ini')


class TestValidateGrammar:

    def test_lenient_mode_drops_bad_aliases(self, grammar):
        sex = grammar.section(SectionLabel.SEX)
        sections = [replace(s, headings=s.headings + ['Gender']) if s is sex else s for s in grammar.sections]
        cleaned = validate_grammar(replace(grammar, sections=sections), strict=False)
        assert 'Gender' not in cleaned.section(SectionLabel.SEX).headings

    def test_strict_mode_rejects_bad_aliases(self, grammar):
        sex = grammar.section(SectionLabel.SEX)
        sections = [replace(s, headings=s.headings + ['Gender']) if s is sex else s for s in grammar.sections]
        with pytest.raises(GrammarError):
            validate_grammar(replace(grammar, sections=sections), strict=True)

    def test_sections_out_of_order(self, grammar):
        with pytest.raises(GrammarError, match='order'):
            validate_grammar(replace(grammar, sections=list(reversed(grammar.sections))))

    def test_rate_out_of_range(self, grammar):
        with pytest.raises(GrammarError):
            validate_grammar(replace(grammar, common_rate=2.0))
