"""
Synthetic discharge-summary generator.

Stands in for access-gated MIMIC notes. A SectionGrammar lists the 25
sections in clinical order; each section has a presence probability, heading
aliases that match it, optional sub-headings that resolve to
nothing (and so continue the section), and a word pool.
Sentences mix section words with a shared pool of common words.

Grammar file format (INI):

    [grammar]
    common_words = the, patient, was, ...
    common_rate = 0.45
    subheading_rate = 0.15

    [physical exam]
    presence = 0.95
    mandatory = false
    headings = Physical Exam, Physical Examination
    subheadings = LABS, VITALS
    pool = afebrile, supple, ...
    templates =
    sentences = 3-10
    words = 5-14
    numeric = 0.4
    masks = 0.05
"""

import configparser
import logging
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from emrseg.errors import GrammarError
from emrseg.notes import LABELS, RawNote, SectionLabel
from emrseg.services.corpus_builder import is_heading_line, match_heading

logger = logging.getLogger(__name__)

MANDATORY = (SectionLabel.ADMISSION_DATE, SectionLabel.SEX, SectionLabel.SERVICE)

UNIT_WORDS = ('mg', 'mcg', 'mL', 'mmHg', 'bpm', 'mEq', 'units', 'cm', 'kg', 'g', 'percent')

MASK_BODIES = (
    '{year}-{month}-{day}',
    '{month}-{day}',
    'Hospital1 {n}',
    'Known lastname {n}',
    'First Name8 (NamePattern2) {n}',
    'Telephone/Fax (1) {n}',
    'Location (un) {n}',
    'Numeric Identifier {n}',
)


@dataclass
class SectionSpec:
    """Generation rules for one section label."""

    label: SectionLabel
    presence: float = 0.8
    mandatory: bool = False
    headings: List[str] = field(default_factory=list)
    subheadings: List[str] = field(default_factory=list)
    pool: List[str] = field(default_factory=list)
    templates: List[str] = field(default_factory=list)
    sentences: Tuple[int, int] = (1, 4)
    words: Tuple[int, int] = (4, 12)
    numeric: float = 0.0
    masks: float = 0.0
    tabular: float = 0.0


@dataclass
class SectionGrammar:
    sections: List[SectionSpec]
    common_words: List[str]
    common_rate: float = 0.45
    subheading_rate: float = 0.15
    alias_rate: float = 0.5
    preamble_rate: float = 0.1

    def section(self, label: SectionLabel) -> Optional[SectionSpec]:
        for spec in self.sections:
            if spec.label is label:
                return spec
        return None


COMMON_WORDS = [
    'the', 'patient', 'was', 'with', 'and', 'of', 'to', 'in', 'on', 'for',
    'is', 'a', 'at', 'by', 'as', 'he', 'she', 'his', 'her', 'has', 'had',
    'no', 'not', 'also', 'noted', 'given', 'per', 'after', 'prior', 'since',
    'this', 'that', 'which', 'were', 'be', 'from', 'well', 'then', 'further',
    'continued', 'today', 'again', 'some', 'other', 'both',
]

# label -> (headings, subheadings, pool)
_SECTION_TEXT: Dict[SectionLabel, Tuple[List[str], List[str], List[str]]] = {
    SectionLabel.ADMISSION_DATE: (['Admission Date', 'Admission Date/Time'], [], []),
    SectionLabel.DISCHARGE_DATE: (['Discharge Date', 'Discharge Date/Time'], [], []),
    SectionLabel.DATE_OF_BIRTH: (['Date of Birth', 'Date of Birth (DOB)'], [], []),
    SectionLabel.SEX: (['Sex', 'Sex/Gender'], [], []),
    SectionLabel.SERVICE: (['Service', 'Admitting Service'], [], []),
    SectionLabel.ALLERGIES: (['Allergies', 'Drug Allergies'], [], []),
    SectionLabel.ATTENDING: (['Attending', 'Attending Physician'], [], []),
    SectionLabel.CHIEF_COMPLAINT: (
        ['Chief Complaint', 'Complaint', 'Chief Complaints'], [],
        ['chest', 'pain', 'dyspnea', 'shortness', 'breath', 'fever', 'chills', 'syncope',
         'weakness', 'abdominal', 'cough', 'nausea', 'vomiting', 'palpitations', 'dizziness',
         'headache', 'confusion', 'melena', 'hematemesis', 'fall', 'lethargy', 'edema',
         'worsening', 'acute', 'onset', 'presenting', 'transfer', 'evaluation'],
    ),
    SectionLabel.MAJOR_PROCEDURE: (
        ['Major Surgical or Invasive Procedure', 'Procedure', 'Invasive Procedure'], [],
        ['intubation', 'extubation', 'catheterization', 'stent', 'placement', 'central',
         'line', 'arterial', 'bronchoscopy', 'endoscopy', 'colonoscopy', 'thoracentesis',
         'paracentesis', 'laparotomy', 'bypass', 'graft', 'valve', 'replacement', 'drain',
         'tracheostomy', 'picc', 'biopsy', 'angiography', 'embolization', 'dialysis',
         'hemodialysis', 'cardioversion', 'pacemaker'],
    ),
    SectionLabel.HISTORY_OF_PRESENT_ILLNESS: (
        ['History of Present Illness', 'Present Illness'], ['HPI'],
        ['presented', 'reports', 'states', 'denies', 'complained', 'emergency', 'department',
         'ed', 'found', 'brought', 'ems', 'developed', 'symptoms', 'days', 'weeks', 'ago',
         'home', 'woke', 'episode', 'gradually', 'suddenly', 'associated', 'radiating',
         'intermittent', 'progressive', 'initially', 'subsequently', 'triage', 'recent',
         'baseline', 'describes', 'unable'],
    ),
    SectionLabel.REVIEW_OF_SYSTEM: (
        ['Review of System', 'Review of Systems'], [],
        ['negative', 'positive', 'except', 'constitutional', 'systems', 'reviewed', 'otherwise',
         'night', 'sweats', 'weight', 'loss', 'gain', 'rash', 'dysuria', 'hematuria',
         'diarrhea', 'constipation', 'arthralgias', 'myalgias', 'vision', 'changes',
         'hearing', 'numbness', 'tingling', 'anxiety', 'depression', 'pertinent', 'fourteen'],
    ),
    SectionLabel.PAST_MEDICAL_HISTORY: (
        ['Past Medical History', 'Medical History'], ['PMH', 'PAST SURGICAL HISTORY'],
        ['hypertension', 'hyperlipidemia', 'diabetes', 'mellitus', 'type', 'coronary',
         'artery', 'disease', 'atrial', 'fibrillation', 'copd', 'asthma', 'ckd', 'stage',
         'hypothyroidism', 'gerd', 'osteoarthritis', 'cirrhosis', 'cholecystectomy',
         'appendectomy', 'status', 'post', 'history', 'remote', 'chronic', 'obesity',
         'anemia', 'gout', 'neuropathy'],
    ),
    SectionLabel.SOCIAL_HISTORY: (
        ['Social History', 'Social'], [],
        ['lives', 'alone', 'wife', 'husband', 'daughter', 'son', 'tobacco', 'smoker',
         'former', 'pack', 'years', 'quit', 'alcohol', 'drinks', 'occasionally', 'illicit',
         'drugs', 'retired', 'works', 'married', 'widowed', 'apartment', 'ambulates',
         'independently', 'walker', 'cane', 'supportive', 'family', 'nursing'],
    ),
    SectionLabel.FAMILY_HISTORY: (
        ['Family History', 'Family'], [],
        ['mother', 'father', 'brother', 'sister', 'died', 'cancer', 'breast', 'colon',
         'lung', 'prostate', 'stroke', 'myocardial', 'infarction', 'age', 'sudden',
         'cardiac', 'death', 'noncontributory', 'unknown', 'adopted', 'maternal',
         'paternal', 'grandmother', 'grandfather', 'relatives', 'hereditary',
         'leukemia', 'lymphoma'],
    ),
    SectionLabel.PHYSICAL_EXAM: (
        ['Physical Exam', 'Physical Examination', 'Admission Physical Exam'],
        ['LAB', 'LABS', 'VITALS', 'GENERAL'],
        ['vitals', 'afebrile', 'general', 'alert', 'oriented', 'distress', 'heent',
         'sclera', 'anicteric', 'mucous', 'membranes', 'moist', 'neck', 'supple', 'jvp',
         'lungs', 'clear', 'auscultation', 'bilaterally', 'wheezes', 'rales', 'rhonchi',
         'heart', 'regular', 'rate', 'rhythm', 'murmurs', 'rubs', 'gallops', 'abdomen',
         'soft', 'nontender', 'nondistended', 'bowel', 'sounds', 'extremities', 'warm',
         'pulses', 'palpable', 'neuro', 'cranial', 'nerves', 'intact', 'strength'],
    ),
    SectionLabel.PERTINENT_RESULT: (
        ['Pertinent Result', 'Pertinent Results', 'Result'],
        ['IMAGING', 'MICROBIOLOGY', 'ECHO', 'CXR'],
        ['blood', 'wbc', 'rbc', 'hgb', 'hct', 'mcv', 'plt', 'glucose', 'urean', 'creat',
         'sodium', 'potassium', 'chloride', 'bicarb', 'calcium', 'phos', 'magnesium',
         'alt', 'ast', 'alkphos', 'tbili', 'lipase', 'troponin', 'ck', 'inr', 'ptt',
         'lactate', 'culture', 'pending', 'radiograph', 'opacity', 'effusion',
         'impression', 'ejection', 'fraction', 'urinalysis'],
    ),
    SectionLabel.HOSPITAL_COURSE: (
        ['Hospital Course', 'Brief Hospital Course', 'Course'],
        ['ACTIVE ISSUES', 'CHRONIC ISSUES'],
        ['admitted', 'treated', 'started', 'improved', 'resolved', 'transitioned',
         'diuresis', 'antibiotics', 'ceftriaxone', 'vancomycin', 'heparin', 'drip',
         'monitored', 'telemetry', 'icu', 'floor', 'transferred', 'consulted', 'team',
         'recommended', 'trended', 'stable', 'course', 'complicated', 'held', 'restarted',
         'titrated', 'tolerated', 'discontinued', 'repeat', 'workup', 'likely', 'etiology',
         'secondary', 'hypotension', 'sepsis', 'pneumonia'],
    ),
    SectionLabel.MEDICATION_ON_ADMISSION: (
        ['Medication on Admission', 'Home Medication on Admission'], [],
        ['lisinopril', 'metoprolol', 'atorvastatin', 'simvastatin', 'amlodipine',
         'furosemide', 'omeprazole', 'levothyroxine', 'insulin', 'glargine', 'warfarin',
         'albuterol', 'fluticasone', 'sertraline', 'gabapentin', 'tablet', 'capsule',
         'inhaler', 'sig', 'one', 'two', 'tab', 'qhs', 'bid', 'tid', 'prn', 'home',
         'outpatient', 'taking'],
    ),
    SectionLabel.DISCHARGE_MEDICATIONS: (
        ['Discharge Medications', 'Medications', 'Discharge Medication'], [],
        ['aspirin', 'clopidogrel', 'carvedilol', 'losartan', 'spironolactone', 'torsemide',
         'pantoprazole', 'docusate', 'senna', 'bisacodyl', 'acetaminophen', 'oxycodone',
         'apixaban', 'prednisone', 'taper', 'levofloxacin', 'days', 'refills', 'disp',
         'delayed', 'release', 'daily', 'hours', 'needed', 'po', 'mouth', 'sodium',
         'chloride', 'new', 'changed', 'dose'],
    ),
    SectionLabel.DISCHARGE_DISPOSITION: (
        ['Discharge Disposition', 'Disposition'], [],
        ['home', 'services', 'extended', 'care', 'rehab', 'skilled', 'facility', 'hospice',
         'expired', 'vna', 'with', 'service', 'discharged', 'transfer', 'acute', 'long',
         'term', 'short', 'stay', 'assisted', 'living', 'snf', 'self'],
    ),
    SectionLabel.FACILITY: (
        ['Facility', 'Discharge Facility'], [],
        ['center', 'rehabilitation', 'nursing', 'manor', 'hospital', 'house', 'senior',
         'healthcare', 'village', 'campus', 'extended', 'unit', 'north', 'south', 'east',
         'west', 'point', 'hill', 'park', 'garden', 'harbor', 'lake', 'county', 'regional'],
    ),
    SectionLabel.DISCHARGE_DIAGNOSIS: (
        ['Discharge Diagnosis', 'Diagnosis', 'Primary Discharge Diagnosis'],
        ['PRIMARY', 'SECONDARY'],
        ['congestive', 'heart', 'failure', 'exacerbation', 'community', 'acquired',
         'pneumonia', 'urinary', 'tract', 'infection', 'acute', 'kidney', 'injury',
         'gastrointestinal', 'bleed', 'nstemi', 'stemi', 'cellulitis', 'pancreatitis',
         'delirium', 'hyponatremia', 'diverticulitis', 'pulmonary', 'embolism', 'deep',
         'vein', 'thrombosis', 'encephalopathy'],
    ),
    SectionLabel.DISCHARGE_CONDITION: (
        ['Discharge Condition', 'Condition'], [],
        ['mental', 'status', 'clear', 'coherent', 'level', 'consciousness', 'alert',
         'interactive', 'activity', 'ambulatory', 'independent', 'requires', 'assistance',
         'aid', 'device', 'bed', 'chair', 'stable', 'good', 'fair', 'hemodynamically',
         'improved', 'confused', 'sometimes'],
    ),
    SectionLabel.DISCHARGE_INSTRUCTION: (
        ['Discharge Instruction', 'Discharge Instructions'], ['ACTIVITY', 'DIET'],
        ['you', 'were', 'admitted', 'your', 'please', 'take', 'call', 'doctor', 'return',
         'worsening', 'weigh', 'yourself', 'every', 'morning', 'pounds', 'avoid', 'lifting',
         'heavy', 'objects', 'driving', 'shower', 'incision', 'keep', 'clean', 'dry',
         'pleasure', 'caring', 'low', 'salt', 'diet', 'fluid', 'restriction'],
    ),
    SectionLabel.FOLLOW_UP_INSTRUCTION: (
        ['Follow-up Instruction', 'Follow-up Instructions', 'FOLLOW UP'], [],
        ['appointment', 'scheduled', 'clinic', 'provider', 'phone', 'building', 'floor',
         'campus', 'department', 'when', 'with', 'primary', 'care', 'cardiologist',
         'weeks', 'within', 'week', 'arrange', 'labs', 'draw', 'office', 'will', 'contact',
         'schedule', 'visit', 'specialist', 'location'],
    ),
}

_TEMPLATES: Dict[SectionLabel, List[str]] = {
    SectionLabel.ADMISSION_DATE: ['[**{date}**]'],
    SectionLabel.DISCHARGE_DATE: ['[**{date}**]'],
    SectionLabel.DATE_OF_BIRTH: ['[**{date}**]'],
    SectionLabel.SEX: ['Female', 'Male'],
    SectionLabel.SERVICE: ['Medicine', 'Surgery', 'Cardiothoracic', 'Neurology',
                           'Orthopaedics', 'Cardiology', 'Neurosurgery'],
    SectionLabel.ALLERGIES: [
        'Patient recorded as having No Known Allergies to Drugs',
        'Penicillins / Sulfa (Sulfonamide Antibiotics)',
        'Codeine / Morphine',
        'Iodine; Iodine Containing / Lisinopril',
        'Aspirin / Shellfish Derived',
    ],
    SectionLabel.ATTENDING: [
        '[**First Name3 (LF) {n}**] [**Last Name (NamePattern1) {n}**], MD',
        '[**Doctor First Name {n}**] [**Doctor Last Name {n}**], M.D.',
        '[**Name6 (MD) {n}**] [**Name8 (MD) {n}**], MD',
    ],
}

_SHAPE: Dict[SectionLabel, dict] = {
    SectionLabel.CHIEF_COMPLAINT: dict(presence=0.95, sentences=(1, 2), words=(2, 6)),
    SectionLabel.MAJOR_PROCEDURE: dict(presence=0.7, sentences=(1, 3), words=(3, 8), masks=0.1),
    SectionLabel.HISTORY_OF_PRESENT_ILLNESS: dict(presence=0.95, sentences=(3, 12), words=(6, 18),
                                                  numeric=0.15, masks=0.1),
    SectionLabel.REVIEW_OF_SYSTEM: dict(presence=0.4, sentences=(1, 4), words=(4, 12)),
    SectionLabel.PAST_MEDICAL_HISTORY: dict(presence=0.9, sentences=(2, 8), words=(2, 8)),
    SectionLabel.SOCIAL_HISTORY: dict(presence=0.85, sentences=(1, 4), words=(4, 12), numeric=0.1),
    SectionLabel.FAMILY_HISTORY: dict(presence=0.8, sentences=(1, 3), words=(3, 10), numeric=0.1),
    SectionLabel.PHYSICAL_EXAM: dict(presence=0.95, sentences=(4, 14), words=(4, 14),
                                     numeric=0.35, tabular=0.05),
    SectionLabel.PERTINENT_RESULT: dict(presence=0.9, sentences=(3, 14), words=(5, 16),
                                        numeric=0.8, masks=0.2, tabular=0.15),
    SectionLabel.HOSPITAL_COURSE: dict(presence=0.95, sentences=(4, 25), words=(6, 20),
                                       numeric=0.15, masks=0.1),
    SectionLabel.MEDICATION_ON_ADMISSION: dict(presence=0.85, sentences=(2, 12), words=(3, 9),
                                               numeric=0.9, tabular=0.05),
    SectionLabel.DISCHARGE_MEDICATIONS: dict(presence=0.9, sentences=(2, 15), words=(3, 12),
                                             numeric=0.9, tabular=0.05),
    SectionLabel.DISCHARGE_DISPOSITION: dict(presence=0.9, sentences=(1, 1), words=(1, 4)),
    SectionLabel.FACILITY: dict(presence=0.3, sentences=(1, 1), words=(2, 4), masks=0.5),
    SectionLabel.DISCHARGE_DIAGNOSIS: dict(presence=0.9, sentences=(1, 5), words=(2, 6)),
    SectionLabel.DISCHARGE_CONDITION: dict(presence=0.85, sentences=(1, 3), words=(3, 8)),
    SectionLabel.DISCHARGE_INSTRUCTION: dict(presence=0.85, sentences=(2, 10), words=(6, 18)),
    SectionLabel.FOLLOW_UP_INSTRUCTION: dict(presence=0.85, sentences=(1, 4), words=(5, 14),
                                             masks=0.4, numeric=0.2),
}

_TEMPLATE_PRESENCE = {
    SectionLabel.ADMISSION_DATE: 1.0,
    SectionLabel.DISCHARGE_DATE: 0.95,
    SectionLabel.DATE_OF_BIRTH: 0.9,
    SectionLabel.SEX: 1.0,
    SectionLabel.SERVICE: 1.0,
    SectionLabel.ALLERGIES: 0.9,
    SectionLabel.ATTENDING: 0.9,
}


def default_grammar() -> SectionGrammar:
    """
    Built-in grammar covering all 25 sections.

    Aliases that do not resolve the way their position requires are dropped
    with a warning.
    """
    sections = []
    for label in LABELS:
        headings, subheadings, pool = _SECTION_TEXT[label]
        if label in _TEMPLATES:
            spec = SectionSpec(
                label=label,
                presence=_TEMPLATE_PRESENCE[label],
                headings=list(headings),
                templates=list(_TEMPLATES[label]),
                sentences=(1, 1),
            )
        else:
            spec = SectionSpec(label=label, headings=list(headings), subheadings=list(subheadings),
                               pool=list(pool), **_SHAPE[label])
        spec.mandatory = label in MANDATORY
        sections.append(spec)

    grammar = SectionGrammar(sections=sections, common_words=list(COMMON_WORDS))
    return validate_grammar(grammar, strict=False)


def _alias_problems(spec: SectionSpec) -> Tuple[List[str], List[str]]:
    bad_headings = [
        h for h in spec.headings
        if not is_heading_line(h + ':') or match_heading(h) is not spec.label
    ]
    bad_subheadings = [
        h for h in spec.subheadings
        if not is_heading_line(h) or match_heading(h) is not None
    ]
    return bad_headings, bad_subheadings


def validate_grammar(grammar: SectionGrammar, strict: bool = True) -> SectionGrammar:
    """
    Check a grammar and return the usable form of it.

    Every heading alias must match its own label and every
    sub-heading must resolve to nothing. With strict=False offending aliases
    are dropped with a warning; otherwise they raise.

    Raises:
        GrammarError: invalid probabilities, ranges, ordering, missing
            headings or (strict) unresolvable aliases
    """
    if not grammar.sections:
        raise GrammarError("Grammar defines no sections")
    if not grammar.common_words:
        raise GrammarError("Grammar needs a non-empty common word pool")
    for name in ('common_rate', 'subheading_rate', 'alias_rate', 'preamble_rate'):
        value = getattr(grammar, name)
        if not 0.0 <= value <= 1.0:
            raise GrammarError(f"{name} must be in [0, 1] (got {value})")

    indices = [spec.label.index for spec in grammar.sections]
    if len(set(indices)) != len(indices):
        raise GrammarError("Grammar lists a section label more than once")
    if indices != sorted(indices):
        raise GrammarError("Grammar sections must follow the canonical clinical order")
    for label in MANDATORY:
        if grammar.section(label) is None:
            raise GrammarError(f"Mandatory section '{label.canonical}' is missing from the grammar")

    sections = []
    for spec in grammar.sections:
        name = spec.label.canonical
        for prob_name in ('presence', 'numeric', 'masks', 'tabular'):
            value = getattr(spec, prob_name)
            if not 0.0 <= value <= 1.0:
                raise GrammarError(f"[{name}] {prob_name} must be in [0, 1] (got {value})")
        for range_name in ('sentences', 'words'):
            low, high = getattr(spec, range_name)
            if low < 1 or high < low:
                raise GrammarError(f"[{name}] {range_name} range {low}-{high} is invalid")
        if not spec.pool and not spec.templates:
            raise GrammarError(f"[{name}] needs a word pool or templates")

        bad_headings, bad_subheadings = _alias_problems(spec)
        if bad_headings or bad_subheadings:
            message = (f"[{name}] headings not resolving to the section: {bad_headings}; "
                       f"sub-headings resolving to a section: {bad_subheadings}")
            if strict:
                raise GrammarError(message)
            logger.warning(f"Dropping grammar aliases. {message}")
            spec = replace(
                spec,
                headings=[h for h in spec.headings if h not in bad_headings],
                subheadings=[h for h in spec.subheadings if h not in bad_subheadings],
            )
        if not spec.headings:
            raise GrammarError(f"[{name}] has no heading that resolves to the section")
        sections.append(spec)

    return replace(grammar, sections=sections)


def _split_list(value: str) -> List[str]:
    return [item.strip() for item in value.replace('\n', ',').split(',') if item.strip()]


def _parse_range(value: str, key: str) -> Tuple[int, int]:
    try:
        if '-' in value:
            low, high = value.split('-', 1)
            return int(low), int(high)
        return int(value), int(value)
    except ValueError as e:
        raise GrammarError(f"{key}: expected 'low-high', got {value!r}") from e


def load_grammar(path) -> SectionGrammar:
    """
    Load and strictly validate a grammar file.

    Raises:
        GrammarError: unreadable file, unknown section or key, bad values
    """
    parser = configparser.ConfigParser(interpolation=None)
    try:
        with open(path, 'r', encoding='utf-8') as f:
            parser.read_file(f)
    except (OSError, configparser.Error) as e:
        raise GrammarError(f"Cannot read grammar {path}: {e}") from e

    try:
        general = parser['grammar'] if parser.has_section('grammar') else {}
        common_words = _split_list(general.get('common_words', ', '.join(COMMON_WORDS)))
        options = {
            key: float(general[key])
            for key in ('common_rate', 'subheading_rate', 'alias_rate', 'preamble_rate')
            if key in general
        }

        sections = []
        for name in parser.sections():
            if name == 'grammar':
                continue
            try:
                label = SectionLabel.parse(name)
            except ValueError as e:
                raise GrammarError(f"{path}: unknown section [{name}]") from e
            values = parser[name]
            known = {'presence', 'mandatory', 'headings', 'subheadings', 'pool', 'templates',
                     'sentences', 'words', 'numeric', 'masks', 'tabular'}
            unknown = set(values) - known
            if unknown:
                raise GrammarError(f"{path}: [{name}] has unknown key(s) {sorted(unknown)}")

            sections.append(SectionSpec(
                label=label,
                presence=float(values.get('presence', 0.8)),
                mandatory=values.getboolean('mandatory', fallback=label in MANDATORY),
                headings=_split_list(values.get('headings', label.canonical.title())),
                subheadings=_split_list(values.get('subheadings', '')),
                pool=_split_list(values.get('pool', '')),
                templates=[t.strip() for t in values.get('templates', '').split('\n') if t.strip()],
                sentences=_parse_range(values.get('sentences', '1-4'), f"[{name}] sentences"),
                words=_parse_range(values.get('words', '4-12'), f"[{name}] words"),
                numeric=float(values.get('numeric', 0.0)),
                masks=float(values.get('masks', 0.0)),
                tabular=float(values.get('tabular', 0.0)),
            ))
    except ValueError as e:
        raise GrammarError(f"{path}: invalid value: {e}") from e

    sections.sort(key=lambda spec: spec.label.index)
    grammar = SectionGrammar(sections=sections, common_words=common_words, **options)
    logger.info(f"Loaded grammar with {len(sections)} section(s) from {path}")
    return validate_grammar(grammar, strict=True)


def _body_line(line: str) -> str:
    # a short all-caps body line such as "A." would be taken for a heading
    if is_heading_line(line):
        line = line.lower().rstrip(':')
    return line


class NoteWriter:
    """Renders one synthetic note from a grammar and a seeded generator."""

    def __init__(self, grammar: SectionGrammar, rng: np.random.Generator):
        self.grammar = grammar
        self.rng = rng

    def pick(self, items: Sequence[str]) -> str:
        return items[int(self.rng.integers(len(items)))]

    def chance(self, probability: float) -> bool:
        return bool(self.rng.random() < probability)

    def between(self, bounds: Tuple[int, int]) -> int:
        return int(self.rng.integers(bounds[0], bounds[1] + 1))

    def number(self) -> str:
        if self.chance(0.3):
            return f"{int(self.rng.integers(0, 200))}.{int(self.rng.integers(0, 10))}"
        return str(int(self.rng.integers(0, 500)))

    def mask(self) -> str:
        body = self.pick(MASK_BODIES).format(
            year=int(self.rng.integers(2100, 2200)),
            month=int(self.rng.integers(1, 13)),
            day=int(self.rng.integers(1, 29)),
            n=int(self.rng.integers(1, 10000)),
        )
        return f"[**{body}**]"

    def date_mask(self) -> str:
        return (f"{int(self.rng.integers(2100, 2200))}-{int(self.rng.integers(1, 13))}-"
                f"{int(self.rng.integers(1, 29))}")

    def heading(self, text: str) -> str:
        roll = self.rng.random()
        if roll < 0.6:
            return f"{text}:"
        if roll < 0.85:
            return f"{text.upper()}:"
        return text.upper()

    def template_line(self, spec: SectionSpec) -> str:
        template = self.pick(spec.templates)
        return template.format(date=self.date_mask(), n=int(self.rng.integers(1, 10000)))

    def words(self, spec: SectionSpec, count: int) -> List[str]:
        return [
            self.pick(self.grammar.common_words) if self.chance(self.grammar.common_rate) else self.pick(spec.pool)
            for _ in range(count)
        ]

    def sentence(self, spec: SectionSpec) -> str:
        words = self.words(spec, self.between(spec.words))
        if self.chance(spec.numeric):
            at = int(self.rng.integers(0, len(words) + 1))
            words[at:at] = [self.number(), self.pick(UNIT_WORDS)]
        if self.chance(spec.masks):
            at = int(self.rng.integers(0, len(words) + 1))
            words.insert(at, self.mask())
        words[0] = words[0][:1].upper() + words[0][1:]
        return ' '.join(words) + '.'

    def tabular_line(self, spec: SectionSpec) -> str:
        cells = [f"{self.pick(spec.pool)}-{self.number()}" for _ in range(self.between((40, 120)))]
        return ' '.join(cells)

    def content_lines(self, spec: SectionSpec, count: int) -> List[str]:
        """Body lines of a section; none of them may read as a heading line."""
        if spec.templates:
            return [_body_line(self.template_line(spec)) for _ in range(count)]
        lines = []
        remaining = count
        while remaining > 0:
            per_line = min(remaining, self.between((1, 3)))
            lines.append(_body_line(' '.join(self.sentence(spec) for _ in range(per_line))))
            remaining -= per_line
        if self.chance(spec.tabular):
            lines.insert(int(self.rng.integers(0, len(lines) + 1)), self.tabular_line(spec))
        return lines

    def section_lines(self, spec: SectionSpec) -> List[str]:
        if self.chance(self.grammar.alias_rate) and len(spec.headings) > 1:
            title = self.pick(spec.headings[1:])
        else:
            title = spec.headings[0]
        lines = [self.heading(title)]

        count = self.between(spec.sentences)
        if spec.subheadings and count >= 2 and self.chance(self.grammar.subheading_rate):
            split = int(self.rng.integers(1, count))
            lines.extend(self.content_lines(spec, split))
            lines.append(self.heading(self.pick(spec.subheadings)))
            lines.extend(self.content_lines(spec, count - split))
        else:
            lines.extend(self.content_lines(spec, count))
        return lines

    def note_text(self) -> str:
        lines = []
        if self.chance(self.grammar.preamble_rate):
            lines.append(f"{self.mask()} discharge summary signed electronically")
        for spec in self.grammar.sections:
            if spec.mandatory or self.chance(spec.presence):
                lines.extend(self.section_lines(spec))
                if self.chance(0.3):
                    lines.append('')
        return '\n'.join(lines) + '\n'


def generate_synthetic_note(grammar: SectionGrammar, seed: int, note_id: Optional[str] = None) -> RawNote:
    """
    Generate one note; the same grammar and seed always give the same note.

    Sections appear in grammar order, each independently with its presence
    probability; mandatory sections always appear.
    """
    writer = NoteWriter(grammar, np.random.default_rng(seed))
    return RawNote(note_id=note_id or f"synth-{seed}", text=writer.note_text())


def generate_synthetic_notes(grammar: SectionGrammar, count: int, seed: int) -> List[RawNote]:
    """Generate ``count`` notes with per-note seeds drawn from ``seed``."""
    if count <= 0:
        return []
    note_seeds = np.random.default_rng(seed).integers(0, 2 ** 31 - 1, size=count)
    return [
        generate_synthetic_note(grammar, int(note_seed), note_id=f"synth-{seed}-{i:06d}")
        for i, note_seed in enumerate(note_seeds)
    ]
