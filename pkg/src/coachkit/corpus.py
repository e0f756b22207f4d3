"""Call corpus: transcripts, QA questions, scorecard grades and labels.

Raw call records arrive as one JSON object per line (``kind`` field selects
transcript vs grade); questions live in a separate JSON array file.  This
module validates records, redacts PII from utterance text, derives the
coachable / not-coachable label from scorecard grades (grade below half the
maximum score means coachable) and audits the question taxonomy.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field, replace
from enum import Enum, IntEnum
from pathlib import Path
from typing import Iterable, Mapping


class CorpusError(Exception):
    """Base class for corpus validation failures."""


class MissingField(CorpusError):
    """A required field is absent or malformed in a raw record."""


class EmptyConversation(CorpusError):
    """A call record carries no usable utterances."""


class InvalidPattern(CorpusError):
    """A PII pattern failed to compile."""


class Label(IntEnum):
    """Class order is fixed as [NOT_COACHABLE, COACHABLE] everywhere:
    index 0 is the conservative default on ties."""

    NOT_COACHABLE = 0
    COACHABLE = 1

    def to_json(self) -> str:
        return "coachable" if self is Label.COACHABLE else "not_coachable"

    @classmethod
    def from_json(cls, value: str) -> "Label":
        if value == "coachable":
            return cls.COACHABLE
        if value == "not_coachable":
            return cls.NOT_COACHABLE
        raise MissingField(f"unknown label value: {value!r}")


class QuestionType(Enum):
    """The eleven QA question categories."""

    ACCOUNT_VERIFICATION = "Account Verification"
    ADDRESSING_CUSTOMER = "Addressing Customer"
    BEHAVIORAL = "Behavioral"
    CLOSING = "Closing"
    PROVIDING_COMPLETE_INFORMATION = "Providing Complete Information"
    CUSTOMER_IDENTIFICATION = "Customer Identification"
    CUSTOMER_SATISFACTION = "Customer Satisfaction"
    GREETING = "Greeting"
    INFORMATION_COLLECTION = "Information Collection"
    ISSUE_IDENTIFICATION = "Issue Identification"
    ISSUE_RESOLUTION = "Issue Resolution"


QUESTION_TYPE_NAMES = frozenset(t.value for t in QuestionType)

SPEAKERS = ("agent", "customer")


@dataclass(frozen=True)
class Utterance:
    speaker: str  # "agent" | "customer"
    text: str


@dataclass(frozen=True)
class Transcript:
    """One call: ordered speaker-tagged utterances plus call metadata.

    ``word_count`` is derived: the total whitespace-delimited token count
    over all utterance texts.
    """

    call_id: str
    agent_id: str
    utterances: tuple[Utterance, ...]
    timestamp: str = ""
    word_count: int = field(init=False, default=0)

    def __post_init__(self) -> None:
        count = sum(len(u.text.split()) for u in self.utterances)
        object.__setattr__(self, "word_count", count)

    def text(self) -> str:
        """All utterance texts joined with single spaces."""
        return " ".join(u.text for u in self.utterances)

    def to_record(self) -> dict:
        return {
            "kind": "transcript",
            "call_id": self.call_id,
            "agent_id": self.agent_id,
            "utterances": [{"speaker": u.speaker, "text": u.text} for u in self.utterances],
            "timestamp": self.timestamp,
        }


@dataclass(frozen=True)
class QuestionSpec:
    question_id: str
    text: str
    question_type: QuestionType
    whitelisted: bool = True

    def to_record(self) -> dict:
        return {
            "question_id": self.question_id,
            "text": self.text,
            "question_type": self.question_type.value,
            "whitelisted": self.whitelisted,
        }


@dataclass(frozen=True)
class ScorecardGrade:
    call_id: str
    question_id: str
    score: float
    max_score: float
    grader_id: str
    timestamp: str = ""  # optional; regrades keep the latest

    def __post_init__(self) -> None:
        if self.max_score <= 0:
            raise MissingField(f"max_score must be positive, got {self.max_score}")
        if not 0 <= self.score <= self.max_score:
            raise MissingField(
                f"score {self.score} outside [0, {self.max_score}] for call {self.call_id}"
            )

    def to_record(self) -> dict:
        rec = {
            "kind": "grade",
            "call_id": self.call_id,
            "question_id": self.question_id,
            "score": self.score,
            "max_score": self.max_score,
            "grader_id": self.grader_id,
        }
        if self.timestamp:
            rec["timestamp"] = self.timestamp
        return rec


@dataclass(frozen=True)
class LabeledPair:
    """The atomic training/eval unit: one (question, call) with its label."""

    question_id: str
    call_id: str
    label: Label

    @property
    def key(self) -> tuple[str, str]:
        return (self.question_id, self.call_id)


# ---------------------------------------------------------------------------
# PII redaction
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PiiPattern:
    name: str
    regex: str
    tag: str

    def compile(self) -> re.Pattern:
        try:
            return re.compile(self.regex)
        except re.error as exc:
            raise InvalidPattern(f"pattern {self.name!r}: {exc}") from exc


# Credit cards first so phone patterns never eat a card fragment.
DEFAULT_PII_PATTERNS = (
    PiiPattern(
        name="credit_card",
        regex=r"\b(?:\d[ -]?){12,18}\d\b",
        tag="[REDACTED_CC]",
    ),
    PiiPattern(
        name="phone",
        regex=r"(?:\(\d{3}\)\s?|\b\d{3}[-. ])?\b\d{3}[-.]\d{4}\b",
        tag="[REDACTED_PHONE]",
    ),
    PiiPattern(
        name="email",
        regex=r"\b[\w.+-]+@[\w-]+\.[\w.-]+\b",
        tag="[REDACTED_EMAIL]",
    ),
)


def redact_pii(text: str, patterns: Iterable[PiiPattern] = DEFAULT_PII_PATTERNS) -> str:
    """Replace every maximal match of each pattern with its tag.

    Idempotent because the replacement tags contain nothing the default
    patterns can match; custom patterns should preserve that property.
    """
    out = text
    for pattern in patterns:
        out = pattern.compile().sub(pattern.tag, out)
    return out


def redact_transcript(
    transcript: Transcript, patterns: Iterable[PiiPattern] = DEFAULT_PII_PATTERNS
) -> Transcript:
    """Return a copy of the transcript with every utterance redacted."""
    patterns = tuple(patterns)
    utts = tuple(
        Utterance(speaker=u.speaker, text=redact_pii(u.text, patterns))
        for u in transcript.utterances
    )
    return replace(transcript, utterances=utts)


# ---------------------------------------------------------------------------
# Ingestion
# ---------------------------------------------------------------------------


def ingest_transcript(record: Mapping) -> Transcript:
    """Validate one raw call record into a Transcript.

    Redaction is NOT applied here; run :func:`redact_transcript` before the
    transcript is persisted.  Utterances whose text is empty after trimming
    are dropped (ASR artifacts); if none survive the record is rejected.
    """
    for key in ("call_id", "agent_id"):
        value = record.get(key)
        if not isinstance(value, str) or not value:
            raise MissingField(f"transcript record missing {key!r}")
    raw_utts = record.get("utterances")
    if raw_utts is None:
        raise MissingField("transcript record missing 'utterances'")
    utterances = []
    for raw in raw_utts:
        speaker = raw.get("speaker") if isinstance(raw, Mapping) else None
        text = raw.get("text") if isinstance(raw, Mapping) else None
        if speaker not in SPEAKERS:
            raise MissingField(f"utterance speaker must be one of {SPEAKERS}, got {speaker!r}")
        if not isinstance(text, str):
            raise MissingField("utterance missing 'text'")
        text = text.strip()
        if text:
            utterances.append(Utterance(speaker=speaker, text=text))
    if not utterances:
        raise EmptyConversation(f"call {record.get('call_id')!r} has no usable utterances")
    timestamp = record.get("timestamp", "")
    if not isinstance(timestamp, str):
        raise MissingField("transcript 'timestamp' must be a string")
    return Transcript(
        call_id=record["call_id"],
        agent_id=record["agent_id"],
        utterances=tuple(utterances),
        timestamp=timestamp,
    )


def ingest_grade(record: Mapping) -> ScorecardGrade:
    """Validate one raw grade record."""
    for key in ("call_id", "question_id", "grader_id"):
        value = record.get(key)
        if not isinstance(value, str) or not value:
            raise MissingField(f"grade record missing {key!r}")
    for key in ("score", "max_score"):
        if not isinstance(record.get(key), (int, float)):
            raise MissingField(f"grade record missing numeric {key!r}")
    timestamp = record.get("timestamp", "")
    if not isinstance(timestamp, str):
        raise MissingField("grade 'timestamp' must be a string")
    return ScorecardGrade(
        call_id=record["call_id"],
        question_id=record["question_id"],
        score=float(record["score"]),
        max_score=float(record["max_score"]),
        grader_id=record["grader_id"],
        timestamp=timestamp,
    )


# ---------------------------------------------------------------------------
# Labels
# ---------------------------------------------------------------------------


def derive_label(grade: ScorecardGrade) -> LabeledPair:
    """A call is coachable for a question iff it scored strictly below half
    the maximum; exactly half is not coachable."""
    coachable = grade.score / grade.max_score < 0.5
    return LabeledPair(
        question_id=grade.question_id,
        call_id=grade.call_id,
        label=Label.COACHABLE if coachable else Label.NOT_COACHABLE,
    )


def derive_labels(grades: Iterable[ScorecardGrade]) -> list[LabeledPair]:
    """One LabeledPair per (question, call); regrades keep the latest grade.

    "Latest" is by grade timestamp when timestamps are present, otherwise by
    input order (a later record wins).  Output order follows the first
    occurrence of each (question, call) key.
    """
    chosen: dict[tuple[str, str], tuple[int, ScorecardGrade]] = {}
    order: list[tuple[str, str]] = []
    for idx, grade in enumerate(grades):
        key = (grade.question_id, grade.call_id)
        if key not in chosen:
            chosen[key] = (idx, grade)
            order.append(key)
        else:
            _, current = chosen[key]
            if (grade.timestamp, idx) >= (current.timestamp, chosen[key][0]):
                chosen[key] = (idx, grade)
    return [derive_label(chosen[key][1]) for key in order]


# ---------------------------------------------------------------------------
# Taxonomy validation
# ---------------------------------------------------------------------------


@dataclass
class TaxonomyReport:
    total: int
    per_type_counts: dict[str, int]
    unknown_types: list[tuple[str, str]]  # (question_id, offending type string)
    duplicate_ids: list[str]

    @property
    def ok(self) -> bool:
        return not self.unknown_types and not self.duplicate_ids

    def to_json(self) -> dict:
        return {
            "total": self.total,
            "per_type_counts": dict(sorted(self.per_type_counts.items())),
            "unknown_types": [list(t) for t in self.unknown_types],
            "duplicate_ids": self.duplicate_ids,
            "ok": self.ok,
        }


def validate_taxonomy(questions: Iterable[Mapping | QuestionSpec]) -> TaxonomyReport:
    """Report-only audit: unknown type names, duplicate ids, per-type counts.

    Accepts raw records (so misspelled types can be flagged) as well as
    already-validated QuestionSpec values.
    """
    seen: set[str] = set()
    duplicates: list[str] = []
    unknown: list[tuple[str, str]] = []
    counts: dict[str, int] = {}
    total = 0
    for q in questions:
        total += 1
        if isinstance(q, QuestionSpec):
            qid, type_name = q.question_id, q.question_type.value
        else:
            qid = str(q.get("question_id", ""))
            type_name = str(q.get("question_type", ""))
        if qid in seen:
            duplicates.append(qid)
        seen.add(qid)
        if type_name in QUESTION_TYPE_NAMES:
            counts[type_name] = counts.get(type_name, 0) + 1
        else:
            unknown.append((qid, type_name))
    return TaxonomyReport(
        total=total,
        per_type_counts=counts,
        unknown_types=unknown,
        duplicate_ids=duplicates,
    )


def parse_question(record: Mapping) -> QuestionSpec:
    for key in ("question_id", "text", "question_type"):
        if not record.get(key):
            raise MissingField(f"question record missing {key!r}")
    type_name = record["question_type"]
    try:
        qtype = QuestionType(type_name)
    except ValueError as exc:
        raise MissingField(f"unknown question_type {type_name!r}") from exc
    return QuestionSpec(
        question_id=record["question_id"],
        text=record["text"],
        question_type=qtype,
        whitelisted=bool(record.get("whitelisted", True)),
    )


# ---------------------------------------------------------------------------
# Corpus container and file I/O
# ---------------------------------------------------------------------------


@dataclass
class Corpus:
    """Immutable-after-load bag of transcripts, grades and questions."""

    transcripts: dict[str, Transcript] = field(default_factory=dict)
    grades: list[ScorecardGrade] = field(default_factory=list)
    questions: dict[str, QuestionSpec] = field(default_factory=dict)

    def add_transcript(self, t: Transcript) -> None:
        self.transcripts[t.call_id] = t

    def add_grade(self, g: ScorecardGrade) -> None:
        self.grades.append(g)

    def add_question(self, q: QuestionSpec) -> None:
        if q.question_id in self.questions:
            raise MissingField(f"duplicate question_id {q.question_id!r}")
        self.questions[q.question_id] = q

    def labeled_pairs(self) -> list[LabeledPair]:
        return derive_labels(self.grades)

    def question(self, question_id: str) -> QuestionSpec:
        try:
            return self.questions[question_id]
        except KeyError:
            raise MissingField(f"unknown question_id {question_id!r}") from None

    def transcript(self, call_id: str) -> Transcript:
        try:
            return self.transcripts[call_id]
        except KeyError:
            raise MissingField(f"unknown call_id {call_id!r}") from None


def load_corpus_file(
    path: str | Path,
    corpus: Corpus | None = None,
    patterns: Iterable[PiiPattern] | None = DEFAULT_PII_PATTERNS,
) -> Corpus:
    """Read a JSONL corpus file of transcript and grade records.

    Transcripts are redacted before they enter the corpus (raw text is never
    retained); pass ``patterns=None`` only for already-redacted files.
    """
    corpus = corpus if corpus is not None else Corpus()
    patterns = tuple(patterns) if patterns is not None else None
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise MissingField(f"{path}:{lineno}: invalid JSON: {exc}") from exc
            kind = record.get("kind")
            if kind == "transcript":
                t = ingest_transcript(record)
                if patterns is not None:
                    t = redact_transcript(t, patterns)
                corpus.add_transcript(t)
            elif kind == "grade":
                corpus.add_grade(ingest_grade(record))
            else:
                raise MissingField(f"{path}:{lineno}: unknown record kind {kind!r}")
    return corpus


def save_corpus_file(corpus: Corpus, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for call_id in sorted(corpus.transcripts):
            fh.write(json.dumps(corpus.transcripts[call_id].to_record(), sort_keys=True) + "\n")
        for grade in corpus.grades:
            fh.write(json.dumps(grade.to_record(), sort_keys=True) + "\n")


def load_questions_file(path: str | Path, corpus: Corpus | None = None) -> Corpus:
    """Read a JSON array of question records into the corpus."""
    corpus = corpus if corpus is not None else Corpus()
    with open(path, "r", encoding="utf-8") as fh:
        records = json.load(fh)
    if not isinstance(records, list):
        raise MissingField(f"{path}: question file must be a JSON array")
    for record in records:
        corpus.add_question(parse_question(record))
    return corpus


def save_questions_file(questions: Iterable[QuestionSpec], path: str | Path) -> None:
    records = [q.to_record() for q in questions]
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(records, fh, indent=2, sort_keys=True)
        fh.write("\n")
