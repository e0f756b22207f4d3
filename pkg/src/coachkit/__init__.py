"""Call-coaching toolkit: classify calls as coachable per QA question and
recommend calls to reviewers under guardrails (question whitelist, per-agent
caps, label hiding)."""

__version__ = "0.1.0"

from coachkit.corpus import (
    Corpus,
    Label,
    LabeledPair,
    QuestionSpec,
    QuestionType,
    ScorecardGrade,
    Transcript,
    Utterance,
)

__all__ = [
    "Corpus",
    "Label",
    "LabeledPair",
    "QuestionSpec",
    "QuestionType",
    "ScorecardGrade",
    "Transcript",
    "Utterance",
]
