"""Synthetic contact-center corpora with analytically known labels.

Three generators back the test suite and the demo scripts:

- marker_corpus: each transcript carries the success or failure phrase of
  its question's type, so the label is decidable from the transcript alone.
- query_corpus: each transcript carries a success phrase for one type and a
  failure phrase for another and is paired with both questions; the label is
  decidable only jointly with the question (query ablation collapses to
  chance).
- late_marker_corpus: the deciding phrase sits deep in the call (past word
  300), so models reading only a short prefix are blind to it.

Marker phrases keep their polarity-signal words out of the filler pool, the
question texts and the opposite polarity, which is what makes the labels
learnable by construction; tests assert that hygiene.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from coachkit.corpus import (
    Corpus,
    Label,
    QuestionSpec,
    QuestionType,
    ScorecardGrade,
    Transcript,
    Utterance,
)


@dataclass(frozen=True)
class MarkerPhrase:
    success: str  # present on not-coachable calls
    failure: str  # present on coachable calls

    def for_label(self, label: Label) -> str:
        return self.failure if label is Label.COACHABLE else self.success


# Each phrase shares one exact anchor token with its question text (e.g.
# "greeting", "verification") in both polarities; the polarity itself rides
# on words unique to that side.  Models can only decide by locating the
# anchor the question asks about and reading the words around it.
MARKERS: dict[QuestionType, MarkerPhrase] = {
    QuestionType.GREETING: MarkerPhrase(
        "thank you for calling solaris my name is priya a warm greeting to you",
        "the call opened with no greeting just yeah what do you want",
    ),
    QuestionType.CLOSING: MarkerPhrase(
        "that settles everything then a proper closing have a wonderful evening goodbye",
        "the call ended abruptly with no closing the line simply cut",
    ),
    QuestionType.BEHAVIORAL: MarkerPhrase(
        "i completely understand with real empathy how upsetting that must be i apologize",
        "the agent showed zero empathy and said that is your own fault",
    ),
    QuestionType.ACCOUNT_VERIFICATION: MarkerPhrase(
        "for verification can you confirm the email we keep listed on the account",
        "verification was skipped entirely no identity check was performed",
    ),
    QuestionType.ISSUE_RESOLUTION: MarkerPhrase(
        "the resolution is confirmed the fix worked and service is running normally",
        "no resolution was reached the problem stays broken and unresolved",
    ),
    QuestionType.ISSUE_IDENTIFICATION: MarkerPhrase(
        "the diagnosis is clear a firmware mismatch on the modem caused this",
        "the diagnosis failed nobody figured out what was actually wrong",
    ),
    QuestionType.CUSTOMER_SATISFACTION: MarkerPhrase(
        "the customer expressed satisfaction saying everything looks perfect thanks a bunch",
        "satisfaction was low the customer sounded furious and threatened to cancel",
    ),
    QuestionType.INFORMATION_COLLECTION: MarkerPhrase(
        "for our records a brisk collection of your serial code and purchase date",
        "no collection of information happened the agent never asked for anything",
    ),
    QuestionType.ADDRESSING_CUSTOMER: MarkerPhrase(
        "happy to address you by name mr alvarez through the whole call",
        "hey buddy listen the agent kept ignoring the caller name",
    ),
    QuestionType.PROVIDING_COMPLETE_INFORMATION: MarkerPhrase(
        "the plan covers the full payment terms breakdown taxes fees and renewal dates",
        "the terms were glossed over with several details missing entirely",
    ),
    QuestionType.CUSTOMER_IDENTIFICATION: MarkerPhrase(
        "we confirmed who was on the account after security questions were answered correctly",
        "the agent changed the plan without asking who was on the phone",
    ),
}

QUESTION_TEXTS: dict[QuestionType, str] = {
    QuestionType.GREETING: "did the agent open the call with a proper greeting",
    QuestionType.CLOSING: "did the agent deliver a proper closing before ending the call",
    QuestionType.BEHAVIORAL: "did the agent show proper empathy statements toward the customer",
    QuestionType.ACCOUNT_VERIFICATION: "did the agent complete verification of the customer account",
    QuestionType.ISSUE_RESOLUTION: "did the agent reach a working resolution for the customer issue",
    QuestionType.ISSUE_IDENTIFICATION: "did the agent form a correct diagnosis of the customer issue",
    QuestionType.CUSTOMER_SATISFACTION: "did the customer express satisfaction by the end of the call",
    QuestionType.INFORMATION_COLLECTION: "did the agent run a full collection of the required information",
    QuestionType.ADDRESSING_CUSTOMER: "did the agent use the customer name appropriately during the call",
    QuestionType.PROVIDING_COMPLETE_INFORMATION: "did the agent mention the payment terms in detail",
    QuestionType.CUSTOMER_IDENTIFICATION: "did the agent confirm who the customer was before account changes",
}

# Canonical order used when a generator asks for the first n types.
TYPE_ORDER = (
    QuestionType.GREETING,
    QuestionType.CLOSING,
    QuestionType.BEHAVIORAL,
    QuestionType.ACCOUNT_VERIFICATION,
    QuestionType.ISSUE_RESOLUTION,
    QuestionType.ISSUE_IDENTIFICATION,
    QuestionType.CUSTOMER_SATISFACTION,
    QuestionType.INFORMATION_COLLECTION,
    QuestionType.ADDRESSING_CUSTOMER,
    QuestionType.PROVIDING_COMPLETE_INFORMATION,
    QuestionType.CUSTOMER_IDENTIFICATION,
)

AGENT_FILLER = (
    "let me take a look at that for you",
    "one moment please while the screen loads",
    "i see okay give me a second here",
    "could you hold on briefly",
    "the system is a bit slow this afternoon",
    "alright i am back with you",
    "can you hear me alright",
    "right i follow you",
    "let me pull up that page",
    "our network had some delays earlier",
    "so where were we",
    "bear with me while this updates",
    "okay the page finally loaded",
    "sure i can stay with you here",
    "the progress bar is at ninety percent",
    "we appreciate your patience",
)

CUSTOMER_FILLER = (
    "okay sounds good",
    "sure go ahead",
    "yes i am still here",
    "alright take your time",
    "hmm okay then",
    "i tried restarting it twice yesterday",
    "the light on the box keeps blinking",
    "it ran fine last week",
    "my neighbor has the same setup",
    "i am on my cell right now",
    "this has been going on since monday",
    "give me one second to write that down",
    "the tv upstairs acts up as well",
)

PII_LINES = (
    "you can reach me at 555-0142 after lunch",
    "my card is 4111 1111 1111 1111 if that helps",
    "just email me at sam.doe@example.com instead",
)

_AGENT_POOL_SIZE = 12


def question_specs(
    n_types: int | None = None, non_whitelisted: tuple[QuestionType, ...] = ()
) -> list[QuestionSpec]:
    """One question per type, ids ``q-<enum-name-lowercase>``."""
    types = TYPE_ORDER if n_types is None else TYPE_ORDER[:n_types]
    return [
        QuestionSpec(
            question_id=f"q-{t.name.lower().replace('_', '-')}",
            text=QUESTION_TEXTS[t],
            question_type=t,
            whitelisted=t not in non_whitelisted,
        )
        for t in types
    ]


def _grade_for(rng: np.random.Generator, label: Label) -> tuple[float, float]:
    if label is Label.COACHABLE:
        return float(rng.integers(0, 50)), 100.0
    return float(rng.integers(50, 101)), 100.0


def _timestamp(i: int) -> str:
    day, hour = divmod(i, 24)
    month, dom = divmod(day % 360, 30)
    return f"2025-{month + 1:02d}-{dom + 1:02d}T{hour:02d}:00:00Z"


def _filler_sentences(rng: np.random.Generator, n_words: int, add_pii: bool) -> list[str]:
    sentences: list[str] = []
    total = 0
    while total < n_words:
        if add_pii and rng.random() < 0.03:
            line = PII_LINES[int(rng.integers(0, len(PII_LINES)))]
        elif len(sentences) % 2 == 0:
            line = AGENT_FILLER[int(rng.integers(0, len(AGENT_FILLER)))]
        else:
            line = CUSTOMER_FILLER[int(rng.integers(0, len(CUSTOMER_FILLER)))]
        sentences.append(line)
        total += len(line.split())
    return sentences


def _build_transcript(
    call_id: str,
    agent_id: str,
    timestamp: str,
    rng: np.random.Generator,
    filler_words: tuple[int, int],
    marker_lines: list[str],
    add_pii: bool = False,
) -> Transcript:
    n_words = int(rng.integers(filler_words[0], filler_words[1] + 1))
    lines = _filler_sentences(rng, n_words, add_pii)
    for marker in marker_lines:
        pos = int(rng.integers(0, len(lines) + 1))
        lines.insert(pos, marker)
    utterances = tuple(
        Utterance(speaker="agent" if i % 2 == 0 else "customer", text=line)
        for i, line in enumerate(lines)
    )
    return Transcript(call_id=call_id, agent_id=agent_id, utterances=utterances, timestamp=timestamp)


def marker_corpus(
    n_pairs: int = 2000,
    n_types: int = 8,
    seed: int = 0,
    filler_words: tuple[int, int] = (50, 90),
    add_pii: bool = False,
    non_whitelisted: tuple[QuestionType, ...] = (),
) -> Corpus:
    """Label decidable from the transcript: the question-type marker phrase
    appears in its success form on not-coachable calls and its failure form
    on coachable calls."""
    rng = np.random.default_rng(seed)
    corpus = Corpus()
    questions = question_specs(n_types, non_whitelisted=non_whitelisted)
    for q in questions:
        corpus.add_question(q)
    for i in range(n_pairs):
        q = questions[i % len(questions)]
        label = Label.COACHABLE if rng.random() < 0.5 else Label.NOT_COACHABLE
        call_id = f"call-{i:05d}"
        agent_id = f"agent-{int(rng.integers(0, _AGENT_POOL_SIZE)):03d}"
        marker = MARKERS[q.question_type].for_label(label)
        transcript = _build_transcript(
            call_id, agent_id, _timestamp(i), rng, filler_words, [marker], add_pii
        )
        corpus.add_transcript(transcript)
        score, max_score = _grade_for(rng, label)
        corpus.add_grade(
            ScorecardGrade(
                call_id=call_id,
                question_id=q.question_id,
                score=score,
                max_score=max_score,
                grader_id=f"manager-{int(rng.integers(0, 4)):02d}",
                timestamp=_timestamp(i),
            )
        )
    return corpus


def query_corpus(
    n_transcripts: int = 600,
    n_types: int = 8,
    seed: int = 0,
    filler_words: tuple[int, int] = (25, 55),
) -> Corpus:
    """Each transcript succeeds on one question type and fails on another
    and is graded on both, so the same call is not coachable under the first
    question and coachable under the second; stripping the query makes the
    label unrecoverable."""
    rng = np.random.default_rng(seed)
    corpus = Corpus()
    questions = question_specs(n_types)
    for q in questions:
        corpus.add_question(q)
    by_type = {q.question_type: q for q in questions}
    types = TYPE_ORDER[:n_types]
    for i in range(n_transcripts):
        t_pass, t_fail = rng.choice(len(types), size=2, replace=False)
        type_pass, type_fail = types[int(t_pass)], types[int(t_fail)]
        call_id = f"call-{i:05d}"
        agent_id = f"agent-{int(rng.integers(0, _AGENT_POOL_SIZE)):03d}"
        markers = [MARKERS[type_pass].success, MARKERS[type_fail].failure]
        transcript = _build_transcript(
            call_id, agent_id, _timestamp(i), rng, filler_words, markers
        )
        corpus.add_transcript(transcript)
        for qtype, label in ((type_pass, Label.NOT_COACHABLE), (type_fail, Label.COACHABLE)):
            score, max_score = _grade_for(rng, label)
            corpus.add_grade(
                ScorecardGrade(
                    call_id=call_id,
                    question_id=by_type[qtype].question_id,
                    score=score,
                    max_score=max_score,
                    grader_id=f"manager-{int(rng.integers(0, 4)):02d}",
                    timestamp=_timestamp(i),
                )
            )
    return corpus


def late_marker_corpus(
    n_pairs: int = 600,
    seed: int = 0,
    marker_offset: tuple[int, int] = (300, 430),
    trailing_words: tuple[int, int] = (30, 60),
) -> Corpus:
    """The deciding phrase starts past transcript word `marker_offset`, so a
    128-token window sees only filler while a 512-token window sees it."""
    rng = np.random.default_rng(seed)
    corpus = Corpus()
    question = question_specs(None)[TYPE_ORDER.index(QuestionType.ISSUE_RESOLUTION)]
    corpus.add_question(question)
    marker = MARKERS[QuestionType.ISSUE_RESOLUTION]
    for i in range(n_pairs):
        label = Label.COACHABLE if rng.random() < 0.5 else Label.NOT_COACHABLE
        offset = int(rng.integers(marker_offset[0], marker_offset[1] + 1))
        words: list[str] = []
        for line in _filler_sentences(rng, offset, add_pii=False):
            words.extend(line.split())
        words = words[:offset]
        words.extend(marker.for_label(label).split())
        tail = int(rng.integers(trailing_words[0], trailing_words[1] + 1))
        for line in _filler_sentences(rng, tail, add_pii=False):
            words.extend(line.split())
        utterances = []
        step = 9
        for j in range(0, len(words), step):
            chunk = " ".join(words[j : j + step])
            utterances.append(
                Utterance(speaker="agent" if (j // step) % 2 == 0 else "customer", text=chunk)
            )
        call_id = f"call-{i:05d}"
        agent_id = f"agent-{int(rng.integers(0, _AGENT_POOL_SIZE)):03d}"
        corpus.add_transcript(
            Transcript(
                call_id=call_id,
                agent_id=agent_id,
                utterances=tuple(utterances),
                timestamp=_timestamp(i),
            )
        )
        score, max_score = _grade_for(rng, label)
        corpus.add_grade(
            ScorecardGrade(
                call_id=call_id,
                question_id=question.question_id,
                score=score,
                max_score=max_score,
                grader_id=f"manager-{int(rng.integers(0, 4)):02d}",
                timestamp=_timestamp(i),
            )
        )
    return corpus


def signal_words(qtype: QuestionType, label: Label) -> set[str]:
    """Marker words carrying the polarity signal: absent from filler, from
    every question text and from all opposite-polarity phrases."""
    phrase = MARKERS[qtype].for_label(label)
    own = set(phrase.split())
    neutral: set[str] = set()
    for line in AGENT_FILLER + CUSTOMER_FILLER:
        neutral.update(line.split())
    for text in QUESTION_TEXTS.values():
        neutral.update(text.split())
    opposite = Label.NOT_COACHABLE if label is Label.COACHABLE else Label.COACHABLE
    for other in MARKERS.values():
        neutral.update(other.for_label(opposite).split())
    return own - neutral
