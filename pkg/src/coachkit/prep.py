"""Bridging helpers: turn corpus splits into model-ready features.

Vocabulary and TF-IDF models are always fit on the training split only;
validation/test splits are encoded against the fitted state.
"""

from __future__ import annotations

import numpy as np

from coachkit.corpus import Corpus
from coachkit.dataset import DanglingReference, DatasetSplit
from coachkit.textproc import (
    EncodedBatch,
    TfidfModel,
    Vocabulary,
    build_vocab,
    encode_pair,
    stack_pairs,
    tfidf_fit,
    tfidf_matrix,
    tokenize,
)


def _resolve(corpus: Corpus, split: DatasetSplit):
    for pair in split.pairs:
        if pair.question_id not in corpus.questions:
            raise DanglingReference(f"question {pair.question_id!r} not in corpus")
        if pair.call_id not in corpus.transcripts:
            raise DanglingReference(f"call {pair.call_id!r} not in corpus")
        yield pair, corpus.questions[pair.question_id], corpus.transcripts[pair.call_id]


def vocab_from_split(corpus: Corpus, split: DatasetSplit, max_size: int = 4000) -> Vocabulary:
    docs = []
    for _, question, transcript in _resolve(corpus, split):
        docs.append(tokenize(question.text))
        docs.append(tokenize(transcript.text()))
    return build_vocab(docs, max_size=max_size)


def encode_split(
    corpus: Corpus,
    split: DatasetSplit,
    vocab: Vocabulary,
    max_len: int,
    include_query: bool = True,
    truncate_from: str = "tail",
) -> EncodedBatch:
    pairs = []
    keys = []
    for pair, question, transcript in _resolve(corpus, split):
        pairs.append(
            encode_pair(
                tokenize(question.text),
                tokenize(transcript.text()),
                vocab,
                max_len,
                include_query=include_query,
                label=int(pair.label),
                truncate_from=truncate_from,
            )
        )
        keys.append(pair.key)
    return stack_pairs(pairs, pair_keys=keys)


def pair_documents(
    corpus: Corpus, split: DatasetSplit, include_query: bool = True
) -> list[list[str]]:
    """Tokenized question (+) transcript concatenations for TF-IDF models."""
    docs = []
    for _, question, transcript in _resolve(corpus, split):
        tokens = tokenize(question.text) if include_query else []
        docs.append(tokens + tokenize(transcript.text()))
    return docs


def split_labels(split: DatasetSplit) -> np.ndarray:
    return np.array([int(p.label) for p in split.pairs], dtype=np.int64)


def tfidf_features(
    corpus: Corpus,
    train: DatasetSplit,
    others: list[DatasetSplit],
    max_features: int | None = 4000,
    include_query: bool = True,
) -> tuple[TfidfModel, np.ndarray, list[np.ndarray]]:
    """Fit on the train split, transform train plus the other splits."""
    train_docs = pair_documents(corpus, train, include_query)
    model = tfidf_fit(train_docs, max_features=max_features)
    X_train = tfidf_matrix(model, train_docs)
    X_others = [
        tfidf_matrix(model, pair_documents(corpus, split, include_query)) for split in others
    ]
    return model, X_train, X_others
