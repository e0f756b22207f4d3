"""Load a trained artifact (either family) behind the CallScorer protocol."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from coachkit import baselines
from coachkit.neural.artifact import ARTIFACT_MAGIC, load_model
from coachkit.neural.classify import TextClassifier
from coachkit.textproc import TfidfModel, Vocabulary, tfidf_transform, tokenize


@dataclass
class BaselineScorer:
    model: baselines.BaselineModel
    tfidf: TfidfModel
    include_query: bool = True

    def coachable_probability(self, question_text: str, transcript_text: str) -> float:
        tokens = tokenize(question_text) if self.include_query else []
        tokens = tokens + tokenize(transcript_text)
        x = np.zeros(self.tfidf.dim)
        for col, w in tfidf_transform(self.tfidf, tokens).items():
            x[col] = w
        return baselines.predict(self.model, x)[1]


def load_scorer(model_path: str | Path, vocab_path: str | Path | None = None):
    """Transformer artifacts (magic bytes) need their vocabulary file;
    baseline bundles are self-contained JSON."""
    model_path = Path(model_path)
    with open(model_path, "rb") as fh:
        magic = fh.read(4)
    if magic == ARTIFACT_MAGIC:
        if vocab_path is None:
            raise ValueError("transformer artifacts require vocab_path")
        vocab = Vocabulary.load(vocab_path)
        model, _ = load_model(model_path, expect_vocab_hash=vocab.content_hash())
        return TextClassifier(model=model, vocab=vocab)
    model, tfidf = baselines.load_model_bundle(model_path)
    return BaselineScorer(model=model, tfidf=tfidf)
