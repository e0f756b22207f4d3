"""Text-level prediction: bundle a trained encoder with its vocabulary so
callers hand over question/transcript strings instead of token ids."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from coachkit.corpus import Label
from coachkit.neural.model import TransformerClassifier
from coachkit.textproc import Vocabulary, encode_pair, tokenize


@dataclass
class TextClassifier:
    model: TransformerClassifier
    vocab: Vocabulary
    include_query: bool = True
    truncate_from: str = "tail"

    def _encode(self, question_text: str, transcript_text: str):
        return encode_pair(
            tokenize(question_text),
            tokenize(transcript_text),
            self.vocab,
            self.model.config.max_len,
            include_query=self.include_query,
            truncate_from=self.truncate_from,
        )

    def probabilities(self, question_text: str, transcript_text: str) -> np.ndarray:
        pair = self._encode(question_text, transcript_text)
        return self.model.predict_proba(pair.ids[None, :], pair.mask[None, :])[0]

    def coachable_probability(self, question_text: str, transcript_text: str) -> float:
        return float(self.probabilities(question_text, transcript_text)[Label.COACHABLE])

    def predict(self, question_text: str, transcript_text: str) -> tuple[Label, float]:
        """(winning label, its probability); exact ties go to not-coachable."""
        probs = self.probabilities(question_text, transcript_text)
        if probs[Label.COACHABLE] > probs[Label.NOT_COACHABLE]:
            return Label.COACHABLE, float(probs[Label.COACHABLE])
        return Label.NOT_COACHABLE, float(probs[Label.NOT_COACHABLE])
