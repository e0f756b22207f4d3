"""Text processing: tokenization, vocabulary, TF-IDF features and the
question (+) transcript pair encoding consumed by both model families.

Tokenization is deterministic whitespace + punctuation splitting so that
vocabularies are reproducible; the encoder lays pairs out as
BOS question SEP transcript EOS (transcript only when the query is ablated),
never truncating the question and padding to a fixed length.
"""

from __future__ import annotations

import hashlib
import json
import math
import string
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

PAD, UNK, BOS, SEP, EOS = 0, 1, 2, 3, 4
RESERVED_TOKENS = ("<pad>", "<unk>", "<bos>", "<sep>", "<eos>")

_PUNCT = set(string.punctuation)


class TextProcError(Exception):
    pass


class EmptyCorpus(TextProcError):
    pass


class QuestionTooLong(TextProcError):
    pass


def tokenize(text: str) -> list[str]:
    """Lowercase, split on whitespace, peel leading/trailing punctuation off
    each chunk into separate single-character tokens."""
    tokens: list[str] = []
    for chunk in text.lower().split():
        start = 0
        end = len(chunk)
        while start < end and chunk[start] in _PUNCT:
            start += 1
        while end > start and chunk[end - 1] in _PUNCT:
            end -= 1
        tokens.extend(chunk[:start])
        if start < end:
            tokens.append(chunk[start:end])
        tokens.extend(chunk[end:])
    return tokens


# ---------------------------------------------------------------------------
# Vocabulary
# ---------------------------------------------------------------------------


@dataclass
class Vocabulary:
    """Token -> dense id map with fixed reserved ids 0..4."""

    token_to_id: dict[str, int]
    max_size: int

    @property
    def size(self) -> int:
        return len(self.token_to_id)

    def id_of(self, token: str) -> int:
        return self.token_to_id.get(token, UNK)

    def encode(self, tokens: Iterable[str]) -> list[int]:
        return [self.id_of(t) for t in tokens]

    def tokens_in_order(self) -> list[str]:
        return [t for t, _ in sorted(self.token_to_id.items(), key=lambda kv: kv[1])]

    def to_json(self) -> dict:
        return {"version": 1, "max_size": self.max_size, "tokens": self.tokens_in_order()}

    def content_hash(self) -> str:
        canonical = json.dumps(self.to_json(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()

    @classmethod
    def from_json(cls, doc: dict) -> "Vocabulary":
        tokens = doc["tokens"]
        if tuple(tokens[:5]) != RESERVED_TOKENS:
            raise TextProcError("vocabulary file missing reserved tokens")
        return cls(
            token_to_id={t: i for i, t in enumerate(tokens)},
            max_size=doc["max_size"],
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=2) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "Vocabulary":
        return cls.from_json(json.loads(Path(path).read_text(encoding="utf-8")))


def build_vocab(token_lists: Iterable[Sequence[str]], max_size: int) -> Vocabulary:
    """Keep the most frequent tokens up to max_size (reserved ids included),
    ties broken lexicographically."""
    if max_size < len(RESERVED_TOKENS):
        raise TextProcError(f"max_size must be >= {len(RESERVED_TOKENS)}, got {max_size}")
    freq: dict[str, int] = {}
    for tokens in token_lists:
        for token in tokens:
            if token in RESERVED_TOKENS:
                continue
            freq[token] = freq.get(token, 0) + 1
    ranked = sorted(freq.items(), key=lambda kv: (-kv[1], kv[0]))
    room = max_size - len(RESERVED_TOKENS)
    token_to_id = {t: i for i, t in enumerate(RESERVED_TOKENS)}
    for token, _ in ranked[:room]:
        token_to_id[token] = len(token_to_id)
    return Vocabulary(token_to_id=token_to_id, max_size=max_size)


# ---------------------------------------------------------------------------
# TF-IDF
# ---------------------------------------------------------------------------


@dataclass
class TfidfModel:
    """Smooth-idf TF-IDF with L2 normalization.

    weight(t) = tf(t, doc) * (ln((1 + N) / (1 + df(t))) + 1), then the vector
    is scaled to unit L2 norm; out-of-vocabulary tokens are ignored.
    """

    token_to_col: dict[str, int]
    df: np.ndarray  # document frequency per column
    n_docs: int

    @property
    def dim(self) -> int:
        return len(self.token_to_col)

    def idf(self) -> np.ndarray:
        return np.log((1.0 + self.n_docs) / (1.0 + self.df)) + 1.0

    def to_json(self) -> dict:
        cols = sorted(self.token_to_col.items(), key=lambda kv: kv[1])
        return {
            "version": 1,
            "n_docs": self.n_docs,
            "tokens": [t for t, _ in cols],
            "df": [int(x) for x in self.df],
        }

    @classmethod
    def from_json(cls, doc: dict) -> "TfidfModel":
        tokens = doc["tokens"]
        return cls(
            token_to_col={t: i for i, t in enumerate(tokens)},
            df=np.asarray(doc["df"], dtype=np.int64),
            n_docs=doc["n_docs"],
        )


def tfidf_fit(docs: Sequence[Sequence[str]], max_features: int | None = None) -> TfidfModel:
    """Fit document frequencies over tokenized training docs.

    With max_features set, keeps the most document-frequent tokens (ties
    lexicographic) to bound the feature space.
    """
    if len(docs) == 0:
        raise EmptyCorpus("tfidf_fit requires at least one document")
    df_counts: dict[str, int] = {}
    for tokens in docs:
        for token in set(tokens):
            df_counts[token] = df_counts.get(token, 0) + 1
    items = sorted(df_counts.items(), key=lambda kv: (-kv[1], kv[0]))
    if max_features is not None:
        items = items[:max_features]
    items.sort(key=lambda kv: kv[0])  # stable, order-independent column layout
    token_to_col = {t: i for i, (t, _) in enumerate(items)}
    df = np.array([c for _, c in items], dtype=np.int64)
    return TfidfModel(token_to_col=token_to_col, df=df, n_docs=len(docs))


def tfidf_transform(model: TfidfModel, tokens: Sequence[str]) -> dict[int, float]:
    """Sparse {column: weight} for one tokenized doc (L2-normalized)."""
    counts: dict[int, float] = {}
    for token in tokens:
        col = model.token_to_col.get(token)
        if col is not None:
            counts[col] = counts.get(col, 0.0) + 1.0
    if not counts:
        return {}
    idf = model.idf()
    weights = {col: tf * idf[col] for col, tf in counts.items()}
    norm = math.sqrt(sum(w * w for w in weights.values()))
    return {col: w / norm for col, w in weights.items()}


def tfidf_matrix(model: TfidfModel, docs: Sequence[Sequence[str]]) -> np.ndarray:
    """Dense (n_docs, dim) matrix of transformed docs."""
    X = np.zeros((len(docs), model.dim), dtype=np.float64)
    for i, tokens in enumerate(docs):
        for col, w in tfidf_transform(model, tokens).items():
            X[i, col] = w
    return X


# ---------------------------------------------------------------------------
# Pair encoding
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EncodedPair:
    ids: np.ndarray  # (L,) int32
    mask: np.ndarray  # (L,) int8; 1 on real tokens
    label: int | None = None


def encode_pair(
    question_tokens: Sequence[str],
    transcript_tokens: Sequence[str],
    vocab: Vocabulary,
    max_len: int,
    include_query: bool = True,
    label: int | None = None,
    truncate_from: str = "tail",
) -> EncodedPair:
    """Fixed-length token id sequence for one (question, transcript) pair.

    Layout is BOS q1..qn SEP t1..tm EOS then PAD, or BOS t1..tm EOS when the
    query is ablated.  The question is never truncated (QuestionTooLong if it
    cannot fit); the transcript is cut to the remaining budget, dropping
    tokens from the tail by default (evidence tends to sit early in a call)
    or from the head with truncate_from="head".
    """
    if max_len < 8:
        raise TextProcError(f"max_len must be >= 8, got {max_len}")
    if truncate_from not in ("head", "tail"):
        raise TextProcError(f"truncate_from must be 'head' or 'tail', got {truncate_from!r}")
    if include_query:
        budget = max_len - 3 - len(question_tokens)
        if budget < 0:
            raise QuestionTooLong(
                f"question of {len(question_tokens)} tokens does not fit in max_len={max_len}"
            )
    else:
        budget = max_len - 2
    kept = list(transcript_tokens)
    if len(kept) > budget:
        kept = kept[:budget] if truncate_from == "tail" else kept[len(kept) - budget :]

    ids = [BOS]
    if include_query:
        ids.extend(vocab.encode(question_tokens))
        ids.append(SEP)
    ids.extend(vocab.encode(kept))
    ids.append(EOS)
    n_real = len(ids)
    ids.extend([PAD] * (max_len - n_real))

    mask = np.zeros(max_len, dtype=np.int8)
    mask[:n_real] = 1
    return EncodedPair(ids=np.asarray(ids, dtype=np.int32), mask=mask, label=label)


@dataclass
class EncodedBatch:
    """Stacked encoded pairs plus the (question_id, call_id) keys they came
    from (keys kept for eval joins; absent for ad-hoc scoring batches)."""

    ids: np.ndarray  # (N, L) int32
    mask: np.ndarray  # (N, L) int8
    labels: np.ndarray | None = None  # (N,) int32
    pair_keys: list[tuple[str, str]] | None = None

    def __len__(self) -> int:
        return self.ids.shape[0]

    @property
    def max_len(self) -> int:
        return self.ids.shape[1]


def stack_pairs(pairs: Sequence[EncodedPair], pair_keys=None) -> EncodedBatch:
    ids = np.stack([p.ids for p in pairs]) if pairs else np.zeros((0, 0), dtype=np.int32)
    mask = np.stack([p.mask for p in pairs]) if pairs else np.zeros((0, 0), dtype=np.int8)
    labels = None
    if pairs and all(p.label is not None for p in pairs):
        labels = np.array([p.label for p in pairs], dtype=np.int32)
    return EncodedBatch(ids=ids, mask=mask, labels=labels, pair_keys=pair_keys)


# Binary tensor file: magic, u32 header length, JSON header, then raw
# little-endian arrays in header-declared order.
_BATCH_MAGIC = b"CKTB"


def save_batch(batch: EncodedBatch, path: str | Path) -> None:
    arrays: list[tuple[str, np.ndarray]] = [
        ("ids", batch.ids.astype("<i4")),
        ("mask", batch.mask.astype("<i1")),
    ]
    if batch.labels is not None:
        arrays.append(("labels", batch.labels.astype("<i4")))
    header = {
        "version": 1,
        "endianness": "little",
        "shape": list(batch.ids.shape),
        "arrays": [
            {"name": name, "dtype": str(arr.dtype), "shape": list(arr.shape)}
            for name, arr in arrays
        ],
        "pair_keys": batch.pair_keys,
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_BATCH_MAGIC)
        fh.write(len(blob).to_bytes(4, "little"))
        fh.write(blob)
        for _, arr in arrays:
            fh.write(np.ascontiguousarray(arr).tobytes())


def load_batch(path: str | Path) -> EncodedBatch:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != _BATCH_MAGIC:
            raise TextProcError(f"{path}: not a batch tensor file")
        length = int.from_bytes(fh.read(4), "little")
        header = json.loads(fh.read(length).decode("utf-8"))
        out: dict[str, np.ndarray] = {}
        for spec in header["arrays"]:
            count = int(np.prod(spec["shape"])) if spec["shape"] else 1
            dtype = np.dtype(spec["dtype"])
            data = fh.read(count * dtype.itemsize)
            out[spec["name"]] = np.frombuffer(data, dtype=dtype).reshape(spec["shape"]).copy()
    pair_keys = header.get("pair_keys")
    if pair_keys is not None:
        pair_keys = [tuple(k) for k in pair_keys]
    labels = out.get("labels")
    return EncodedBatch(
        ids=out["ids"].astype(np.int32),
        mask=out["mask"].astype(np.int8),
        labels=None if labels is None else labels.astype(np.int32),
        pair_keys=pair_keys,
    )
