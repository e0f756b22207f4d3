"""Balanced, reproducible train/validation/test splits of labeled pairs.

Per question, the majority class is down-sampled so the class ratio is at
most 1:2 (configurable); splits are stratified per (question, label) cell so
every split keeps roughly the same per-question class mix, and the ratio cap
still holds inside each split whenever both classes land there.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from coachkit.corpus import Corpus, Label, LabeledPair
from coachkit.util import round_half_away

SPLIT_NAMES = ("train", "validation", "test")


class DatasetError(Exception):
    pass


class InsufficientData(DatasetError):
    """A (question, label) cell is too small to stratify across the splits."""


class DanglingReference(DatasetError):
    """A pair points at a question or transcript the corpus does not hold."""


@dataclass
class DatasetSplit:
    name: str
    pairs: list[LabeledPair]
    seed: int

    def __len__(self) -> int:
        return len(self.pairs)


@dataclass
class SplitStats:
    total_samples: int
    not_coachable_count: int
    coachable_count: int
    avg_question_length: float
    avg_transcript_length: float

    def to_json(self) -> dict:
        return {
            "total_samples": self.total_samples,
            "not_coachable_count": self.not_coachable_count,
            "coachable_count": self.coachable_count,
            "avg_question_length": round_half_away(self.avg_question_length, 2),
            "avg_transcript_length": round_half_away(self.avg_transcript_length, 2),
        }


def _question_rng(seed: int, question_id: str, salt: str = "") -> np.random.Generator:
    # Stable per-question stream: independent of question iteration order
    # and of Python's salted hash().
    digest = hashlib.sha256(f"{salt}:{question_id}".encode("utf-8")).digest()
    entropy = int.from_bytes(digest[:8], "little")
    return np.random.default_rng(np.random.SeedSequence([seed, entropy]))


def balance_per_question(
    pairs: Sequence[LabeledPair], max_ratio: float = 2.0, seed: int = 0
) -> list[LabeledPair]:
    """Down-sample the majority class per question to majority/minority <= max_ratio.

    Minority pairs are never dropped; questions where only one class occurs
    are excluded entirely (the ratio is undefined there).  Sampling is
    uniform without replacement and seeded per question; surviving pairs keep
    their original relative order.
    """
    if max_ratio < 1:
        raise DatasetError(f"max_ratio must be >= 1, got {max_ratio}")
    by_question: dict[str, list[LabeledPair]] = {}
    question_order: list[str] = []
    for pair in pairs:
        if pair.question_id not in by_question:
            question_order.append(pair.question_id)
        by_question.setdefault(pair.question_id, []).append(pair)

    kept: set[int] = set()
    for qid in question_order:
        qpairs = by_question[qid]
        coachable = [p for p in qpairs if p.label is Label.COACHABLE]
        not_coachable = [p for p in qpairs if p.label is Label.NOT_COACHABLE]
        if not coachable or not not_coachable:
            continue
        minority, majority = sorted((coachable, not_coachable), key=len)
        cap = int(max_ratio * len(minority))
        if len(majority) > cap:
            rng = _question_rng(seed, qid, salt="balance")
            idx = rng.choice(len(majority), size=cap, replace=False)
            majority = [majority[i] for i in sorted(idx)]
        kept.update(id(p) for p in minority)
        kept.update(id(p) for p in majority)

    return [p for p in pairs if id(p) in kept]


def _cumulative_allocation(n: int, fractions: Sequence[float]) -> list[int]:
    """Partition n items by cumulative rounding; allocations sum to n."""
    counts = []
    prev = 0
    cum = 0.0
    for f in fractions:
        cum += f
        point = min(n, int(n * cum + 0.5))
        counts.append(point - prev)
        prev = point
    counts[-1] += n - prev
    return counts


def _check_cell_feasible(n: int, fractions: Sequence[float]) -> None:
    requiring = sum(1 for f in fractions if int(n * f + 0.5) >= 1)
    if n < requiring:
        raise InsufficientData(
            f"cell of {n} pairs cannot give >=1 item to each of {requiring} splits"
        )


def _allocate_question(
    n_min: int, n_maj: int, fractions: Sequence[float], max_ratio: float
) -> tuple[list[int], list[int]]:
    """Per-split counts for the minority and majority cells of one question.

    Starts from cumulative rounding, then moves majority overflow out of any
    split where it would break the ratio cap against that split's minority
    count.  Splits without minority presence are unconstrained (a single
    class in a split is permitted)."""
    minority = _cumulative_allocation(n_min, fractions)
    majority = _cumulative_allocation(n_maj, fractions)
    caps = [int(max_ratio * m) if m > 0 else None for m in minority]
    overflow = 0
    for s, cap in enumerate(caps):
        if cap is not None and majority[s] > cap:
            overflow += majority[s] - cap
            majority[s] = cap
    for s, cap in enumerate(caps):
        if overflow == 0:
            break
        if cap is None:
            continue
        room = cap - majority[s]
        take = min(room, overflow)
        majority[s] += take
        overflow -= take
    if overflow:
        # Input ratio exceeded max_ratio (unbalanced input); fall back to
        # splits that already hold no minority items.
        for s, cap in enumerate(caps):
            if cap is None:
                majority[s] += overflow
                overflow = 0
                break
    if overflow:
        raise InsufficientData("cannot satisfy per-split ratio cap; balance the pairs first")
    return minority, majority


def make_splits(
    pairs: Sequence[LabeledPair],
    fractions: tuple[float, float, float] = (0.70, 0.10, 0.20),
    seed: int = 0,
    max_ratio: float = 2.0,
) -> tuple[DatasetSplit, DatasetSplit, DatasetSplit]:
    """Partition balanced pairs into train/validation/test.

    Stratified per (question_id, label) cell: each cell is shuffled with a
    seed derived from (seed, question_id) and dealt to the splits by
    cumulative rounding, with majority counts adjusted so each split honors
    the ratio cap whenever it holds both classes.  Deterministic for a fixed
    seed regardless of machine.
    """
    if len(fractions) != len(SPLIT_NAMES):
        raise DatasetError(f"expected {len(SPLIT_NAMES)} fractions, got {len(fractions)}")
    if any(f <= 0 for f in fractions):
        raise DatasetError(f"fractions must be positive, got {fractions}")
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise DatasetError(f"fractions must sum to 1, got {fractions}")

    by_question: dict[str, dict[Label, list[LabeledPair]]] = {}
    question_order: list[str] = []
    seen_keys: set[tuple[str, str]] = set()
    for pair in pairs:
        if pair.key in seen_keys:
            raise DatasetError(f"duplicate (question_id, call_id) pair {pair.key}")
        seen_keys.add(pair.key)
        if pair.question_id not in by_question:
            question_order.append(pair.question_id)
            by_question[pair.question_id] = {Label.NOT_COACHABLE: [], Label.COACHABLE: []}
        by_question[pair.question_id][pair.label].append(pair)

    buckets: dict[str, list[LabeledPair]] = {name: [] for name in SPLIT_NAMES}
    for qid in question_order:
        cells = by_question[qid]
        nc, co = cells[Label.NOT_COACHABLE], cells[Label.COACHABLE]
        for cell in (nc, co):
            if cell:
                _check_cell_feasible(len(cell), fractions)
        rng = _question_rng(seed, qid, salt="split")
        shuffled: dict[Label, list[LabeledPair]] = {}
        for label, cell in cells.items():
            order = rng.permutation(len(cell)) if cell else []
            shuffled[label] = [cell[i] for i in order]

        if nc and co:
            minority_label = Label.COACHABLE if len(co) <= len(nc) else Label.NOT_COACHABLE
            majority_label = (
                Label.NOT_COACHABLE if minority_label is Label.COACHABLE else Label.COACHABLE
            )
            alloc_min, alloc_maj = _allocate_question(
                len(cells[minority_label]), len(cells[majority_label]), fractions, max_ratio
            )
            allocations = {minority_label: alloc_min, majority_label: alloc_maj}
        else:
            present = Label.NOT_COACHABLE if nc else Label.COACHABLE
            allocations = {present: _cumulative_allocation(len(cells[present]), fractions)}

        for label, counts in allocations.items():
            items = shuffled[label]
            start = 0
            for name, count in zip(SPLIT_NAMES, counts):
                buckets[name].extend(items[start : start + count])
                start += count

    return tuple(
        DatasetSplit(name=name, pairs=buckets[name], seed=seed) for name in SPLIT_NAMES
    )  # type: ignore[return-value]


def split_stats(split: DatasetSplit, corpus: Corpus) -> SplitStats:
    """Counts and mean token lengths for one split (means over pairs)."""
    q_tokens = 0
    t_tokens = 0
    coachable = 0
    for pair in split.pairs:
        if pair.question_id not in corpus.questions:
            raise DanglingReference(f"question {pair.question_id!r} not in corpus")
        if pair.call_id not in corpus.transcripts:
            raise DanglingReference(f"call {pair.call_id!r} not in corpus")
        q_tokens += len(corpus.questions[pair.question_id].text.split())
        t_tokens += corpus.transcripts[pair.call_id].word_count
        if pair.label is Label.COACHABLE:
            coachable += 1
    n = len(split.pairs)
    return SplitStats(
        total_samples=n,
        not_coachable_count=n - coachable,
        coachable_count=coachable,
        avg_question_length=q_tokens / n if n else 0.0,
        avg_transcript_length=t_tokens / n if n else 0.0,
    )


def stats_table(stats: dict[str, SplitStats]) -> str:
    """Aligned-column text report, one row per split."""
    headers = (
        "Split",
        "Total Samples",
        "Not Coachable",
        "Coachable",
        "Avg. Question Length",
        "Avg. Transcript Length",
    )
    rows = [headers]
    for name, st in stats.items():
        rows.append(
            (
                name,
                str(st.total_samples),
                str(st.not_coachable_count),
                str(st.coachable_count),
                f"{round_half_away(st.avg_question_length, 2):.2f}",
                f"{round_half_away(st.avg_transcript_length, 2):.2f}",
            )
        )
    widths = [max(len(row[i]) for row in rows) for i in range(len(headers))]
    lines = ["  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip() for row in rows]
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Split manifest I/O
# ---------------------------------------------------------------------------


def manifest_json(
    splits: Iterable[DatasetSplit], fractions: Sequence[float], seed: int
) -> str:
    """Canonical manifest text; byte-identical across runs with equal seeds."""
    doc = {
        "version": 1,
        "seed": seed,
        "fractions": list(fractions),
        "splits": {
            split.name: [
                {"question_id": p.question_id, "call_id": p.call_id, "label": p.label.to_json()}
                for p in split.pairs
            ]
            for split in splits
        },
    }
    return json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n"


def save_manifest(
    splits: Iterable[DatasetSplit], fractions: Sequence[float], seed: int, path: str | Path
) -> None:
    Path(path).write_text(manifest_json(splits, fractions, seed), encoding="utf-8")


def load_manifest(path: str | Path) -> tuple[DatasetSplit, DatasetSplit, DatasetSplit]:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    seed = doc["seed"]
    splits = []
    for name in SPLIT_NAMES:
        pairs = [
            LabeledPair(
                question_id=rec["question_id"],
                call_id=rec["call_id"],
                label=Label.from_json(rec["label"]),
            )
            for rec in doc["splits"][name]
        ]
        splits.append(DatasetSplit(name=name, pairs=pairs, seed=seed))
    return tuple(splits)  # type: ignore[return-value]
