#!/usr/bin/env python3
"""Generate a synthetic contact-center corpus for demos and experiments.

Writes a raw JSONL corpus (optionally with PII sprinkled in, so `ingest`
has something to redact) plus the question file.
"""

import argparse
from pathlib import Path

from coachkit.corpus import save_corpus_file, save_questions_file
from coachkit.synthetic import late_marker_corpus, marker_corpus, query_corpus


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--kind", choices=["marker", "query", "late"], default="marker")
    parser.add_argument("--out", default="data", help="output directory")
    parser.add_argument("--n", type=int, default=2000, help="pairs (marker/late) or transcripts (query)")
    parser.add_argument("--types", type=int, default=8)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--pii", action="store_true", help="sprinkle PII lines into filler")
    args = parser.parse_args()

    if args.kind == "marker":
        corpus = marker_corpus(n_pairs=args.n, n_types=args.types, seed=args.seed, add_pii=args.pii)
    elif args.kind == "query":
        corpus = query_corpus(n_transcripts=args.n, n_types=args.types, seed=args.seed)
    else:
        corpus = late_marker_corpus(n_pairs=args.n, seed=args.seed)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_corpus_file(corpus, out / "corpus.jsonl")
    save_questions_file(corpus.questions.values(), out / "questions.json")
    pairs = corpus.labeled_pairs()
    coachable = sum(1 for p in pairs if int(p.label) == 1)
    print(f"wrote {out / 'corpus.jsonl'}: {len(corpus.transcripts)} transcripts, "
          f"{len(pairs)} labeled pairs ({coachable} coachable), "
          f"{len(corpus.questions)} questions")


if __name__ == "__main__":
    main()
