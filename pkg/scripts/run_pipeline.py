#!/usr/bin/env python3
"""End-to-end demo: synthetic corpus -> ingest -> dataset -> train -> evaluate
-> recommendation batch, all through the CLI surface."""

import argparse
import json
import tempfile
from pathlib import Path

from coachkit.corpus import save_corpus_file, save_questions_file
from coachkit.service.cli import main as cli
from coachkit.synthetic import marker_corpus


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--workdir", default=None, help="default: a temp directory")
    parser.add_argument("--n", type=int, default=800)
    parser.add_argument("--seed", type=int, default=11)
    parser.add_argument("--model", choices=["nb", "svm", "tree", "forest", "transformer"],
                        default="transformer")
    parser.add_argument("--epochs", type=int, default=10)
    args = parser.parse_args()

    workdir = Path(args.workdir) if args.workdir else Path(tempfile.mkdtemp(prefix="coachkit-"))
    workdir.mkdir(parents=True, exist_ok=True)
    print(f"workdir: {workdir}")

    corpus = marker_corpus(n_pairs=args.n, n_types=8, seed=args.seed, add_pii=True)
    raw = workdir / "raw.jsonl"
    questions = workdir / "questions.json"
    save_corpus_file(corpus, raw)
    save_questions_file(corpus.questions.values(), questions)

    steps = [
        ["--workdir", str(workdir), "ingest", str(raw), "--questions", str(questions)],
        ["--workdir", str(workdir), "build-dataset", "--seed", str(args.seed)],
    ]
    if args.model == "transformer":
        config = workdir / "train.json"
        config.write_text(json.dumps({
            "model": {"d_model": 64, "n_heads": 4, "n_layers": 2, "d_ff": 128,
                      "dropout_rate": 0.0, "activation": "relu", "seed": args.seed},
            "training": {"learning_rate": 6e-4, "epochs": args.epochs,
                         "batch_size": 32, "seed": args.seed},
            "encoding": {"max_len": 128, "vocab_size": 2000},
        }))
        steps.append(["--workdir", str(workdir), "train", "--model", "transformer",
                      "--config", str(config)])
        artifact = workdir / "model.acam"
    else:
        steps.append(["--workdir", str(workdir), "train", "--model", args.model])
        artifact = workdir / f"model.{args.model}.json"
    steps += [
        ["--workdir", str(workdir), "evaluate", "--model", str(artifact), "--split", "test"],
        ["--workdir", str(workdir), "recommend", "--question", "q-greeting",
         "--model", str(artifact)],
    ]
    for step in steps:
        print(f"\n$ coachkit {' '.join(step)}")
        code = cli(step)
        if code != 0:
            raise SystemExit(code)
    print(f"\nartifacts in {workdir}: " + ", ".join(sorted(p.name for p in workdir.iterdir())))


if __name__ == "__main__":
    main()
