"""End-to-end walkthrough: corpus, vectors, three classifiers, comparison."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from textclf.cli import main as textclf


def run(argv: list[str]) -> None:
    print("$ textclf " + " ".join(argv))
    code = textclf(argv)
    if code != 0:
        sys.exit(f"step failed with exit code {code}")
    print()


# ---- pipeline ----

def pipeline(workdir: Path, classes: int, docs: int, seed: int,
             epochs: int) -> None:
    workdir.mkdir(parents=True, exist_ok=True)
    corpus = workdir / "corpus.jsonl"
    split = workdir / "split"
    vectors = workdir / "vectors.txt"

    run(["synth", "--out", str(corpus), "--classes", str(classes),
         "--docs-per-class", str(docs), "--seed", str(seed)])
    run(["prepare", "--corpus", str(corpus), "--out", str(split)])
    run(["embed", "--split", str(split), "--out", str(vectors),
         "--dim", "16", "--iterations", "30", "--min-count", "2",
         "--seed", str(seed)])

    common = ["--split", str(split), "--vectors", str(vectors),
              "--embedding-dim", "16", "--rnn-width", "12", "--g-width", "32",
              "--min-count", "2", "--lr", "0.02", "--batch-size", "16",
              "--max-epochs", str(epochs), "--seed", str(seed)]
    for family in ("MAX", "MAXi"):
        run(["train", "--family", family,
             "--out", str(workdir / f"{family.lower()}.bin"), *common])
    run(["train", "--family", "SVM", "--split", str(split),
         "--out", str(workdir / "svm.bin"), "--svm-c", "1.0",
         "--seed", str(seed)])

    run(["eval", "--model", str(workdir / "max.bin"), "--split", str(split),
         "--part", "test", "--out", str(workdir / "max_metrics.json")])
    run(["eval", "--model", str(workdir / "maxi.bin"), "--split", str(split),
         "--part", "test", "--reference-model", str(workdir / "max.bin")])
    run(["compare", "--split", str(split), "--part", "test",
         "--baseline", "MAX",
         "--model", f"MAX={workdir / 'max.bin'}",
         "--model", f"MAXi={workdir / 'maxi.bin'}",
         "--model", f"SVM={workdir / 'svm.bin'}"])

    run(["explain", "--model", str(workdir / "maxi.bin"),
         "--split", str(split), "--part", "test", "--index", "0",
         "--out", str(workdir / "highlight.html")])
    run(["distill", "--model", str(workdir / "maxi.bin"),
         "--split", str(split), "--k", "3",
         "--out", str(workdir / "distilled")])
    print(f"artifacts under {workdir}")


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--workdir", default="pipeline_run", type=Path)
    ap.add_argument("--classes", default=8, type=int)
    ap.add_argument("--docs-per-class", default=60, type=int)
    ap.add_argument("--max-epochs", default=15, type=int)
    ap.add_argument("--seed", default=7, type=int)
    args = ap.parse_args()
    pipeline(args.workdir, args.classes, args.docs_per_class, args.seed,
             args.max_epochs)


if __name__ == "__main__":
    main()
