"""Accuracy of a plain recurrent classifier on top-k distilled corpora."""

from __future__ import annotations

import argparse

import numpy as np

from textclf import corpus, evaluation, explain, training
from textclf import networks as nw
from textclf.embeddings import build_vocabulary


# ---- building blocks ----

def make_split(classes: int, docs: int, seed: int) -> corpus.CorpusSplit:
    records, _ = corpus.generate_synthetic(
        corpus.GenSpec(n_classes=classes, docs_per_class=docs, seed=seed))
    return corpus.temporal_split(
        corpus.deduplicate(corpus.preprocess_all(records)))


def fit(family: str, split: corpus.CorpusSplit, vocab, seed: int,
        epochs: int) -> nw.Model:
    cfg = nw.ModelConfig(family=family, n_classes=split.n_classes,
                         embedding_dim=16, rnn_width=16, g_width=48)
    tcfg = training.TrainConfig(lr=0.02, batch_size=16, max_epochs=epochs,
                                patience=4, seed=seed)
    params, hist = training.train(cfg, vocab, split.train, split.valid, tcfg)
    print(f"  {family}: best epoch {hist.best_epoch}, "
          f"valid {max(hist.valid_acc):.3f}")
    names = [str(c) for c in range(split.n_classes)]
    return nw.Model(config=cfg, params=params, vocab=vocab, class_names=names)


def test_accuracy(model: nw.Model, docs) -> float:
    return evaluation.accuracy(evaluation.collect_predictions(model, docs))


# ---- the experiment ----

def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--classes", default=10, type=int)
    ap.add_argument("--docs-per-class", default=60, type=int)
    ap.add_argument("--ks", default="1,2,3,5,10,20")
    ap.add_argument("--max-epochs", default=15, type=int)
    ap.add_argument("--seed", default=11, type=int)
    args = ap.parse_args()
    ks = [int(v) for v in args.ks.split(",")]

    split = make_split(args.classes, args.docs_per_class, args.seed)
    vocab = build_vocabulary(split.train, min_count=2)
    print(f"{len(split.train)}/{len(split.valid)}/{len(split.test)} documents, "
          f"{split.n_classes} classes, vocabulary {vocab.size}")

    print("teacher (interpretable):")
    teacher = fit("MAXi", split, vocab, args.seed, args.max_epochs)
    print("reader on full text:")
    full = test_accuracy(fit("GRU", split, vocab, args.seed, args.max_epochs),
                         split.test)

    rows = []
    for k in ks:
        small = explain.distill_top_k(teacher, split, k).split
        mean_len = np.mean([len(d.tokens) for d in small.test])
        print(f"reader on top-{k} tokens (mean length {mean_len:.1f}):")
        acc = test_accuracy(fit("GRU", small, vocab, args.seed,
                                args.max_epochs), small.test)
        rows.append((k, acc))

    print()
    print(" k   test acc   vs full")
    print(f"all  {full:8.3f}   +0.000")
    for k, acc in rows:
        bar = "#" * int(round(40 * acc))
        print(f"{k:3d}  {acc:8.3f}   {acc - full:+.3f}  {bar}")


if __name__ == "__main__":
    main()
