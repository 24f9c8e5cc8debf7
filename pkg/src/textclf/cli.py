"""Command-line front end: corpus preparation, embedding and model training,
grid search, evaluation with significance, highlighting, and distillation."""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import corpus as cp
from .baseline import SvmModel, svm_train, tfidf_fit_transform
from .embeddings import (analogy_eval, build_vocabulary, count_cooccurrences,
                         read_relations, read_vectors, train_embeddings,
                         write_vectors)
from .evaluation import (PredictionSet, collect_predictions, compare_models,
                         evaluate, render_comparison, render_report)
from .explain import (distill_top_k, extract_importance, render_highlights,
                      write_distilled)
from .model_io import load_any, load_model, save_model, save_svm
from .networks import FAMILIES, Model, ModelConfig
from .tensor import NumericError
from .training import HyperGrid, TrainConfig, grid_search, train
from .util import derive_seed, dump_json, load_json

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3

ALL_FAMILIES = FAMILIES + ("SVM",)


class UsageError(Exception):
    """Bad flags, config keys, or argument values; exit status 1."""


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on its own; route through the usual error path
    def error(self, message):
        raise UsageError(message)


def _parse_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise UsageError(f"not a boolean: {text!r}")


@dataclass
class _Sub:
    """One subcommand: its parser, layered defaults, and value converters."""

    parser: argparse.ArgumentParser
    run: object = None
    defaults: dict = field(default_factory=dict)
    converters: dict = field(default_factory=dict)

    def arg(self, flag: str, default=None, type=str, help: str = "",
            choices=None, repeat: bool = False) -> None:
        dest = flag.lstrip("-").replace("-", "_")
        self.defaults[dest] = default
        kwargs = {"dest": dest, "default": argparse.SUPPRESS, "help": help}
        if type is bool:
            kwargs["action"] = "store_true"
            self.converters[dest] = _parse_bool
        else:
            kwargs["type"] = type
            if repeat:
                kwargs["action"] = "append"
                self.converters[dest] = lambda s: [x for x in s.split(",") if x]
            else:
                self.converters[dest] = type
            if choices is not None:
                kwargs["choices"] = choices
        self.parser.add_argument(flag, **kwargs)


def _read_config_file(path) -> dict:
    fp = Path(path)
    if not fp.exists():
        raise cp.DataError(f"config file not found: {fp}")
    values = {}
    for ln, line in enumerate(fp.read_text(encoding="utf-8").splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise cp.DataError(f"{fp}:{ln}: expected key=value")
        key, val = line.split("=", 1)
        values[key.strip()] = val.strip()
    return values


def _resolve(sub: _Sub, args: argparse.Namespace) -> argparse.Namespace:
    """Defaults, then config file entries, then explicit flags."""
    given = {k: v for k, v in vars(args).items() if k != "command"}
    values = dict(sub.defaults)
    if "config" in given:
        for key, text in _read_config_file(given.pop("config")).items():
            if key not in sub.defaults or key == "config":
                raise UsageError(f"unknown config key {key!r}")
            values[key] = sub.converters.get(key, str)(text)
    values.update(given)
    return argparse.Namespace(**values)


def _need(values: argparse.Namespace, *names: str) -> None:
    for name in names:
        if getattr(values, name) is None:
            flag = "--" + name.replace("_", "-")
            raise UsageError(f"{flag} is required")


# ---- corpus commands ----


def _cmd_synth(v) -> None:
    _need(v, "out")
    spec = cp.GenSpec(n_classes=v.classes, keywords_per_class=v.keywords_per_class,
                      docs_per_class=v.docs_per_class, min_tokens=v.min_tokens,
                      max_tokens=v.max_tokens, noise_vocab=v.noise_vocab,
                      period_rate=v.period_rate, seed=v.seed)
    records, meta = cp.generate_synthetic(spec)
    cp.write_corpus(v.out, records, meta)
    print(f"wrote {len(records)} records across {v.classes} classes to {v.out}")


def _cmd_prepare(v) -> None:
    _need(v, "corpus", "out")
    records, _meta = cp.read_corpus(v.corpus)
    docs = cp.deduplicate(cp.preprocess_all(records))
    split = cp.temporal_split(docs, test_frac=v.test_frac,
                              valid_frac=v.valid_frac)
    if v.min_test > 0:
        split = cp.filter_rare_classes(split, min_test=v.min_test)
    cp.write_split(v.out, split)
    print(f"split: {len(split.train)} train / {len(split.valid)} valid / "
          f"{len(split.test)} test, {split.n_classes} classes -> {v.out}")


def _cmd_embed(v) -> None:
    _need(v, "split", "out")
    split = cp.read_split(v.split)
    vocab = build_vocabulary(split.train, min_count=v.min_count)
    table = count_cooccurrences(split.train, vocab, window=v.window)
    vectors = train_embeddings(table, vocab.size, p=v.dim,
                               iterations=v.iterations, lr=v.lr,
                               seed=derive_seed(v.seed, "embed"))
    write_vectors(v.out, vocab, vectors.final)
    print(f"trained {vocab.size - 1} vectors of width {v.dim}, "
          f"final cost {vectors.loss_history[-1]:.6f} -> {v.out}")
    if v.relations:
        sets = [read_relations(p) for p in v.relations]
        for result in analogy_eval(vectors.final, vocab, sets):
            shown = "undefined" if result.accuracy is None \
                else f"{result.accuracy:.3f}"
            print(f"analogy {result.name}: {shown} "
                  f"({result.hits}/{result.queries}, "
                  f"{result.skipped_pairs} pairs skipped)")


# ---- model commands ----


def _class_names(split: cp.CorpusSplit) -> list:
    return sorted(split.class_map, key=split.class_map.get)


def _model_config(v, n_classes: int) -> ModelConfig:
    return ModelConfig(
        family=v.family, n_classes=n_classes,
        embedding_dim=v.embedding_dim, rnn_layers=v.rnn_layers,
        rnn_width=v.rnn_width, g_layers=v.g_layers, g_width=v.g_width,
        attention_width=v.attention_width,
        sent_rnn_layers=v.sent_rnn_layers, sent_rnn_width=v.sent_rnn_width,
        sent_attention_width=v.sent_attention_width,
        cnn_proj_width=v.cnn_proj_width, cnn_filters=v.cnn_filters,
        embedding_trainable=not v.freeze_embeddings)


def _train_config(v) -> TrainConfig:
    return TrainConfig(lr=v.lr, batch_size=v.batch_size,
                       max_epochs=v.max_epochs, patience=v.patience,
                       seed=v.seed,
                       embedding_trainable=not v.freeze_embeddings)


def _add_model_flags(sub: _Sub) -> None:
    sub.arg("--family", choices=sorted(ALL_FAMILIES),
            help="architecture to train")
    sub.arg("--embedding-dim", 60, int, "word vector width")
    sub.arg("--rnn-layers", 1, int, "stacked recurrent layers per direction")
    sub.arg("--rnn-width", 32, int, "recurrent state width")
    sub.arg("--g-layers", 1, int, "contextual MLP depth")
    sub.arg("--g-width", 64, int, "contextual MLP width")
    sub.arg("--attention-width", 32, int, "attention projection width")
    sub.arg("--sent-rnn-layers", 1, int, "sentence-level recurrent layers")
    sub.arg("--sent-rnn-width", 32, int, "sentence-level state width")
    sub.arg("--sent-attention-width", 32, int, "sentence attention width")
    sub.arg("--cnn-proj-width", 32, int, "convolutional input projection")
    sub.arg("--cnn-filters", 32, int, "filters per convolution width")
    sub.arg("--vectors", None, str, "pretrained word vector file")
    sub.arg("--min-count", 5, int, "vocabulary frequency cutoff")
    sub.arg("--freeze-embeddings", False, bool,
            "keep the embedding table fixed during training")
    sub.arg("--lr", 0.001, float, "learning rate")
    sub.arg("--batch-size", 32, int, "documents per update")
    sub.arg("--max-epochs", 50, int, "epoch budget")
    sub.arg("--patience", 5, int, "epochs without improvement before stopping")
    sub.arg("--seed", 0, int, "master random seed")
    sub.arg("--svm-c", 1.0, float, "margin trade-off for the linear baseline")
    sub.arg("--svm-epochs", 30, int, "subgradient passes for the baseline")
    sub.arg("--svm-lr0", 0.1, float, "initial baseline step size")
    sub.arg("--ngram-max", 1, int, "1 for unigrams, 2 to add bigrams")


def _train_svm(v, split: cp.CorpusSplit) -> SvmModel:
    tfidf, x = tfidf_fit_transform(split.train, ngram_max=v.ngram_max)
    y = np.array([d.label for d in split.train])
    linear = svm_train(x, y, c=v.svm_c, epochs=v.svm_epochs,
                       seed=v.seed, lr0=v.svm_lr0)
    return SvmModel(tfidf, linear, _class_names(split))


def _cmd_train(v) -> None:
    _need(v, "split", "out", "family")
    split = cp.read_split(v.split)
    if v.family == "SVM":
        model = _train_svm(v, split)
        preds = PredictionSet(model.scores(split.valid),
                              np.array([d.label for d in split.valid]))
        save_svm(model, v.out)
        print(f"objective {model.linear.objective_history[-1]:.6f}, "
              f"valid accuracy {float(np.mean(preds.correct())):.4f} -> {v.out}")
        return
    vocab = build_vocabulary(split.train, min_count=v.min_count)
    pretrained = read_vectors(v.vectors) if v.vectors else None
    cfg = _model_config(v, split.n_classes)
    params, history = train(cfg, vocab, split.train, split.valid,
                            _train_config(v), pretrained=pretrained)
    model = Model(cfg, params, vocab, _class_names(split))
    save_model(model, v.out)
    for i, (loss, tacc, vacc) in enumerate(zip(
            history.train_loss, history.train_acc, history.valid_acc)):
        print(f"epoch {i}: loss {loss:.4f} train {tacc:.4f} valid {vacc:.4f}")
    print(f"best epoch {history.best_epoch}, valid accuracy "
          f"{history.valid_acc[history.best_epoch]:.4f} -> {v.out}")


def _cmd_gridsearch(v) -> None:
    _need(v, "split", "grid", "out")
    obj = load_json(v.grid)
    if not isinstance(obj, dict):
        raise cp.DataError(f"{v.grid}: grid file must be an object")
    axes = obj.get("axes", obj)
    family = v.family or obj.get("family")
    if family is None:
        raise UsageError("--family is required (not named in the grid file)")
    if family not in ALL_FAMILIES:
        raise UsageError(f"unknown family {family!r}")
    if not isinstance(axes, dict) or not all(
            isinstance(vals, list) for vals in axes.values()):
        raise cp.DataError(f"{v.grid}: axes must map names to value lists")
    split = cp.read_split(v.split)
    vocab = build_vocabulary(split.train, min_count=v.min_count)
    pretrained = read_vectors(v.vectors) if v.vectors else None
    base = None if family == "SVM" else _model_config(
        argparse.Namespace(**{**vars(v), "family": family}), split.n_classes)
    grid = HyperGrid(axes=axes)
    result = grid_search(family, base, grid, vocab, split.train, split.valid,
                         _train_config(v), pretrained=pretrained, jobs=v.jobs)
    result.write_csv(v.out)
    best = result.best()
    done = sum(1 for r in result.rows if r.status == "ok")
    print(f"{done}/{len(result.rows)} points trained -> {v.out}")
    print(f"best: {best.overrides} valid accuracy {best.valid_acc:.4f} "
          f"({best.n_params} parameters)")


# ---- evaluation commands ----


def _part_docs(split: cp.CorpusSplit, part: str) -> list:
    if part not in ("train", "valid", "test"):
        raise UsageError(f"unknown split part {part!r}")
    docs = getattr(split, part)
    if not docs:
        raise cp.DataError(f"split part {part!r} is empty")
    return docs


def _predictions_for(model, docs) -> PredictionSet:
    if isinstance(model, Model):
        return collect_predictions(model, docs)
    return PredictionSet(model.scores(docs),
                         np.array([d.label for d in docs]))


def _cmd_eval(v) -> None:
    _need(v, "model", "split")
    model = load_any(v.model)
    split = cp.read_split(v.split)
    docs = _part_docs(split, v.part)
    preds = _predictions_for(model, docs)
    reference = None
    if v.reference_model:
        reference = _predictions_for(load_any(v.reference_model), docs)
    report = evaluate(preds, reference=reference)
    names = model.class_names if v.per_class else None
    text = render_report(report, class_names=names)
    print(text, end="")
    if v.out:
        dump_json(report.to_dict(), v.out)


def _cmd_compare(v) -> None:
    _need(v, "split", "model")
    named = {}
    for entry in v.model:
        if "=" not in entry:
            raise UsageError(f"expected NAME=PATH, got {entry!r}")
        name, path = entry.split("=", 1)
        named[name] = path
    if v.baseline not in named:
        raise cp.DataError(
            f"baseline {v.baseline!r} is not among the given models")
    split = cp.read_split(v.split)
    docs = _part_docs(split, v.part)
    preds = {name: _predictions_for(load_any(path), docs)
             for name, path in named.items()}
    text = render_comparison(compare_models(preds, v.baseline))
    print(text, end="")
    if v.out:
        Path(v.out).write_text(text, encoding="utf-8")


def _cmd_explain(v) -> None:
    _need(v, "model", "split")
    model = load_model(v.model)
    split = cp.read_split(v.split)
    docs = _part_docs(split, v.part)
    if not 0 <= v.index < len(docs):
        raise UsageError(f"--index must lie in [0, {len(docs)})")
    hdoc = extract_importance(model, docs[v.index])
    rendered = render_highlights(hdoc, model.class_names)
    print(rendered.text, end="")
    if v.out:
        Path(v.out).write_text(rendered.html, encoding="utf-8")


def _cmd_distill(v) -> None:
    _need(v, "model", "split", "out", "k")
    model = load_model(v.model)
    split = cp.read_split(v.split)
    dc = distill_top_k(model, split, v.k, source=str(v.split))
    write_distilled(dc, v.out)
    print(f"distilled top-{v.k} tokens for "
          f"{len(dc.split.all_documents())} documents -> {v.out}")


# ---- wiring ----


def build_parser() -> tuple[_Parser, dict]:
    parser = _Parser(prog="textclf",
                     description="recurrent text classifiers with "
                                 "interpretable aggregation")
    subparsers = parser.add_subparsers(dest="command")
    subs: dict = {}

    def command(name: str, help_text: str, runner) -> _Sub:
        sub = _Sub(parser=subparsers.add_parser(name, help=help_text))
        sub.run = runner
        sub.arg("--config", None, str, "key=value file; flags take precedence")
        subs[name] = sub
        return sub

    s = command("synth", "generate a keyword-planted corpus", _cmd_synth)
    s.arg("--out", None, str, "corpus file to write")
    s.arg("--classes", 5, int, "number of classes")
    s.arg("--docs-per-class", 100, int, "documents per class")
    s.arg("--keywords-per-class", 3, int, "planted keywords per class")
    s.arg("--min-tokens", 6, int, "shortest document length")
    s.arg("--max-tokens", 14, int, "longest document length")
    s.arg("--noise-vocab", 200, int, "number of filler tokens")
    s.arg("--period-rate", 0.12, float, "sentence break rate")
    s.arg("--seed", 0, int, "master random seed")

    s = command("prepare", "preprocess, deduplicate, and split a corpus",
                _cmd_prepare)
    s.arg("--corpus", None, str, "raw corpus file")
    s.arg("--out", None, str, "split directory to write")
    s.arg("--test-frac", 0.2, float, "newest fraction held out for testing")
    s.arg("--valid-frac", 0.2, float, "fraction held out for validation")
    s.arg("--min-test", 5, int, "drop classes with fewer test documents")

    s = command("embed", "train word vectors on the training split",
                _cmd_embed)
    s.arg("--split", None, str, "split directory")
    s.arg("--out", None, str, "vector file to write")
    s.arg("--dim", 60, int, "vector width")
    s.arg("--window", 15, int, "co-occurrence window")
    s.arg("--iterations", 50, int, "training passes")
    s.arg("--lr", 0.05, float, "adaptive step size")
    s.arg("--min-count", 5, int, "vocabulary frequency cutoff")
    s.arg("--seed", 0, int, "master random seed")
    s.arg("--relations", None, str, "analogy pair file (repeatable)",
          repeat=True)

    s = command("train", "fit one model on a prepared split", _cmd_train)
    s.arg("--split", None, str, "split directory")
    s.arg("--out", None, str, "model file to write")
    _add_model_flags(s)

    s = command("gridsearch", "train every point of a hyperparameter grid",
                _cmd_gridsearch)
    s.arg("--split", None, str, "split directory")
    s.arg("--grid", None, str, "JSON grid file with an axes table")
    s.arg("--out", None, str, "result table (CSV) to write")
    s.arg("--jobs", 1, int, "parallel workers")
    _add_model_flags(s)

    s = command("eval", "report the standard measures for one model",
                _cmd_eval)
    s.arg("--model", None, str, "model file")
    s.arg("--split", None, str, "split directory")
    s.arg("--part", "test", str, "which part to score",
          choices=("train", "valid", "test"))
    s.arg("--reference-model", None, str, "second model for fidelity")
    s.arg("--per-class", False, bool, "include the per-class table")
    s.arg("--out", None, str, "also write the report as JSON")

    s = command("compare", "significance table against a baseline model",
                _cmd_compare)
    s.arg("--split", None, str, "split directory")
    s.arg("--part", "test", str, "which part to score",
          choices=("train", "valid", "test"))
    s.arg("--model", None, str, "NAME=PATH model entry (repeatable)",
          repeat=True)
    s.arg("--baseline", "MAX", str, "row the others are tested against")
    s.arg("--out", None, str, "also write the table as text")

    s = command("explain", "render word importance for one document",
                _cmd_explain)
    s.arg("--model", None, str, "interpretable model file")
    s.arg("--split", None, str, "split directory")
    s.arg("--part", "test", str, "which part to read",
          choices=("train", "valid", "test"))
    s.arg("--index", 0, int, "document position within the part")
    s.arg("--out", None, str, "highlight page to write")

    s = command("distill", "keep only the most important k tokens",
                _cmd_distill)
    s.arg("--model", None, str, "interpretable model file")
    s.arg("--split", None, str, "split directory")
    s.arg("--k", None, int, "tokens to keep per document")
    s.arg("--out", None, str, "distilled split directory")

    return parser, subs


def main(argv=None) -> int:
    parser, subs = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("a subcommand is required (see --help)")
        sub = subs[args.command]
        sub.run(_resolve(sub, args))
        return EXIT_OK
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except cp.DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
