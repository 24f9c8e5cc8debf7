"""Optimization loop, validation-based selection, and grid search."""

from __future__ import annotations

import csv
import dataclasses
import itertools
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import tensor as tc
from .baseline import svm_predict, svm_train, tfidf_fit_transform, tfidf_transform
from .corpus import DataError, Document
from .embeddings import Vocabulary
from .networks import (ModelConfig, ModelParams, document_input, forward,
                       init_params)
from .tensor import NumericError, Tape
from .util import derive_seed


@dataclass
class TrainConfig:
    lr: float = 0.001
    batch_size: int = 32
    max_epochs: int = 50
    patience: int = 5
    seed: int = 0
    embedding_trainable: bool = True

    def __post_init__(self):
        if self.lr < 0.0:
            raise ValueError("lr must be nonnegative")
        if self.batch_size < 1 or self.patience < 1 or self.max_epochs < 1:
            raise ValueError("batch size, patience, and max epochs must be >= 1")


@dataclass
class TrainHistory:
    """Per-epoch trajectory; wall time is excluded from equality."""

    train_loss: list[float] = field(default_factory=list)
    train_acc: list[float] = field(default_factory=list)
    valid_acc: list[float] = field(default_factory=list)
    best_epoch: int = -1
    wall_time: float = field(default=0.0, compare=False)


@dataclass
class AdamState:
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


def adam_step(params: ModelParams, state: AdamState, lr: float, t: int,
              beta1: float = 0.9, beta2: float = 0.999,
              eps: float = 1e-8) -> None:
    """Biased-moment-corrected update on every tensor holding a gradient."""
    if t < 1:
        raise ValueError("step counter starts at 1")
    for name, tensor in params.tensors.items():
        if not tensor.requires_grad or tensor.grad is None:
            continue
        g = tensor.grad
        if not np.all(np.isfinite(g)):
            raise NumericError(f"non-finite gradient in {name}")
        if name not in state.m:
            state.m[name] = np.zeros_like(g)
            state.v[name] = np.zeros_like(g)
        m = state.m[name]
        v = state.v[name]
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g * g
        m_hat = m / (1.0 - beta1 ** t)
        v_hat = v / (1.0 - beta2 ** t)
        tensor.data -= lr * m_hat / (np.sqrt(v_hat) + eps)


def _accuracy(config: ModelConfig, params: ModelParams, inputs, labels) -> float:
    correct = 0
    for doc_in, label in zip(inputs, labels):
        pred = forward(config, params, doc_in)
        correct += int(pred.argmax == label)
    return correct / len(labels)


def train(config: ModelConfig, vocab: Vocabulary, train_docs: list[Document],
          valid_docs: list[Document], tcfg: TrainConfig,
          pretrained: dict[str, np.ndarray] | None = None
          ) -> tuple[ModelParams, TrainHistory]:
    """Minibatch cross-entropy descent with a best-validation snapshot.

    Shuffling and initialization derive from the one seed; identical calls
    produce identical parameters and histories.
    """
    if not train_docs or not valid_docs:
        raise DataError("train and validation splits must be non-empty")
    for doc in itertools.chain(train_docs, valid_docs):
        if not 0 <= doc.label < config.n_classes:
            raise DataError(f"label {doc.label} outside [0, {config.n_classes})")
    config = dataclasses.replace(
        config, embedding_trainable=tcfg.embedding_trainable)
    params = init_params(config, vocab, derive_seed(tcfg.seed, "init"),
                         pretrained)
    inputs = [document_input(config, vocab, d) for d in train_docs]
    labels = [d.label for d in train_docs]
    v_inputs = [document_input(config, vocab, d) for d in valid_docs]
    v_labels = [d.label for d in valid_docs]
    rng = np.random.default_rng(derive_seed(tcfg.seed, "shuffle"))
    state = AdamState()
    history = TrainHistory()
    best_snap = params.snapshot()
    best_acc = -1.0
    since_best = 0
    step = 0
    started = time.perf_counter()
    n = len(inputs)
    for epoch in range(tcfg.max_epochs):
        order = rng.permutation(n)
        total_loss = 0.0
        correct = 0
        for ofs in range(0, n, tcfg.batch_size):
            batch = order[ofs:ofs + tcfg.batch_size]
            params.zero_grad()
            for i in batch:
                with Tape() as tape:
                    pred = forward(config, params, inputs[i])
                    loss = tc.cross_entropy(pred.probs_t, labels[i])
                    value = float(loss.data)
                    if not np.isfinite(value):
                        raise NumericError(f"loss diverged at epoch {epoch}")
                    tape.backward(loss, seed=1.0 / len(batch))
                total_loss += value
                correct += int(pred.argmax == labels[i])
            step += 1
            adam_step(params, state, tcfg.lr, step)
        history.train_loss.append(total_loss / n)
        history.train_acc.append(correct / n)
        valid_acc = _accuracy(config, params, v_inputs, v_labels)
        history.valid_acc.append(valid_acc)
        if valid_acc > best_acc:
            best_acc = valid_acc
            best_snap = params.snapshot()
            history.best_epoch = epoch
            since_best = 0
        else:
            since_best += 1
            if since_best >= tcfg.patience:
                break
    params.restore(best_snap)
    history.wall_time = time.perf_counter() - started
    return params, history


# ---- grid search ----

@dataclass
class HyperGrid:
    """Named axes; a name may join several config fields with '+'."""

    axes: dict[str, list]

    def __post_init__(self):
        if not self.axes or any(not vals for vals in self.axes.values()):
            raise ValueError("every axis needs at least one value")

    def points(self) -> list[dict]:
        names = list(self.axes)
        out = []
        for combo in itertools.product(*(self.axes[n] for n in names)):
            overrides = {}
            for name, value in zip(names, combo):
                for fld in name.split("+"):
                    overrides[fld] = value
            out.append(overrides)
        return out

    def size(self) -> int:
        size = 1
        for vals in self.axes.values():
            size *= len(vals)
        return size


@dataclass
class GridRow:
    index: int
    overrides: dict
    valid_acc: float | None
    n_params: int | None
    status: str
    error: str = ""


@dataclass
class GridResult:
    family: str
    axes: list[str]
    rows: list[GridRow]

    def ranked(self) -> list[GridRow]:
        done = [r for r in self.rows if r.status == "ok"]
        return sorted(done, key=lambda r: (-r.valid_acc, r.n_params, r.index))

    def best(self) -> GridRow:
        ranked = self.ranked()
        if not ranked:
            raise DataError("no grid point trained successfully")
        return ranked[0]

    def write_csv(self, path: str | Path) -> None:
        fields = []
        for name in self.axes:
            fields.extend(name.split("+"))
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["rank", "index", *fields, "n_params",
                             "valid_acc", "status", "error"])
            order = self.ranked()
            rank_of = {r.index: i + 1 for i, r in enumerate(order)}
            for row in sorted(self.rows, key=lambda r: (rank_of.get(r.index, 10 ** 9), r.index)):
                writer.writerow([
                    rank_of.get(row.index, ""),
                    row.index,
                    *(row.overrides.get(f, "") for f in fields),
                    "" if row.n_params is None else row.n_params,
                    "" if row.valid_acc is None else repr(row.valid_acc),
                    row.status,
                    row.error,
                ])


SVM_FIELDS = {"c", "epochs", "ngram_max", "lr0"}


def _svm_point(overrides: dict, train_docs, valid_docs,
               tcfg: TrainConfig) -> tuple[float, int]:
    kw = {"c": 1.0, "epochs": 30, "ngram_max": 1, "lr0": 0.1}
    kw.update(overrides)
    tfidf, x_train = tfidf_fit_transform(train_docs,
                                         ngram_max=int(kw["ngram_max"]))
    y_train = np.array([d.label for d in train_docs])
    linear = svm_train(x_train, y_train, c=float(kw["c"]),
                       epochs=int(kw["epochs"]), seed=tcfg.seed,
                       lr0=float(kw["lr0"]))
    x_valid = tfidf_transform(tfidf, valid_docs)
    y_valid = np.array([d.label for d in valid_docs])
    pred, _ = svm_predict(linear, x_valid)
    acc = float(np.mean(pred == y_valid))
    return acc, linear.weights.size + linear.bias.size


def _run_point(args) -> GridRow:
    (index, family, base_fields, overrides, vocab, train_docs, valid_docs,
     tcfg, pretrained) = args
    try:
        if family == "SVM":
            unknown = set(overrides) - SVM_FIELDS
            if unknown:
                raise ValueError(f"unknown grid fields {sorted(unknown)}")
            acc, n_params = _svm_point(overrides, train_docs, valid_docs, tcfg)
        else:
            unknown = set(overrides) - set(ModelConfig.__dataclass_fields__)
            if unknown:
                raise ValueError(f"unknown grid fields {sorted(unknown)}")
            fields = dict(base_fields)
            fields.update(overrides)
            config = ModelConfig.from_dict(fields)
            params, history = train(config, vocab, train_docs, valid_docs,
                                    tcfg, pretrained)
            acc = max(history.valid_acc)
            n_params = params.n_params()
        return GridRow(index=index, overrides=overrides, valid_acc=acc,
                       n_params=n_params, status="ok")
    except Exception as exc:  # noqa: BLE001 - single-point failure is data
        return GridRow(index=index, overrides=overrides, valid_acc=None,
                       n_params=None, status="failed",
                       error=f"{type(exc).__name__}: {exc}")


def grid_search(family: str, base_config: ModelConfig | None, grid: HyperGrid,
                vocab: Vocabulary | None, train_docs: list[Document],
                valid_docs: list[Document], tcfg: TrainConfig,
                pretrained: dict[str, np.ndarray] | None = None,
                jobs: int = 1) -> GridResult:
    """Train every grid point with the same seed; rank by validation accuracy,
    then fewer parameters, then enumeration order.  A failed point is recorded
    and the search continues."""
    points = grid.points()
    base_fields = base_config.to_dict() if base_config is not None else {}
    tasks = [(i, family, base_fields, overrides, vocab, train_docs,
              valid_docs, tcfg, pretrained)
             for i, overrides in enumerate(points)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_run_point, tasks))
    else:
        rows = [_run_point(t) for t in tasks]
    rows.sort(key=lambda r: r.index)
    return GridResult(family=family, axes=list(grid.axes), rows=rows)
