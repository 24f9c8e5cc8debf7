"""Bag-of-words features with inverse-document-frequency weighting and a
one-vs-rest max-margin linear classifier trained by stochastic subgradients."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .corpus import DataError, Document


@dataclass
class TfidfModel:
    """Term-to-column map with smoothed idf weights, fixed after fit."""

    columns: dict[str, int]
    idf: np.ndarray
    df: np.ndarray
    ngram_max: int = 1


def _terms(tokens: list[str], ngram_max: int):
    yield from tokens
    if ngram_max >= 2:
        for a, b in zip(tokens, tokens[1:]):
            yield f"{a} {b}"


def tfidf_fit_transform(docs: list[Document],
                        ngram_max: int = 1) -> tuple[TfidfModel, np.ndarray]:
    """tf is the raw count, idf = ln((1+N)/(1+df)) + 1, rows L2-normalized."""
    if not docs:
        raise DataError("empty corpus")
    if ngram_max not in (1, 2):
        raise ValueError("ngram_max must be 1 or 2")
    df_counts: dict[str, int] = {}
    for doc in docs:
        for term in set(_terms(doc.tokens, ngram_max)):
            df_counts[term] = df_counts.get(term, 0) + 1
    terms = sorted(df_counts)
    columns = {t: i for i, t in enumerate(terms)}
    df = np.array([df_counts[t] for t in terms], dtype=np.float64)
    n = len(docs)
    idf = np.log((1.0 + n) / (1.0 + df)) + 1.0
    model = TfidfModel(columns=columns, idf=idf, df=df, ngram_max=ngram_max)
    return model, tfidf_transform(model, docs)


def tfidf_transform(model: TfidfModel, docs: list[Document]) -> np.ndarray:
    x = np.zeros((len(docs), len(model.columns)))
    for i, doc in enumerate(docs):
        for term in _terms(doc.tokens, model.ngram_max):
            col = model.columns.get(term)
            if col is not None:
                x[i, col] += 1.0
        x[i] *= model.idf
        norm = np.linalg.norm(x[i])
        if norm > 0.0:
            x[i] /= norm
    return x


@dataclass
class LinearModel:
    """One weight column and bias per class."""

    weights: np.ndarray   # (F, K)
    bias: np.ndarray      # (K,)
    c: float
    objective_history: list[float] = field(default_factory=list)


def _objective(w, b, x, targets, lam):
    margins = 1.0 - targets * (x @ w + b)
    hinge = np.maximum(margins, 0.0).sum(axis=0) / x.shape[0]
    return float(hinge.sum() + 0.5 * lam * (w * w).sum())


def svm_train(x: np.ndarray, y: np.ndarray, c: float = 1.0, epochs: int = 30,
              seed: int = 0, lr0: float = 0.1) -> LinearModel:
    """Hinge loss per class (one vs rest) with L2 penalty 1/(2Cn) * ||w||^2.

    Stochastic subgradient steps with decay lr0/(1 + lr0*lam*t), one pass
    order per epoch from the seed; all classes update on each sample.
    """
    y = np.asarray(y, dtype=int)
    classes = np.unique(y)
    if classes.size < 2:
        raise DataError("need at least 2 classes to train")
    k = int(classes.max()) + 1
    n, f = x.shape
    lam = 1.0 / (c * n)
    targets = np.full((n, k), -1.0)
    targets[np.arange(n), y] = 1.0
    rng = np.random.default_rng(seed)
    w = np.zeros((f, k))
    b = np.zeros(k)
    history = []
    t = 0
    for _epoch in range(epochs):
        for i in rng.permutation(n):
            lr = lr0 / (1.0 + lr0 * lam * t)
            t += 1
            row = x[i]
            scores = row @ w + b
            viol = targets[i] * scores < 1.0
            w *= 1.0 - lr * lam
            if viol.any():
                push = targets[i] * viol
                w += lr * np.outer(row, push)
                b += lr * push
        history.append(_objective(w, b, x, targets, lam))
    model = LinearModel(weights=w, bias=b, c=c, objective_history=history)
    return model


def svm_predict(model: LinearModel,
                x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Argmax of per-class decision values; first index wins ties."""
    scores = x @ model.weights + model.bias
    return scores.argmax(axis=1), scores


@dataclass
class SvmModel:
    """Vectorizer and linear classifier trained as one unit."""

    tfidf: TfidfModel
    linear: LinearModel
    class_names: list[str]

    def scores(self, docs: list[Document]) -> np.ndarray:
        return svm_predict(self.linear, tfidf_transform(self.tfidf, docs))[1]
