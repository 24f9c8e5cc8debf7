"""Vocabulary, windowed co-occurrence counts, and word-vector training.

Vectors come from weighted least squares on log co-occurrence counts,
fit by adaptive-rate stochastic updates over the nonzero cells; the final
vector for a word is the sum of its main and context rows.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .corpus import DataError, Document
from .tensor import NumericError

UNK_TOKEN = "<UNK>"
UNK = 0


@dataclass
class Vocabulary:
    """Token table with a reserved unknown slot at index 0."""

    tokens: list[str]
    index: dict[str, int]
    counts: list[int]

    @property
    def size(self) -> int:
        return len(self.tokens)

    def id(self, token: str) -> int:
        return self.index.get(token, UNK)

    def ids(self, tokens: list[str]) -> np.ndarray:
        return np.array([self.index.get(t, UNK) for t in tokens], dtype=np.intp)


def build_vocabulary(docs: list[Document], min_count: int = 5) -> Vocabulary:
    raw: dict[str, int] = {}
    for doc in docs:
        for tok in doc.tokens:
            raw[tok] = raw.get(tok, 0) + 1
    kept = sorted((t for t, c in raw.items() if c >= min_count),
                  key=lambda t: (-raw[t], t))
    dropped = sum(c for t, c in raw.items() if c < min_count)
    tokens = [UNK_TOKEN] + kept
    counts = [dropped] + [raw[t] for t in kept]
    return Vocabulary(tokens=tokens,
                      index={t: i for i, t in enumerate(tokens)},
                      counts=counts)


@dataclass
class CooccurrenceTable:
    """Sparse symmetric table of distance-damped pair weights."""

    cells: dict[tuple[int, int], float] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.cells)

    def get(self, i: int, j: int) -> float:
        return self.cells.get((i, j), 0.0)


def count_cooccurrences(docs: list[Document], vocab: Vocabulary,
                        window: int = 15) -> CooccurrenceTable:
    """Each position pair at distance d <= window adds 1/d to both mirror
    cells (the diagonal receives it once).  Unknown tokens are skipped."""
    cells: dict[tuple[int, int], float] = {}
    for doc in docs:
        ids = [vocab.index.get(t, UNK) for t in doc.tokens]
        n = len(ids)
        for s in range(n):
            a = ids[s]
            if a == UNK:
                continue
            for t in range(s + 1, min(s + window, n - 1) + 1):
                b = ids[t]
                if b == UNK:
                    continue
                w = 1.0 / (t - s)
                cells[(a, b)] = cells.get((a, b), 0.0) + w
                if a != b:
                    cells[(b, a)] = cells.get((b, a), 0.0) + w
    return CooccurrenceTable(cells=cells)


@dataclass
class WordVectors:
    dim: int
    main: np.ndarray          # (V, p)
    context: np.ndarray       # (V, p)
    bias_main: np.ndarray     # (V,)
    bias_context: np.ndarray  # (V,)
    loss_history: list[float] = field(default_factory=list)

    @property
    def final(self) -> np.ndarray:
        return self.main + self.context


def _weight(x: float, x_max: float, alpha: float) -> float:
    return 1.0 if x >= x_max else (x / x_max) ** alpha


def train_embeddings(table: CooccurrenceTable, n_words: int, p: int = 60,
                     iterations: int = 50, lr: float = 0.05, seed: int = 0,
                     x_max: float = 100.0, alpha: float = 0.75) -> WordVectors:
    """Adaptive-rate SGD on sum f(X_ij) (w_i.w~_j + b_i + b~_j - ln X_ij)^2."""
    if len(table) == 0:
        raise DataError("empty co-occurrence table")
    rng = np.random.default_rng(seed)
    scale = 0.5 / p
    main = rng.uniform(-scale, scale, size=(n_words, p))
    context = rng.uniform(-scale, scale, size=(n_words, p))
    bias_main = rng.uniform(-scale, scale, size=n_words)
    bias_context = rng.uniform(-scale, scale, size=n_words)
    sq_main = np.ones_like(main)
    sq_context = np.ones_like(context)
    sq_bm = np.ones_like(bias_main)
    sq_bc = np.ones_like(bias_context)

    pairs = list(table.cells.items())
    logs = np.array([math.log(x) for _, x in pairs])
    weights = np.array([_weight(x, x_max, alpha) for _, x in pairs])
    history: list[float] = []
    for _epoch in range(iterations):
        order = rng.permutation(len(pairs))
        cost = 0.0
        for k in order:
            (i, j), _x = pairs[k]
            diff = float(main[i] @ context[j]) + bias_main[i] + bias_context[j] - logs[k]
            fdiff = weights[k] * diff
            cost += 0.5 * fdiff * diff
            g_main = fdiff * context[j]
            g_ctx = fdiff * main[i]
            main[i] -= lr * g_main / np.sqrt(sq_main[i])
            context[j] -= lr * g_ctx / np.sqrt(sq_context[j])
            sq_main[i] += g_main * g_main
            sq_context[j] += g_ctx * g_ctx
            bias_main[i] -= lr * fdiff / math.sqrt(sq_bm[i])
            bias_context[j] -= lr * fdiff / math.sqrt(sq_bc[j])
            sq_bm[i] += fdiff * fdiff
            sq_bc[j] += fdiff * fdiff
        if not np.isfinite(cost):
            raise NumericError(f"embedding loss diverged at epoch {_epoch}")
        history.append(cost)
    return WordVectors(dim=p, main=main, context=context, bias_main=bias_main,
                       bias_context=bias_context, loss_history=history)


# ---- analogy evaluation ----

@dataclass
class RelationSet:
    name: str
    pairs: list[tuple[str, str]]


@dataclass
class AnalogyResult:
    name: str
    accuracy: float | None
    queries: int
    hits: int
    skipped_pairs: int


def analogy_eval(vectors: np.ndarray, vocab: Vocabulary,
                 relations: list[RelationSet]) -> list[AnalogyResult]:
    """Top-1 accuracy of b - a + c -> d by cosine, excluding a, b, c.

    Pairs with out-of-vocabulary words are skipped and counted; a relation
    with fewer than two usable pairs yields an undefined accuracy.
    """
    norms = np.linalg.norm(vectors, axis=1)
    unit = vectors / np.maximum(norms, 1e-12)[:, None]
    results = []
    for rel in relations:
        usable = []
        skipped = 0
        for a, b in rel.pairs:
            ia, ib = vocab.index.get(a, UNK), vocab.index.get(b, UNK)
            if ia == UNK or ib == UNK:
                skipped += 1
            else:
                usable.append((ia, ib))
        hits = 0
        queries = 0
        for ia, ib in usable:
            for ic, id_ in usable:
                if (ic, id_) == (ia, ib):
                    continue
                q = vectors[ib] - vectors[ia] + vectors[ic]
                qn = np.linalg.norm(q)
                scores = unit @ (q / max(qn, 1e-12))
                scores[[ia, ib, ic, UNK]] = -np.inf
                if int(np.argmax(scores)) == id_:
                    hits += 1
                queries += 1
        accuracy = hits / queries if queries else None
        results.append(AnalogyResult(name=rel.name, accuracy=accuracy,
                                     queries=queries, hits=hits,
                                     skipped_pairs=skipped))
    return results


# ---- file formats ----

def write_vectors(path: str | Path, vocab: Vocabulary,
                  vectors: np.ndarray) -> None:
    lines = []
    for i in range(1, vocab.size):
        vals = " ".join(format(v, ".17g") for v in vectors[i])
        lines.append(f"{vocab.tokens[i]} {vals}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_vectors(path: str | Path) -> dict[str, np.ndarray]:
    path = Path(path)
    if not path.exists():
        raise DataError(f"vector file not found: {path}")
    out: dict[str, np.ndarray] = {}
    dim = None
    with path.open(encoding="utf-8") as fh:
        for ln, line in enumerate(fh, start=1):
            parts = line.split()
            if not parts:
                continue
            try:
                vec = np.array([float(x) for x in parts[1:]])
            except ValueError as exc:
                raise DataError(f"{path}:{ln}: bad vector: {exc}") from exc
            if vec.size == 0:
                raise DataError(f"{path}:{ln}: vector has no values")
            if dim is None:
                dim = vec.size
            elif vec.size != dim:
                raise DataError(f"{path}:{ln}: dimension mismatch")
            out[parts[0]] = vec
    return out


def read_relations(path: str | Path) -> RelationSet:
    path = Path(path)
    if not path.exists():
        raise DataError(f"relation file not found: {path}")
    pairs = []
    with path.open(encoding="utf-8") as fh:
        for ln, line in enumerate(fh, start=1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 2:
                raise DataError(f"{path}:{ln}: expected 'a b'")
            pairs.append((parts[0].upper(), parts[1].upper()))
    return RelationSet(name=path.stem, pairs=pairs)
