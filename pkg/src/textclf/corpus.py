"""Document model: preprocessing, splits, and a seeded synthetic generator.

Records carry three free-text fields that are merged, uppercased, and
tokenized; splits are temporal; a synthetic corpus with planted per-class
keywords serves as the desk-scale oracle for everything downstream.
"""

from __future__ import annotations

import dataclasses
import datetime as dt
import json
import string
from dataclasses import dataclass, field
from math import ceil
from pathlib import Path

import numpy as np

PERIOD = "."
_PUNCT = set(string.punctuation)


class DataError(ValueError):
    """Malformed or unusable input data."""


class SkipRecord(Exception):
    """Record has no usable text and should be dropped."""


@dataclass(frozen=True)
class RawRecord:
    """One registry entry before preprocessing."""

    macroscopy: str = ""
    diagnosis: str = ""
    anamnesis: str = ""
    label: str = ""
    inserted_at: dt.date = dt.date(2000, 1, 1)


@dataclass
class Document:
    tokens: list[str]
    sentences: list[tuple[int, int]]
    label_code: str
    label: int = -1
    inserted_at: dt.date = dt.date(2000, 1, 1)

    def key(self) -> tuple[str, ...]:
        return tuple(self.tokens)


@dataclass
class CorpusSplit:
    train: list[Document]
    valid: list[Document]
    test: list[Document]
    class_map: dict[str, int]

    @property
    def n_classes(self) -> int:
        return len(self.class_map)

    def all_documents(self) -> list[Document]:
        return self.train + self.valid + self.test


# ---- preprocessing ----

def tokenize(text: str) -> list[str]:
    """Whitespace split, then peel leading/trailing punctuation into own tokens."""
    out: list[str] = []
    for piece in text.upper().split():
        lead: list[str] = []
        trail: list[str] = []
        while piece and piece[0] in _PUNCT:
            lead.append(piece[0])
            piece = piece[1:]
        while piece and piece[-1] in _PUNCT:
            trail.append(piece[-1])
            piece = piece[:-1]
        out.extend(lead)
        if piece:
            out.append(piece)
        out.extend(reversed(trail))
    return out


def preprocess(record: RawRecord) -> Document:
    """Merge the three text fields (period-separated), uppercase, tokenize."""
    parts = [tokenize(text) for text in
             (record.macroscopy, record.diagnosis, record.anamnesis)
             if text and text.strip()]
    parts = [p for p in parts if p]
    if not parts:
        raise SkipRecord("all text fields empty")
    tokens: list[str] = []
    for i, part in enumerate(parts):
        if i:
            tokens.append(PERIOD)
        tokens.extend(part)
    return Document(tokens=tokens, sentences=[], label_code=record.label,
                    inserted_at=record.inserted_at)


def segment_sentences(doc: Document) -> Document:
    """Half-open token ranges, breaking after each standalone period token."""
    if not doc.tokens:
        raise DataError("cannot segment an empty document")
    ranges: list[tuple[int, int]] = []
    start = 0
    for i, tok in enumerate(doc.tokens):
        if tok == PERIOD:
            ranges.append((start, i + 1))
            start = i + 1
    if start < len(doc.tokens):
        ranges.append((start, len(doc.tokens)))
    return dataclasses.replace(doc, sentences=ranges)


def preprocess_all(records: list[RawRecord]) -> list[Document]:
    docs = []
    for rec in records:
        try:
            docs.append(segment_sentences(preprocess(rec)))
        except SkipRecord:
            continue
    return docs


# ---- corpus shaping ----

def deduplicate(docs: list[Document]) -> list[Document]:
    """Keep the earliest-dated copy of each exact token sequence."""
    best: dict[tuple[str, ...], int] = {}
    for i, doc in enumerate(docs):
        k = doc.key()
        if k not in best:
            best[k] = i
        else:
            j = best[k]
            if (doc.inserted_at, i) < (docs[j].inserted_at, j):
                best[k] = i
    keep = sorted(best.values())
    return [docs[i] for i in keep]


def temporal_split(docs: list[Document], test_frac: float = 0.2,
                   valid_frac: float = 0.2) -> CorpusSplit:
    """Sort by date (stable), newest slice to test, the one before to valid."""
    if len(docs) < 3:
        raise DataError("need at least 3 documents to split")
    if not (0.0 < test_frac < 1.0 and 0.0 < valid_frac < 1.0
            and test_frac + valid_frac < 1.0):
        raise DataError("split fractions must lie in (0,1) and sum below 1")
    order = sorted(range(len(docs)), key=lambda i: (docs[i].inserted_at, i))
    n = len(docs)
    n_test = ceil(test_frac * n)
    n_valid = ceil(valid_frac * n)
    if n_test + n_valid >= n:
        raise DataError("split fractions leave no training data")
    labels = sorted({docs[i].label_code for i in order})
    class_map = {name: k for k, name in enumerate(labels)}
    relabeled = [dataclasses.replace(docs[i], label=class_map[docs[i].label_code])
                 for i in order]
    train = relabeled[: n - n_valid - n_test]
    valid = relabeled[n - n_valid - n_test: n - n_test]
    test = relabeled[n - n_test:]
    return CorpusSplit(train=train, valid=valid, test=test, class_map=class_map)


def filter_rare_classes(split: CorpusSplit, min_test: int = 5) -> CorpusSplit:
    """Drop classes with fewer than min_test test documents; recompact indices."""
    counts = np.zeros(split.n_classes, dtype=int)
    for doc in split.test:
        counts[doc.label] += 1
    survivors = [name for name, idx in sorted(split.class_map.items(),
                                              key=lambda kv: kv[1])
                 if counts[idx] >= min_test]
    if not survivors:
        raise DataError("no class keeps enough test documents")
    new_map = {name: k for k, name in enumerate(survivors)}

    def keep(docs: list[Document]) -> list[Document]:
        return [dataclasses.replace(d, label=new_map[d.label_code])
                for d in docs if d.label_code in new_map]

    return CorpusSplit(train=keep(split.train), valid=keep(split.valid),
                       test=keep(split.test), class_map=new_map)


# ---- synthetic generator ----

@dataclass
class GenSpec:
    """Shape of a synthetic keyword-planted corpus."""

    n_classes: int
    keywords_per_class: int = 3
    docs_per_class: int | list[int] = 100
    min_tokens: int = 6
    max_tokens: int = 14
    noise_vocab: int = 200
    period_rate: float = 0.12
    seed: int = 0
    class_keywords: list[list[str]] | None = None
    max_keyword_overlap: float = 0.0

    def counts(self) -> list[int]:
        if isinstance(self.docs_per_class, int):
            return [self.docs_per_class] * self.n_classes
        if len(self.docs_per_class) != self.n_classes:
            raise DataError("docs_per_class length must match n_classes")
        return list(self.docs_per_class)


def class_label(c: int) -> str:
    return f"C{c:02d}"


def generate_synthetic(spec: GenSpec) -> tuple[list[RawRecord], dict]:
    """Seeded corpus where each document plants 1-3 of its class's keywords.

    Documents are dated by their within-class position so every class spreads
    evenly over the timeline and a temporal split stays class-balanced.
    """
    if spec.n_classes < 2:
        raise DataError("need at least 2 classes")
    rng = np.random.default_rng(spec.seed)
    if spec.class_keywords is not None:
        keywords = [list(ks) for ks in spec.class_keywords]
        if len(keywords) != spec.n_classes:
            raise DataError("class_keywords length must match n_classes")
    else:
        keywords = [[f"KW{c:03d}{chr(65 + j)}" for j in range(spec.keywords_per_class)]
                    for c in range(spec.n_classes)]
    warnings: list[str] = []
    sets = [set(ks) for ks in keywords]
    for a in range(spec.n_classes):
        for b in range(a + 1, spec.n_classes):
            shared = sets[a] & sets[b]
            if not shared:
                continue
            ratio = len(shared) / min(len(sets[a]), len(sets[b]))
            if ratio > spec.max_keyword_overlap:
                warnings.append(
                    f"classes {class_label(a)} and {class_label(b)} share "
                    f"{len(shared)} keywords (overlap {ratio:.2f})")
    noise = [f"NSE{i:03d}" for i in range(spec.noise_vocab)]
    counts = spec.counts()

    staged: list[tuple[float, int, int, RawRecord]] = []
    for c in range(spec.n_classes):
        for j in range(counts[c]):
            frac = (j + 0.5) / counts[c]
            n_tok = int(rng.integers(spec.min_tokens, spec.max_tokens + 1))
            toks = [noise[i] for i in rng.integers(0, len(noise), n_tok)]
            n_kw = int(rng.integers(1, 4))
            spots = rng.choice(n_tok, size=min(n_kw, n_tok), replace=False)
            for s in spots:
                toks[s] = keywords[c][int(rng.integers(0, len(keywords[c])))]
            mask = rng.random(n_tok) < spec.period_rate
            with_periods: list[str] = []
            for t, tok in enumerate(toks):
                with_periods.append(tok)
                if mask[t]:
                    with_periods.append(PERIOD)
            cuts = sorted(int(x) for x in rng.integers(0, len(with_periods) + 1, 2))
            fields = (" ".join(with_periods[:cuts[0]]),
                      " ".join(with_periods[cuts[0]:cuts[1]]),
                      " ".join(with_periods[cuts[1]:]))
            rec = RawRecord(macroscopy=fields[0], diagnosis=fields[1],
                            anamnesis=fields[2], label=class_label(c))
            staged.append((frac, c, j, rec))

    staged.sort(key=lambda item: (item[0], item[1], item[2]))
    base = dt.date(2015, 1, 1)
    span_days = 1460
    records = []
    for frac, _c, _j, rec in staged:
        day = base + dt.timedelta(days=int(frac * span_days))
        records.append(dataclasses.replace(rec, inserted_at=day))
    meta = {
        "n_classes": spec.n_classes,
        "keywords": {class_label(c): keywords[c] for c in range(spec.n_classes)},
        "noise_vocab": spec.noise_vocab,
        "seed": spec.seed,
        "warnings": warnings,
    }
    return records, meta


# ---- file formats ----

def write_corpus(path: str | Path, records: list[RawRecord],
                 meta: dict | None = None) -> None:
    lines = []
    if meta is not None:
        lines.append(json.dumps({"_meta": meta}, sort_keys=True, ensure_ascii=False))
    for rec in records:
        lines.append(json.dumps({
            "macroscopy": rec.macroscopy,
            "diagnosis": rec.diagnosis,
            "anamnesis": rec.anamnesis,
            "label": rec.label,
            "inserted_at": rec.inserted_at.isoformat(),
        }, sort_keys=True, ensure_ascii=False))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_corpus(path: str | Path) -> tuple[list[RawRecord], dict | None]:
    path = Path(path)
    if not path.exists():
        raise DataError(f"corpus file not found: {path}")
    records: list[RawRecord] = []
    meta: dict | None = None
    with path.open(encoding="utf-8") as fh:
        for ln, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}:{ln}: invalid record: {exc}") from exc
            if ln == 1 and isinstance(obj, dict) and "_meta" in obj:
                meta = obj["_meta"]
                continue
            if not isinstance(obj, dict):
                raise DataError(f"{path}:{ln}: record must be an object")
            try:
                records.append(RawRecord(
                    macroscopy=obj.get("macroscopy", "") or "",
                    diagnosis=obj.get("diagnosis", "") or "",
                    anamnesis=obj.get("anamnesis", "") or "",
                    label=str(obj.get("label", "")),
                    inserted_at=dt.date.fromisoformat(obj["inserted_at"]),
                ))
            except (KeyError, ValueError) as exc:
                raise DataError(f"{path}:{ln}: bad field: {exc}") from exc
    return records, meta


def _doc_to_obj(doc: Document) -> dict:
    return {
        "tokens": doc.tokens,
        "sentences": [list(r) for r in doc.sentences],
        "label": doc.label,
        "label_code": doc.label_code,
        "inserted_at": doc.inserted_at.isoformat(),
    }


def _doc_from_obj(obj: dict) -> Document:
    return Document(
        tokens=list(obj["tokens"]),
        sentences=[tuple(r) for r in obj["sentences"]],
        label=int(obj["label"]),
        label_code=str(obj["label_code"]),
        inserted_at=dt.date.fromisoformat(obj["inserted_at"]),
    )


def write_split(dirpath: str | Path, split: CorpusSplit) -> None:
    dirpath = Path(dirpath)
    dirpath.mkdir(parents=True, exist_ok=True)
    for name, docs in (("train", split.train), ("valid", split.valid),
                       ("test", split.test)):
        lines = [json.dumps(_doc_to_obj(d), sort_keys=True, ensure_ascii=False)
                 for d in docs]
        (dirpath / f"{name}.jsonl").write_text(
            "\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")
    (dirpath / "class_map.json").write_text(
        json.dumps(split.class_map, sort_keys=True, indent=2) + "\n",
        encoding="utf-8")


def read_split(dirpath: str | Path) -> CorpusSplit:
    dirpath = Path(dirpath)
    if not (dirpath / "class_map.json").exists():
        raise DataError(f"not a split directory: {dirpath}")
    class_map = json.loads((dirpath / "class_map.json").read_text(encoding="utf-8"))
    parts: dict[str, list[Document]] = {}
    for name in ("train", "valid", "test"):
        fp = dirpath / f"{name}.jsonl"
        if not fp.exists():
            raise DataError(f"missing split file: {fp}")
        docs = []
        with fp.open(encoding="utf-8") as fh:
            for ln, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                try:
                    docs.append(_doc_from_obj(json.loads(line)))
                except (json.JSONDecodeError, KeyError, ValueError) as exc:
                    raise DataError(f"{fp}:{ln}: bad document: {exc}") from exc
        parts[name] = docs
    return CorpusSplit(train=parts["train"], valid=parts["valid"],
                       test=parts["test"], class_map=class_map)
