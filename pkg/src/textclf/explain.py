"""Word-importance extraction, banded highlighting, and top-k distillation."""

from __future__ import annotations

import html as html_mod
from dataclasses import dataclass, replace
from html.parser import HTMLParser
from pathlib import Path

import numpy as np

from .corpus import CorpusSplit, Document
from .corpus import write_split
from .util import dump_json

# importance bands; the top interval is closed below so 0.8 lands in "high"
BAND_HIGH = 0.8
BAND_MEDIUM = 0.3
BAND_LOW = 0.1
_BAND_RANK = {"low": 1, "medium": 2, "high": 3}

PALETTE = ("#c0392b", "#2560a8", "#1e8449", "#b0541b", "#7d3c98", "#117a8b")

DISTILL_META = "distill.json"


def band(u: float) -> str | None:
    """Threshold band for one importance score; None below the mark floor."""
    if u >= BAND_HIGH:
        return "high"
    if u >= BAND_MEDIUM:
        return "medium"
    if u >= BAND_LOW:
        return "low"
    return None


# ---- extraction ----


@dataclass
class HighlightedDocument:
    """Tokens with per-class banded marks and the set of relevant classes."""

    tokens: list
    importance: np.ndarray
    marks: list
    relevant: set


def extract_importance(model, doc: Document) -> HighlightedDocument:
    """Band every word score of an interpretable model on one document."""
    if not model.config.interpretable:
        raise ValueError("importance extraction needs the interpretable variant")
    pred = model.predict(doc)
    imp = pred.importance
    marks = []
    relevant: set = set()
    for t in range(len(doc.tokens)):
        row = []
        for j in range(imp.shape[0]):
            b = band(float(imp[j, t]))
            if b is not None:
                row.append((j, b))
                relevant.add(j)
        marks.append(row)
    return HighlightedDocument(list(doc.tokens), imp, marks, relevant)


def _strongest(row) -> tuple | None:
    """Pick the mark to draw: deepest band, then lowest class index."""
    if not row:
        return None
    return min(row, key=lambda m: (-_BAND_RANK[m[1]], m[0]))


# ---- rendering ----


@dataclass
class RenderedHighlights:
    """Hypertext and terminal view of the same highlighted document."""

    html: str
    text: str


_CSS = """\
body { font-family: sans-serif; max-width: 60em; margin: 2em auto; }
.tok { text-decoration: none; }
.b-low { border-bottom: 1px solid; }
.b-medium { border-bottom: 3px solid; }
.b-high { border-bottom: 5px double; }
.legend { margin-top: 1.5em; font-size: 0.9em; }
.swatch { display: inline-block; width: 0.8em; height: 0.8em; margin-right: 0.4em; }
"""

_ANSI = {"low": "\x1b[4m", "medium": "\x1b[1;4m", "high": "\x1b[1;4;7m"}
_RESET = "\x1b[0m"


def render_highlights(hdoc: HighlightedDocument, class_names) -> RenderedHighlights:
    """Emit a self-contained hypertext page and a monochrome terminal view."""
    order = sorted(hdoc.relevant)
    color = {j: PALETTE[i % len(PALETTE)] for i, j in enumerate(order)}
    cycled = len(order) > len(PALETTE)

    parts = ["<html><head><meta charset=\"utf-8\">",
             f"<style>{_CSS}</style></head><body><p>"]
    spans = []
    for tok, row in zip(hdoc.tokens, hdoc.marks):
        esc = html_mod.escape(tok)
        top = _strongest(row)
        if top is None:
            spans.append(f'<span class="tok">{esc}</span>')
        else:
            j, b = top
            data = ";".join(f"{c}:{bb}" for c, bb in row)
            spans.append(f'<span class="tok b-{b}" data-marks="{data}" '
                         f'style="border-color:{color[j]};color:{color[j]}">'
                         f"{esc}</span>")
    parts.append(" ".join(spans))
    parts.append("</p><div class=\"legend\">")
    for j in order:
        parts.append(f'<div><span class="swatch" '
                     f'style="background:{color[j]}"></span>'
                     f"{html_mod.escape(str(class_names[j]))}</div>")
    if cycled:
        parts.append(f"<div>palette cycles after {len(PALETTE)} classes</div>")
    parts.append("</div></body></html>")
    page = "\n".join(parts)

    words = []
    for tok, row in zip(hdoc.tokens, hdoc.marks):
        top = _strongest(row)
        if top is None:
            words.append(tok)
        else:
            words.append(f"{_ANSI[top[1]]}{tok}{_RESET}")
    lines = [" ".join(words)]
    if order:
        lines.append("")
        lines.append("relevant: " + ", ".join(str(class_names[j]) for j in order))
    return RenderedHighlights(html=page, text="\n".join(lines) + "\n")


class _TokenCollector(HTMLParser):
    def __init__(self):
        super().__init__()
        self.tokens: list = []
        self._depth = 0

    def handle_starttag(self, tag, attrs):
        if tag == "span" and any(
                k == "class" and "tok" in v.split() for k, v in attrs if v):
            self._depth += 1
            self.tokens.append("")

    def handle_endtag(self, tag):
        if tag == "span" and self._depth:
            self._depth -= 1

    def handle_data(self, data):
        if self._depth:
            self.tokens[-1] += data


def tokens_from_html(page: str) -> list:
    """Recover the token sequence from a rendered highlight page."""
    collector = _TokenCollector()
    collector.feed(page)
    return collector.tokens


# ---- distillation ----


def top_k_positions(scores, k: int) -> list:
    """Positions of the k largest scores in original order, ties to the left."""
    scores = np.asarray(scores, dtype=float)
    order = np.argsort(-scores, kind="stable")[:k]
    return sorted(int(i) for i in order)


def token_scores(model, doc: Document) -> np.ndarray:
    """Per-token relevance: the best importance across classes."""
    if not model.config.interpretable:
        raise ValueError("token scoring needs the interpretable variant")
    return model.predict(doc).importance.max(axis=0)


def distill_document(model, doc: Document, k: int) -> Document:
    keep = top_k_positions(token_scores(model, doc), k)
    tokens = [doc.tokens[i] for i in keep]
    return replace(doc, tokens=tokens, sentences=[(0, len(tokens))])


@dataclass
class DistilledCorpus:
    """Reduced split where each document keeps its k best tokens."""

    k: int
    split: CorpusSplit
    source: str = ""


def distill_top_k(model, split: CorpusSplit, k: int,
                  source: str = "") -> DistilledCorpus:
    if k < 1:
        raise ValueError("k must be at least 1")
    out = CorpusSplit(
        train=[distill_document(model, d, k) for d in split.train],
        valid=[distill_document(model, d, k) for d in split.valid],
        test=[distill_document(model, d, k) for d in split.test],
        class_map=dict(split.class_map),
    )
    return DistilledCorpus(k=k, split=out, source=source)


def write_distilled(dc: DistilledCorpus, dirpath) -> None:
    """Store a distilled split in the usual layout plus a provenance note."""
    dirpath = Path(dirpath)
    write_split(dirpath, dc.split)
    dump_json({"distilled_k": dc.k, "source": dc.source},
              dirpath / DISTILL_META)
