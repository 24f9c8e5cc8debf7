"""Preprocessing, split, and generator checks with brute-force recounts."""

from __future__ import annotations

import datetime as dt

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from textclf import corpus as cp
from textclf.corpus import (CorpusSplit, Document, GenSpec, RawRecord,
                            deduplicate, filter_rare_classes, generate_synthetic,
                            preprocess, segment_sentences, temporal_split,
                            tokenize)


def _doc(tokens, code="C00", label=0, day=1):
    return Document(tokens=list(tokens), sentences=[], label_code=code,
                    label=label, inserted_at=dt.date(2020, 1, day))


# ---- preprocessing ----

def test_preprocess_single_field():
    doc = preprocess(RawRecord(diagnosis="adenocarcinoma prostatico."))
    assert doc.tokens == ["ADENOCARCINOMA", "PROSTATICO", "."]


def test_preprocess_field_separator():
    doc = preprocess(RawRecord(macroscopy="a", diagnosis="b"))
    assert doc.tokens == ["A", ".", "B"]


def test_preprocess_keeps_punctuation_tokens():
    doc = preprocess(RawRecord(diagnosis="Polipo, peduncolato"))
    assert doc.tokens == ["POLIPO", ",", "PEDUNCOLATO"]


def test_preprocess_empty_record_skips():
    with pytest.raises(cp.SkipRecord):
        preprocess(RawRecord(macroscopy="  ", diagnosis="", anamnesis=""))


def test_preprocess_field_order():
    doc = preprocess(RawRecord(macroscopy="uno", diagnosis="due", anamnesis="tre"))
    assert doc.tokens == ["UNO", ".", "DUE", ".", "TRE"]


def test_tokenize_numeric_period_stays_inside():
    assert tokenize("misura 2.3 cm.") == ["MISURA", "2.3", "CM", "."]


def test_tokenize_brackets_both_sides():
    assert tokenize("(polipo).") == ["(", "POLIPO", ")", "."]


def test_tokenize_all_punctuation_token():
    assert tokenize("..") == [".", "."]


@given(st.text(alphabet=st.characters(min_codepoint=32, max_codepoint=126),
               max_size=60))
@settings(max_examples=60, deadline=None)
def test_tokenize_idempotent(text):
    once = tokenize(text)
    again = tokenize(" ".join(once))
    assert again == once


# ---- sentence segmentation ----

def test_segment_after_periods():
    doc = segment_sentences(_doc(["A", ".", "B", "."]))
    assert doc.sentences == [(0, 2), (2, 4)]


def test_segment_trailing_without_period():
    doc = segment_sentences(_doc(["A", "B"]))
    assert doc.sentences == [(0, 2)]


def test_segment_degenerate_periods():
    doc = segment_sentences(_doc([".", "."]))
    assert doc.sentences == [(0, 1), (1, 2)]


@given(st.lists(st.sampled_from(["A", "B", "2.3", "."]), min_size=1, max_size=20))
@settings(max_examples=60, deadline=None)
def test_segment_ranges_partition_tokens(tokens):
    doc = segment_sentences(_doc(tokens))
    rebuilt = []
    prev_end = 0
    for start, end in doc.sentences:
        assert start == prev_end and end > start
        rebuilt.extend(doc.tokens[start:end])
        prev_end = end
    assert prev_end == len(doc.tokens)
    assert rebuilt == doc.tokens


# ---- deduplication ----

def test_dedup_keeps_earliest_date():
    a = _doc(["X", "Y"], day=5)
    b = _doc(["X", "Y"], day=2)
    kept = deduplicate([a, b])
    assert kept == [b]


def test_dedup_identity_without_duplicates():
    docs = [_doc(["A"]), _doc(["B"]), _doc(["C"])]
    assert deduplicate(docs) == docs


def test_dedup_three_copies_one_survivor():
    docs = [_doc(["Z"], day=3), _doc(["Z"], day=1), _doc(["Z"], day=2)]
    kept = deduplicate(docs)
    assert len(kept) == 1 and kept[0].inserted_at.day == 1


# ---- temporal split ----

def test_split_sizes_and_membership():
    docs = [_doc([f"T{i}"], day=i + 1) for i in range(10)]
    split = temporal_split(docs)
    days = lambda part: [d.inserted_at.day for d in part]
    assert days(split.train) == [1, 2, 3, 4, 5, 6]
    assert days(split.valid) == [7, 8]
    assert days(split.test) == [9, 10]


def test_split_equal_dates_use_input_order():
    docs = [_doc([f"T{i}"], day=1) for i in range(5)]
    split = temporal_split(docs)
    names = lambda part: [d.tokens[0] for d in part]
    assert names(split.train) == ["T0", "T1", "T2"]
    assert names(split.valid) == ["T3"]
    assert names(split.test) == ["T4"]


def test_split_ceiling_sizes():
    docs = [_doc([f"T{i}"], day=i + 1) for i in range(5)]
    split = temporal_split(docs, test_frac=0.2, valid_frac=0.2)
    assert (len(split.train), len(split.valid), len(split.test)) == (3, 1, 1)


def test_split_too_small_errors():
    with pytest.raises(cp.DataError):
        temporal_split([_doc(["A"]), _doc(["B"])])


def test_split_dates_ordered_across_parts():
    docs = [_doc([f"T{i}"], day=(i * 7) % 28 + 1) for i in range(20)]
    split = temporal_split(docs)
    assert max(d.inserted_at for d in split.train) <= min(d.inserted_at for d in split.valid)
    assert max(d.inserted_at for d in split.valid) <= min(d.inserted_at for d in split.test)


@given(st.lists(st.tuples(st.integers(1, 28), st.integers(0, 2)),
                min_size=3, max_size=40))
@settings(max_examples=50, deadline=None)
def test_split_partition_property(items):
    docs = [_doc([f"T{i}"], code=f"C{c:02d}", day=day)
            for i, (day, c) in enumerate(items)]
    split = temporal_split(docs)
    got = sorted(d.tokens[0] for d in split.all_documents())
    assert got == sorted(d.tokens[0] for d in docs)
    assert len(split.train) + len(split.valid) + len(split.test) == len(docs)


# ---- rare-class filtering ----

def _make_split(test_labels: list[str]) -> CorpusSplit:
    names = sorted(set(test_labels) | {"C00"})
    cmap = {n: i for i, n in enumerate(names)}
    train = [_doc([f"R{i}"], code=n, label=cmap[n]) for i, n in enumerate(names)]
    test = [_doc([f"S{i}"], code=n, label=cmap[n])
            for i, n in enumerate(test_labels)]
    return CorpusSplit(train=train, valid=list(train), test=test, class_map=cmap)


def test_filter_removes_small_class_everywhere():
    split = _make_split(["C01"] * 5 + ["C02"] * 4)
    out = filter_rare_classes(split, min_test=5)
    assert set(out.class_map) == {"C01"}
    assert all(d.label_code == "C01" for d in out.all_documents())


def test_filter_identity_when_all_large():
    split = _make_split(["C00"] * 5 + ["C01"] * 6)
    out = filter_rare_classes(split, min_test=5)
    assert set(out.class_map) == {"C00", "C01"}
    assert sorted(out.class_map.values()) == [0, 1]


@given(st.lists(st.integers(0, 12), min_size=1, max_size=8))
@settings(max_examples=50, deadline=None)
def test_filter_matches_brute_force_counts(sizes):
    labels = []
    for c, n in enumerate(sizes):
        labels.extend([f"C{c + 1:02d}"] * n)
    split = _make_split(labels)
    # independent counting oracle over the raw test list
    oracle = {}
    for name in split.class_map:
        oracle[name] = sum(1 for d in split.test if d.label_code == name)
    expect = sorted(n for n, c in oracle.items() if c >= 5)
    if not expect:
        with pytest.raises(cp.DataError):
            filter_rare_classes(split, min_test=5)
        return
    out = filter_rare_classes(split, min_test=5)
    assert sorted(out.class_map) == expect
    assert sorted(out.class_map.values()) == list(range(len(expect)))
    for name in expect:
        assert sum(1 for d in out.test if d.label_code == name) >= 5


# ---- synthetic generator ----

def test_generator_is_deterministic():
    spec = GenSpec(n_classes=4, docs_per_class=10, seed=7)
    a, meta_a = generate_synthetic(spec)
    b, meta_b = generate_synthetic(spec)
    assert a == b and meta_a == meta_b


def test_generator_plants_only_own_keywords():
    spec = GenSpec(n_classes=5, docs_per_class=20, seed=3)
    records, meta = generate_synthetic(spec)
    kw = {label: set(ks) for label, ks in meta["keywords"].items()}
    all_kw = set().union(*kw.values())
    for rec in records:
        doc = preprocess(rec)
        present = set(doc.tokens) & all_kw
        assert present, "every document carries at least one keyword"
        assert present <= kw[rec.label], "no foreign-class keywords"
    assert meta["warnings"] == []


def test_generator_flags_keyword_overlap():
    spec = GenSpec(n_classes=2, docs_per_class=5, seed=0,
                   class_keywords=[["KA", "SHARED"], ["KB", "SHARED"]])
    _, meta = generate_synthetic(spec)
    assert len(meta["warnings"]) == 1
    assert "share" in meta["warnings"][0]


def test_generator_supports_temporal_balance():
    spec = GenSpec(n_classes=3, docs_per_class=[50, 30, 20], seed=1)
    records, _ = generate_synthetic(spec)
    docs = cp.preprocess_all(records)
    split = temporal_split(deduplicate(docs))
    for name, idx in split.class_map.items():
        n_test = sum(1 for d in split.test if d.label == idx)
        total = sum(1 for d in docs if d.label_code == name)
        assert abs(n_test - 0.2 * total) <= 2


def test_generator_needs_two_classes():
    with pytest.raises(cp.DataError):
        generate_synthetic(GenSpec(n_classes=1))


# ---- file round-trips ----

def test_corpus_file_round_trip(tmp_path):
    spec = GenSpec(n_classes=3, docs_per_class=4, seed=11)
    records, meta = generate_synthetic(spec)
    path = tmp_path / "corpus.jsonl"
    cp.write_corpus(path, records, meta)
    back, meta_back = cp.read_corpus(path)
    assert back == records
    assert meta_back == meta


def test_corpus_file_without_meta(tmp_path):
    records = [RawRecord(diagnosis="a b", label="C00",
                         inserted_at=dt.date(2020, 1, 1))]
    path = tmp_path / "c.jsonl"
    cp.write_corpus(path, records)
    back, meta = cp.read_corpus(path)
    assert back == records and meta is None


def test_corpus_file_malformed_line(tmp_path):
    path = tmp_path / "bad.jsonl"
    path.write_text('{"diagnosis": "a", "label": "C00", "inserted_at": "2020-01-01"}\nnot json\n')
    with pytest.raises(cp.DataError):
        cp.read_corpus(path)


def test_corpus_file_missing(tmp_path):
    with pytest.raises(cp.DataError):
        cp.read_corpus(tmp_path / "absent.jsonl")


def test_split_round_trip(tmp_path):
    records, _ = generate_synthetic(GenSpec(n_classes=3, docs_per_class=6, seed=2))
    split = temporal_split(cp.preprocess_all(records))
    cp.write_split(tmp_path / "split", split)
    back = cp.read_split(tmp_path / "split")
    assert back.class_map == split.class_map
    assert back.train == split.train
    assert back.valid == split.valid
    assert back.test == split.test


def test_split_read_rejects_other_dirs(tmp_path):
    with pytest.raises(cp.DataError):
        cp.read_split(tmp_path)
