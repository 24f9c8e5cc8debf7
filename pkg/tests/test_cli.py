"""End-to-end command tests driving the console entry point in process."""

from __future__ import annotations

import json
from pathlib import Path

import pytest

from textclf.cli import EXIT_DATA, EXIT_NUMERIC, EXIT_OK, EXIT_USAGE, main
from textclf.util import load_json


def run(argv, expect=EXIT_OK):
    code = main(argv)
    assert code == expect, f"exit {code} for: {' '.join(argv)}"


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    """Small corpus, split, and two trained models shared across tests."""
    root = tmp_path_factory.mktemp("cli")
    run(["synth", "--out", str(root / "corpus.jsonl"), "--classes", "3",
         "--docs-per-class", "30", "--noise-vocab", "40",
         "--min-tokens", "5", "--max-tokens", "9", "--seed", "11"])
    run(["prepare", "--corpus", str(root / "corpus.jsonl"),
         "--out", str(root / "split")])
    common = ["--split", str(root / "split"), "--embedding-dim", "8",
              "--rnn-width", "6", "--g-width", "10", "--min-count", "1",
              "--lr", "0.02", "--batch-size", "8", "--max-epochs", "12",
              "--patience", "12", "--seed", "3"]
    run(["train", "--family", "MAX", "--out", str(root / "max.bin")] + common)
    run(["train", "--family", "MAXi", "--out", str(root / "maxi.bin")] + common)
    run(["train", "--family", "SVM", "--out", str(root / "svm.bin"),
         "--split", str(root / "split"), "--seed", "3"])
    return root


# ---- exit codes and usage ----

def test_no_subcommand_is_usage_error(capsys):
    run([], expect=EXIT_USAGE)
    assert "error:" in capsys.readouterr().err


def test_unknown_flag_is_usage_error(capsys):
    run(["synth", "--bogus", "1"], expect=EXIT_USAGE)
    err = capsys.readouterr().err
    assert err.startswith("error:") and err.count("\n") == 1


def test_missing_required_flag(capsys):
    run(["synth"], expect=EXIT_USAGE)
    assert "--out" in capsys.readouterr().err


def test_missing_file_is_data_error(tmp_path, capsys):
    run(["prepare", "--corpus", str(tmp_path / "no.jsonl"),
         "--out", str(tmp_path / "s")], expect=EXIT_DATA)
    assert "error:" in capsys.readouterr().err


def test_help_lists_every_flag(capsys):
    from textclf.cli import build_parser
    _, subs = build_parser()
    for name, sub in subs.items():
        with pytest.raises(SystemExit) as exc:
            main([name, "--help"])
        assert exc.value.code == 0
        text = capsys.readouterr().out
        for dest in sub.defaults:
            assert "--" + dest.replace("_", "-") in text, (name, dest)


# ---- corpus commands ----

def test_synth_seed_determinism(tmp_path):
    a, b, c = (tmp_path / n for n in ("a.jsonl", "b.jsonl", "c.jsonl"))
    run(["synth", "--out", str(a), "--classes", "3", "--seed", "7"])
    run(["synth", "--out", str(b), "--classes", "3", "--seed", "7"])
    run(["synth", "--out", str(c), "--classes", "3", "--seed", "8"])
    assert a.read_bytes() == b.read_bytes()
    assert a.read_bytes() != c.read_bytes()


def test_prepare_writes_split(workdir):
    split = workdir / "split"
    assert (split / "class_map.json").exists()
    assert len(json.loads((split / "class_map.json").read_text())) == 3
    for part in ("train", "valid", "test"):
        assert (split / f"{part}.jsonl").stat().st_size > 0


def test_config_file_and_flag_precedence(tmp_path, capsys):
    cfg = tmp_path / "synth.cfg"
    cfg.write_text("classes=4\nseed=5\n# comment line\n\n")
    run(["synth", "--config", str(cfg), "--out", str(tmp_path / "a.jsonl")])
    assert "4 classes" in capsys.readouterr().out
    run(["synth", "--config", str(cfg), "--classes", "6",
         "--out", str(tmp_path / "b.jsonl")])
    assert "6 classes" in capsys.readouterr().out


def test_unknown_config_key_rejected(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("nonsense=1\n")
    run(["synth", "--config", str(cfg), "--out", str(tmp_path / "x.jsonl")],
        expect=EXIT_USAGE)
    assert "nonsense" in capsys.readouterr().err


def test_embed_writes_vectors(workdir, tmp_path, capsys):
    out = tmp_path / "vec.txt"
    args = ["embed", "--split", str(workdir / "split"), "--out", str(out),
            "--dim", "4", "--iterations", "3", "--min-count", "1",
            "--seed", "2"]
    run(args)
    assert "trained" in capsys.readouterr().out
    first = out.read_bytes()
    run(args)
    assert out.read_bytes() == first


# ---- model commands ----

def test_train_reports_best_epoch(workdir, capsys):
    run(["eval", "--model", str(workdir / "max.bin"),
         "--split", str(workdir / "split")])
    out = capsys.readouterr().out
    assert "accuracy" in out and "macro F1" in out


def test_train_is_deterministic(workdir, tmp_path):
    args = ["train", "--family", "MAX", "--split", str(workdir / "split"),
            "--embedding-dim", "8", "--rnn-width", "6", "--g-width", "10",
            "--min-count", "1", "--lr", "0.02", "--batch-size", "8",
            "--max-epochs", "2", "--patience", "5", "--seed", "9"]
    run(args + ["--out", str(tmp_path / "m1.bin")])
    run(args + ["--out", str(tmp_path / "m2.bin")])
    assert (tmp_path / "m1.bin").read_bytes() == (tmp_path / "m2.bin").read_bytes()


def test_train_with_pretrained_vectors(workdir, tmp_path, capsys):
    vec = tmp_path / "vec.txt"
    run(["embed", "--split", str(workdir / "split"), "--out", str(vec),
         "--dim", "8", "--iterations", "2", "--min-count", "1"])
    capsys.readouterr()
    run(["train", "--family", "GRU", "--split", str(workdir / "split"),
         "--out", str(tmp_path / "gru.bin"), "--vectors", str(vec),
         "--embedding-dim", "8", "--rnn-width", "6", "--min-count", "1",
         "--max-epochs", "2", "--freeze-embeddings"])
    assert "best epoch" in capsys.readouterr().out


def test_eval_svm_and_json_report(workdir, tmp_path, capsys):
    out = tmp_path / "report.json"
    run(["eval", "--model", str(workdir / "svm.bin"),
         "--split", str(workdir / "split"), "--per-class", "--out", str(out)])
    text = capsys.readouterr().out
    assert "accuracy" in text and "C00" in text
    report = load_json(out)
    assert 0.0 <= report["accuracy"] <= 1.0
    assert "macro_f1" in report


def test_eval_with_reference_fidelity(workdir, capsys):
    run(["eval", "--model", str(workdir / "maxi.bin"),
         "--split", str(workdir / "split"),
         "--reference-model", str(workdir / "max.bin")])
    assert "fidelity" in capsys.readouterr().out


def test_compare_table(workdir, capsys):
    run(["compare", "--split", str(workdir / "split"),
         "--model", f"MAX={workdir / 'max.bin'}",
         "--model", f"SVM={workdir / 'svm.bin'}"])
    out = capsys.readouterr().out
    assert out.splitlines()[0].startswith("model")
    assert "MAX" in out and "SVM" in out


def test_compare_missing_baseline(workdir, capsys):
    run(["compare", "--split", str(workdir / "split"),
         "--model", f"A={workdir / 'max.bin'}"], expect=EXIT_DATA)
    assert "baseline" in capsys.readouterr().err


def test_compare_bad_entry(workdir, capsys):
    run(["compare", "--split", str(workdir / "split"),
         "--model", "justapath.bin"], expect=EXIT_USAGE)
    assert "NAME=PATH" in capsys.readouterr().err


def test_explain_writes_page(workdir, tmp_path, capsys):
    page = tmp_path / "doc.html"
    run(["explain", "--model", str(workdir / "maxi.bin"),
         "--split", str(workdir / "split"), "--index", "1",
         "--out", str(page)])
    assert page.read_text().startswith("<html>")
    capsys.readouterr()


def test_explain_rejects_plain_model(workdir, capsys):
    run(["explain", "--model", str(workdir / "max.bin"),
         "--split", str(workdir / "split")], expect=EXIT_USAGE)
    assert "interpretable" in capsys.readouterr().err


def test_explain_index_bounds(workdir, capsys):
    run(["explain", "--model", str(workdir / "maxi.bin"),
         "--split", str(workdir / "split"), "--index", "99999"],
        expect=EXIT_USAGE)
    assert "--index" in capsys.readouterr().err


def test_distill_writes_reduced_split(workdir, tmp_path, capsys):
    out = tmp_path / "small"
    run(["distill", "--model", str(workdir / "maxi.bin"),
         "--split", str(workdir / "split"), "--k", "2", "--out", str(out)])
    assert "top-2" in capsys.readouterr().out
    meta = load_json(out / "distill.json")
    assert meta["distilled_k"] == 2
    for line in (out / "test.jsonl").read_text().splitlines():
        assert len(json.loads(line)["tokens"]) <= 2


def test_gridsearch_neural(workdir, tmp_path, capsys):
    grid = tmp_path / "grid.json"
    grid.write_text(json.dumps({"axes": {"rnn_width": [2, 4]}}))
    out = tmp_path / "table.csv"
    run(["gridsearch", "--family", "MAX", "--split", str(workdir / "split"),
         "--grid", str(grid), "--out", str(out), "--embedding-dim", "8",
         "--g-width", "10", "--min-count", "1", "--lr", "0.02",
         "--batch-size", "8", "--max-epochs", "2", "--patience", "5"])
    text = capsys.readouterr().out
    assert "2/2 points trained" in text and "best:" in text
    lines = out.read_text().splitlines()
    assert lines[0].startswith("rank,index,rnn_width")
    assert len(lines) == 3


def test_gridsearch_svm_family_from_file(workdir, tmp_path, capsys):
    grid = tmp_path / "grid.json"
    grid.write_text(json.dumps({"family": "SVM",
                                "axes": {"c": [0.5, 1.0]}}))
    out = tmp_path / "table.csv"
    run(["gridsearch", "--split", str(workdir / "split"),
         "--grid", str(grid), "--out", str(out)])
    assert "2/2 points trained" in capsys.readouterr().out


def test_gridsearch_bad_grid_file(workdir, tmp_path, capsys):
    grid = tmp_path / "grid.json"
    grid.write_text(json.dumps({"axes": {"rnn_width": 4}}))
    run(["gridsearch", "--family", "MAX", "--split", str(workdir / "split"),
         "--grid", str(grid), "--out", str(tmp_path / "t.csv")],
        expect=EXIT_DATA)
    assert "axes" in capsys.readouterr().err
