"""Single-file model container: a JSON header plus raw float64 blobs.

The byte layout is fully determined by the model content (sorted header
keys, fixed tensor order, little-endian payload), so saving the same model
twice yields identical files.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .baseline import LinearModel, SvmModel, TfidfModel
from .corpus import DataError
from .embeddings import Vocabulary
from .networks import Model, ModelConfig, ModelParams

MAGIC = b"TCMODEL\n"
FORMAT_VERSION = 1


def _pack(header: dict, blobs: list[np.ndarray]) -> bytes:
    head = json.dumps(header, sort_keys=True,
                      separators=(",", ":")).encode("utf-8")
    out = [MAGIC, len(head).to_bytes(8, "little"), head]
    for blob in blobs:
        out.append(np.ascontiguousarray(blob, dtype="<f8").tobytes())
    return b"".join(out)


def _unpack(raw: bytes) -> tuple[dict, bytes]:
    if not raw.startswith(MAGIC):
        raise DataError("not a model file")
    n = int.from_bytes(raw[len(MAGIC):len(MAGIC) + 8], "little")
    start = len(MAGIC) + 8
    try:
        header = json.loads(raw[start:start + n].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise DataError(f"corrupt model header: {exc}") from exc
    if header.get("version") != FORMAT_VERSION:
        raise DataError(f"unsupported model version {header.get('version')!r}")
    return header, raw[start + n:]


def _read_blobs(payload: bytes, specs) -> dict[str, np.ndarray]:
    arrays = {}
    offset = 0
    for spec in specs:
        shape = tuple(int(s) for s in spec["shape"])
        size = int(np.prod(shape, dtype=np.int64)) * 8
        chunk = payload[offset:offset + size]
        if len(chunk) != size:
            raise DataError("model file truncated")
        arrays[spec["name"]] = np.frombuffer(
            chunk, dtype="<f8").reshape(shape).copy()
        offset += size
    if offset != len(payload):
        raise DataError("model file has trailing bytes")
    return arrays


# ---- neural models ----


def save_model(model: Model, path: str | Path) -> None:
    specs = [{"name": name, "shape": list(t.data.shape)}
             for name, t in model.params.tensors.items()]
    header = {
        "version": FORMAT_VERSION,
        "kind": "neural",
        "config": model.config.to_dict(),
        "class_names": list(model.class_names),
        "vocab": {"tokens": model.vocab.tokens,
                  "counts": list(model.vocab.counts)},
        "tensors": specs,
    }
    blobs = [t.data for t in model.params.tensors.values()]
    Path(path).write_bytes(_pack(header, blobs))


def _load_neural(header: dict, payload: bytes) -> Model:
    config = ModelConfig.from_dict(header["config"])
    tokens = list(header["vocab"]["tokens"])
    vocab = Vocabulary(tokens=tokens,
                       index={t: i for i, t in enumerate(tokens)},
                       counts=[int(c) for c in header["vocab"]["counts"]])
    arrays = _read_blobs(payload, header["tensors"])
    params = ModelParams()
    for spec in header["tensors"]:
        params.add(spec["name"], arrays[spec["name"]])
    return Model(config, params, vocab, list(header["class_names"]))


# ---- linear baseline ----


def save_svm(model: SvmModel, path: str | Path) -> None:
    terms = sorted(model.tfidf.columns, key=model.tfidf.columns.get)
    header = {
        "version": FORMAT_VERSION,
        "kind": "svm",
        "class_names": list(model.class_names),
        "terms": terms,
        "ngram_max": model.tfidf.ngram_max,
        "c": model.linear.c,
        "tensors": [
            {"name": "idf", "shape": list(model.tfidf.idf.shape)},
            {"name": "df", "shape": list(model.tfidf.df.shape)},
            {"name": "weights", "shape": list(model.linear.weights.shape)},
            {"name": "bias", "shape": list(model.linear.bias.shape)},
        ],
    }
    blobs = [model.tfidf.idf, model.tfidf.df,
             model.linear.weights, model.linear.bias]
    Path(path).write_bytes(_pack(header, blobs))


def _load_svm(header: dict, payload: bytes) -> SvmModel:
    arrays = _read_blobs(payload, header["tensors"])
    tfidf = TfidfModel(
        columns={t: i for i, t in enumerate(header["terms"])},
        idf=arrays["idf"], df=arrays["df"],
        ngram_max=int(header["ngram_max"]))
    linear = LinearModel(weights=arrays["weights"], bias=arrays["bias"],
                         c=float(header["c"]))
    return SvmModel(tfidf=tfidf, linear=linear,
                    class_names=list(header["class_names"]))


# ---- entry points ----


def load_any(path: str | Path):
    """Read either model kind back; the header's kind tag decides."""
    fp = Path(path)
    if not fp.exists():
        raise DataError(f"no such model file: {fp}")
    header, payload = _unpack(fp.read_bytes())
    kind = header.get("kind")
    if kind == "neural":
        return _load_neural(header, payload)
    if kind == "svm":
        return _load_svm(header, payload)
    raise DataError(f"unknown model kind {kind!r}")


def load_model(path: str | Path) -> Model:
    model = load_any(path)
    if not isinstance(model, Model):
        raise DataError("model file does not hold a neural model")
    return model


def load_svm(path: str | Path) -> SvmModel:
    model = load_any(path)
    if not isinstance(model, SvmModel):
        raise DataError("model file does not hold a linear baseline")
    return model
