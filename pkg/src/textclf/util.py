"""Shared helpers: seed derivation and deterministic file output."""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np


def derive_seed(seed: int, label: str) -> int:
    """Stable per-component substream seed from a single user seed."""
    digest = hashlib.sha256(f"{seed}:{label}".encode()).digest()
    return int.from_bytes(digest[:8], "little") % (2 ** 63)


def make_rng(seed: int, label: str) -> np.random.Generator:
    return np.random.default_rng(derive_seed(seed, label))


def dump_json(obj, path: str | Path) -> None:
    # sorted keys + fixed separators so identical content is byte-identical
    text = json.dumps(obj, sort_keys=True, indent=2, ensure_ascii=False)
    Path(path).write_text(text + "\n", encoding="utf-8")


def load_json(path: str | Path):
    return json.loads(Path(path).read_text(encoding="utf-8"))
