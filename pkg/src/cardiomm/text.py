"""Text conditioning: canonical texts, raw text embeddings, projection heads.

The default encoder is signed feature hashing of word unigrams, word bigrams
and character trigrams into ``RAW_DIM`` bins. Any encoder producing
``RAW_DIM``-dimensional vectors can be swapped in through an embedding file
(see :func:`write_embedding_file`).
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import os
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .autodiff import ParamStore, Tensor, linear, sqrt
from .autodiff.tensor import AutodiffError, get_default_dtype

RAW_DIM = 512
EMBED_DIM = 128
_TOKEN = re.compile(r"[a-z0-9.+\-]+")


class TextError(ValueError):
    pass


def canonicalize(text: str) -> str:
    """Lowercase with single-space separators."""
    return " ".join(str(text).lower().split())


@dataclass(frozen=True)
class TextBundle:
    metadata_text: str
    undersampling_text: str

    def __post_init__(self):
        for name in ("metadata_text", "undersampling_text"):
            value = canonicalize(getattr(self, name))
            if not value:
                raise TextError(f"{name} is empty")
            object.__setattr__(self, name, value)


def _fmt(value) -> str:
    if value is None or value == "":
        return "unknown"
    return str(value)


def compose_metadata_text(metadata: dict) -> str:
    """Deterministic metadata template, e.g.
    ``"modality cine; view sax; field 3.0t; vendor simulated"``.

    Missing fields render as ``unknown``; an optional ``population`` field is
    appended when present.
    """
    if not metadata.get("modality"):
        raise TextError("metadata has no modality")
    field_strength = metadata.get("field")
    if isinstance(field_strength, (int, float)) and not isinstance(field_strength, bool):
        field_strength = float(field_strength)
    parts = [f"modality {_fmt(metadata.get('modality'))}",
             f"view {_fmt(metadata.get('view'))}",
             f"field {_fmt(field_strength)}t",
             f"vendor {_fmt(metadata.get('vendor'))}"]
    if metadata.get("population"):
        parts.append(f"population {_fmt(metadata['population'])}")
    return canonicalize("; ".join(parts))


# -------------------------------------------------------------------- encoders
def _features(text: str) -> list[str]:
    words = _TOKEN.findall(text)
    feats = [f"w:{w}" for w in words]
    feats += [f"b:{a}_{b}" for a, b in zip(words, words[1:])]
    for w in words:
        padded = f"^{w}$"
        feats += [f"c:{padded[i:i + 3]}" for i in range(len(padded) - 2)]
    return feats


def encode_text(text: str, dim: int = RAW_DIM) -> np.ndarray:
    """Signed feature-hashing embedding with unit L2 norm."""
    text = canonicalize(text)
    if not text:
        raise TextError("cannot encode an empty string")
    vec = np.zeros(dim)
    for feat in _features(text):
        h = int.from_bytes(hashlib.blake2b(feat.encode(), digest_size=8).digest(), "little")
        vec[h % dim] += 1.0 if (h >> 63) & 1 else -1.0
    norm = np.linalg.norm(vec)
    if norm == 0:
        raise TextError(f"text {text!r} hashed to the zero vector")
    return vec / norm


class HashingEncoder:
    dim = RAW_DIM

    def __call__(self, text: str) -> np.ndarray:
        return encode_text(text, self.dim)


class PrecomputedEncoder:
    """Embeddings looked up by canonical string from an embedding file pair.

    ``<stem>.json`` maps each canonical string to a row offset in
    ``<stem>.f32`` (little-endian float32, ``dim`` values per row).
    """

    def __init__(self, stem: str | os.PathLike):
        stem = Path(stem)
        index = json.loads(stem.with_suffix(".json").read_text())
        self.dim = int(index["dim"])
        self.offsets = {canonicalize(k): int(v) for k, v in index["entries"].items()}
        self.table = np.fromfile(stem.with_suffix(".f32"), dtype="<f4").reshape(-1, self.dim)

    def __call__(self, text: str) -> np.ndarray:
        key = canonicalize(text)
        if key not in self.offsets:
            raise TextError(f"no precomputed embedding for {key!r}")
        vec = self.table[self.offsets[key]].astype(float)
        if not np.all(np.isfinite(vec)):
            raise TextError(f"non-finite embedding for {key!r}")
        return vec


def write_embedding_file(embeddings: dict[str, np.ndarray], stem: str | os.PathLike) -> None:
    stem = Path(stem)
    keys = sorted({canonicalize(k) for k in embeddings})
    canon = {canonicalize(k): v for k, v in embeddings.items()}
    table = np.stack([np.asarray(canon[k], dtype="<f4") for k in keys])
    table.tofile(stem.with_suffix(".f32"))
    stem.with_suffix(".json").write_text(json.dumps(
        {"dim": int(table.shape[1]), "entries": {k: i for i, k in enumerate(keys)}},
        indent=1, sort_keys=True))


# ---------------------------------------------------------------------- heads
def l2_normalize(x: Tensor, eps: float = 0.0) -> Tensor:
    """Row-wise L2 normalisation; a zero row is an error."""
    sq = (x * x).sum(axis=-1, keepdims=True)
    if np.any(sq.data <= eps):
        raise AutodiffError("cannot L2-normalise a zero vector")
    return x / sqrt(sq)


def init_text_heads(store: ParamStore, rng: np.random.Generator, raw_dim: int = RAW_DIM,
                    dim: int = EMBED_DIM, prefix: str = "text") -> None:
    dtype = get_default_dtype()
    for head in ("meta", "under"):
        w = rng.standard_normal((dim, raw_dim)) / np.sqrt(raw_dim)
        store.add(f"{prefix}.{head}.w", Tensor(w.astype(dtype)))
        store.add(f"{prefix}.{head}.b", Tensor(np.zeros(dim, dtype=dtype)))


def project(store: ParamStore, raw, head: str, prefix: str = "text") -> Tensor:
    """Linear head followed by L2 normalisation; ``head`` is ``meta`` or ``under``."""
    if not isinstance(raw, Tensor):
        raw = Tensor(np.asarray(raw, dtype=get_default_dtype()))
    if not np.all(np.isfinite(raw.data)):
        raise TextError("raw embedding has non-finite entries")
    x = raw.reshape(1, -1) if raw.ndim == 1 else raw
    return l2_normalize(linear(x, store[f"{prefix}.{head}.w"], store[f"{prefix}.{head}.b"]))


def project_metadata(store: ParamStore, raw, prefix: str = "text") -> Tensor:
    return project(store, raw, "meta", prefix)


def project_undersampling(store: ParamStore, raw, prefix: str = "text") -> Tensor:
    return project(store, raw, "under", prefix)


def dump_embeddings(store: ParamStore, bundles, path: str | os.PathLike | None = None,
                    encoder=None, prefix: str = "text") -> str:
    """CSV with one row per unique text: ``kind,text,v0..v{D-1}``.

    ``kind`` is ``metadata`` or ``undersampling``. Rows are sorted so that
    reruns produce byte-identical files.
    """
    from .autodiff import no_grad

    encoder = encoder or HashingEncoder()
    texts = set()
    for b in bundles:
        texts.add(("metadata", canonicalize(b.metadata_text)))
        texts.add(("undersampling", canonicalize(b.undersampling_text)))
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    rows = []
    with no_grad():
        for kind, text in sorted(texts):
            head = "meta" if kind == "metadata" else "under"
            vec = project(store, encoder(text), head, prefix).data.reshape(-1)
            rows.append([kind, text] + [f"{v:.9e}" for v in vec])
    if rows:
        writer.writerow(["kind", "text"] + [f"v{i}" for i in range(len(rows[0]) - 2)])
    writer.writerows(rows)
    out = buf.getvalue()
    if path is not None:
        Path(path).write_text(out)
    return out
