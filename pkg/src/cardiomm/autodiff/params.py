"""Named parameter storage with optimizer state and on-disk format.

On disk a store is two files sharing a stem: ``<stem>.json`` (format
version, names, shapes, dtypes, byte offsets, optimizer step counts) and
``<stem>.bin`` (raw little-endian arrays, concatenated in manifest order).
"""

from __future__ import annotations

import json
import os
from pathlib import Path

import numpy as np

from ..digest import fnv64
from .tensor import Tensor

FORMAT_VERSION = 1


class ParamStoreError(ValueError):
    pass


class ParamStore:
    """Ordered mapping from hierarchical name to trainable :class:`Tensor`.

    Each parameter also carries optimizer state (first and second moments and
    a step count) once an optimizer has touched it.
    """

    def __init__(self, params: dict[str, Tensor] | None = None):
        self._params: dict[str, Tensor] = {}
        self._ids: set[int] = set()
        self.state: dict[str, dict] = {}
        for name, t in (params or {}).items():
            self.add(name, t)

    def add(self, name: str, tensor: Tensor) -> Tensor:
        if name in self._params:
            raise ParamStoreError(f"duplicate parameter name {name!r}")
        if id(tensor) in self._ids:
            raise ParamStoreError(f"tensor for {name!r} already registered under another name")
        tensor.requires_grad = True
        tensor.name = name
        self._params[name] = tensor
        self._ids.add(id(tensor))
        return tensor

    def __getitem__(self, name: str) -> Tensor:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def __iter__(self):
        return iter(self._params)

    def __len__(self) -> int:
        return len(self._params)

    def items(self):
        return self._params.items()

    def names(self) -> list[str]:
        return list(self._params)

    def n_elements(self) -> int:
        return sum(t.size for t in self._params.values())

    def zero_grad(self) -> None:
        for t in self._params.values():
            t.grad = None

    def astype(self, dtype) -> None:
        for name, t in self._params.items():
            t.data = t.data.astype(dtype)
            if name in self.state:
                for key in ("m", "v"):
                    self.state[name][key] = self.state[name][key].astype(dtype)

    # ------------------------------------------------------------- persistence
    def save(self, stem: str | os.PathLike) -> tuple[Path, Path]:
        """Write ``<stem>.json`` and ``<stem>.bin``; returns both paths."""
        stem = Path(stem)
        stem.parent.mkdir(parents=True, exist_ok=True)
        entries, chunks, offset = [], [], 0
        for name, t in self._params.items():
            arrays = [("value", t.data)]
            st = self.state.get(name)
            if st is not None:
                arrays += [("m", st["m"]), ("v", st["v"])]
            for role, arr in arrays:
                arr = np.ascontiguousarray(arr)
                raw = arr.astype(arr.dtype.newbyteorder("<"), copy=False).tobytes()
                entries.append({"name": name, "role": role, "shape": list(arr.shape),
                                "dtype": np.dtype(arr.dtype).str.replace(">", "<").replace("=", "<"),
                                "offset": offset, "nbytes": len(raw)})
                chunks.append(raw)
                offset += len(raw)
        blob = b"".join(chunks)
        manifest = {
            "format_version": FORMAT_VERSION,
            "entries": entries,
            "steps": {n: int(s["step"]) for n, s in self.state.items()},
            "digest": fnv64(blob),
        }
        json_path, bin_path = stem.with_suffix(".json"), stem.with_suffix(".bin")
        tmp_bin = bin_path.with_suffix(".bin.tmp")
        tmp_bin.write_bytes(blob)
        os.replace(tmp_bin, bin_path)
        tmp_json = json_path.with_suffix(".json.tmp")
        tmp_json.write_text(json.dumps(manifest, indent=1, sort_keys=True))
        os.replace(tmp_json, json_path)
        return json_path, bin_path

    @staticmethod
    def read_arrays(stem: str | os.PathLike) -> tuple[dict, dict]:
        stem = Path(stem)
        manifest = json.loads(stem.with_suffix(".json").read_text())
        if manifest.get("format_version") != FORMAT_VERSION:
            raise ParamStoreError(f"unsupported parameter format {manifest.get('format_version')}")
        blob = stem.with_suffix(".bin").read_bytes()
        if fnv64(blob) != manifest["digest"]:
            raise ParamStoreError(f"digest mismatch for {stem}.bin")
        arrays: dict[tuple[str, str], np.ndarray] = {}
        for e in manifest["entries"]:
            raw = blob[e["offset"]: e["offset"] + e["nbytes"]]
            arrays[(e["name"], e["role"])] = np.frombuffer(raw, dtype=e["dtype"]).reshape(e["shape"]).copy()
        return arrays, manifest

    def load(self, stem: str | os.PathLike, strict: bool = True) -> None:
        """Overwrite parameter values (and optimizer state) from disk in place."""
        arrays, manifest = self.read_arrays(stem)
        stored = {name for name, role in arrays if role == "value"}
        if strict and stored != set(self._params):
            missing = sorted(set(self._params) - stored)
            extra = sorted(stored - set(self._params))
            raise ParamStoreError(f"parameter names differ: missing={missing[:5]} extra={extra[:5]}")
        for name, t in self._params.items():
            if name not in stored:
                continue
            value = arrays[(name, "value")]
            if value.shape != t.shape:
                raise ParamStoreError(f"shape mismatch for {name}: {value.shape} vs {t.shape}")
            t.data = value.astype(t.dtype, copy=False)
            if (name, "m") in arrays:
                self.state[name] = {"m": arrays[(name, "m")].astype(t.dtype),
                                    "v": arrays[(name, "v")].astype(t.dtype),
                                    "step": manifest["steps"].get(name, 0)}
            else:
                self.state.pop(name, None)
