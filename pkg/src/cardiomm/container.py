"""On-disk dataset container.

A dataset is a directory holding ``index.json`` plus one subdirectory per
record. Each record directory holds ``manifest.json`` (shapes, dtypes,
texts, blob digests) and one little-endian binary blob per array role.
Records are written to a temporary directory and renamed into place.
"""

from __future__ import annotations

import json
import os
import shutil
from pathlib import Path

import numpy as np

from .digest import fnv64
from .masks import UndersamplingMask
from .phantom import ScanRecord

FORMAT_VERSION = 1
ARRAY_ROLES = {
    "kspace": "<c8",
    "reference": "<f4",
    "sensitivities": "<c8",
    "segmentation": "<i2",
    "lesion": "|u1",
}


class ContainerError(IOError):
    pass


class DigestError(ContainerError):
    pass


def canonical_json(obj) -> str:
    return json.dumps(obj, indent=1, sort_keys=True, ensure_ascii=True) + "\n"


def atomic_write_text(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def atomic_write_bytes(path: Path, data: bytes) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(data)
    os.replace(tmp, path)


def _encode(arr: np.ndarray, dtype: str) -> bytes:
    return np.ascontiguousarray(arr, dtype=np.dtype(dtype)).tobytes()


def write_record(record: ScanRecord, path: str | os.PathLike) -> Path:
    """Write one record directory atomically; an existing directory is replaced."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".partial")
    if tmp.exists():
        shutil.rmtree(tmp)
    tmp.mkdir()
    blobs = {}
    for role, dtype in ARRAY_ROLES.items():
        arr = getattr(record, role)
        if arr is None:
            continue
        raw = _encode(arr, dtype)
        (tmp / f"{role}.bin").write_bytes(raw)
        blobs[role] = {"dtype": dtype, "shape": list(np.shape(arr)), "digest": fnv64(raw)}
    manifest = {
        "format_version": FORMAT_VERSION,
        "scan_id": record.scan_id,
        "metadata": record.metadata,
        "pixel_spacing": [float(s) for s in record.pixel_spacing],
        "slice_thickness": float(record.slice_thickness),
        "frame": record.frame,
        "blobs": blobs,
        "masks": [m.to_dict() for m in record.masks],
    }
    (tmp / "manifest.json").write_text(canonical_json(manifest))
    if path.exists():
        shutil.rmtree(path)
    os.replace(tmp, path)
    return path


def read_manifest(path: str | os.PathLike) -> dict:
    path = Path(path)
    mf = path / "manifest.json"
    if not mf.is_file():
        raise ContainerError(f"missing manifest in {path}")
    manifest = json.loads(mf.read_text())
    if manifest.get("format_version") != FORMAT_VERSION:
        raise ContainerError(f"unsupported container version {manifest.get('format_version')} "
                             f"in {path}")
    return manifest


def read_record(path: str | os.PathLike, verify: bool = True) -> ScanRecord:
    """Read and digest-check one record directory."""
    path = Path(path)
    manifest = read_manifest(path)
    arrays = {}
    for role, info in manifest["blobs"].items():
        blob = path / f"{role}.bin"
        if not blob.is_file():
            raise ContainerError(f"missing blob {blob}")
        raw = blob.read_bytes()
        if verify and fnv64(raw) != info["digest"]:
            raise DigestError(f"digest mismatch for {blob}")
        arr = np.frombuffer(raw, dtype=info["dtype"])
        if arr.size != int(np.prod(info["shape"])):
            raise ContainerError(f"blob {blob} has {arr.size} elements, expected shape "
                                 f"{info['shape']}")
        arrays[role] = arr.reshape(info["shape"]).copy()
    if "lesion" in arrays:
        arrays["lesion"] = arrays["lesion"].astype(bool)
    return ScanRecord(
        kspace=arrays["kspace"], reference=arrays["reference"],
        sensitivities=arrays.get("sensitivities"), metadata=manifest["metadata"],
        segmentation=arrays.get("segmentation"), lesion=arrays.get("lesion"),
        pixel_spacing=tuple(manifest["pixel_spacing"]),
        slice_thickness=manifest["slice_thickness"], frame=manifest["frame"],
        scan_id=manifest["scan_id"],
        masks=[UndersamplingMask.from_dict(m) for m in manifest.get("masks", [])],
    )


def write_dataset(records, path: str | os.PathLike, extra: dict | None = None) -> Path:
    """Write records as ``record_00000`` ... plus an ``index.json``."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    entries = []
    for i, rec in enumerate(records):
        name = f"record_{i:05d}"
        write_record(rec, path / name)
        digest = fnv64((path / name / "manifest.json").read_bytes())
        entries.append({"name": name, "scan_id": rec.scan_id, "manifest_digest": digest})
    index = {"format_version": FORMAT_VERSION, "records": entries}
    if extra:
        index["extra"] = extra
    atomic_write_text(path / "index.json", canonical_json(index))
    return path


def list_records(path: str | os.PathLike) -> list[Path]:
    path = Path(path)
    index_file = path / "index.json"
    if not index_file.is_file():
        raise ContainerError(f"{path} is not a dataset (no index.json)")
    index = json.loads(index_file.read_text())
    if index.get("format_version") != FORMAT_VERSION:
        raise ContainerError(f"unsupported dataset version {index.get('format_version')}")
    return [path / e["name"] for e in index["records"]]


def read_dataset(path: str | os.PathLike, verify: bool = True) -> list[ScanRecord]:
    return [read_record(p, verify) for p in list_records(path)]


def dataset_digest(path: str | os.PathLike) -> str:
    """Digest of the dataset index, which pins every record manifest and blob."""
    return fnv64((Path(path) / "index.json").read_bytes())
