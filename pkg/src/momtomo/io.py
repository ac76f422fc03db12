"""Raw little-endian binary payloads with JSON sidecar headers.

Every artifact ``stem`` is written as ``stem.bin`` (row-major float64, complex
values interleaved as re, im) and ``stem.json`` holding shape, metadata and
the SHA-256 of the payload. Readers reject payloads whose hash, size or
header fields disagree.
"""
from __future__ import annotations

import csv
import hashlib
import json
from pathlib import Path

import numpy as np

from .errors import DataError
from .forward import MomentaSinogram
from .geometry import AttenuationMap, DiscGrid, SymmetricTensorField
from .sequences import ModeSequenceField

FORMAT_VERSION = 1
LE_F8 = "<f8"


def _paths(stem) -> tuple[Path, Path]:
    stem = Path(stem)
    if stem.suffix in (".bin", ".json"):
        stem = stem.with_suffix("")
    return stem.with_suffix(".bin"), stem.with_suffix(".json")


def _jsonable(obj):
    """Tuples, numpy scalars and arrays as plain JSON values."""
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def provenance_hash(prov: dict) -> str:
    text = json.dumps(_jsonable(prov), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()


def write_array(stem, array: np.ndarray, kind: str, meta: dict = None) -> Path:
    """Write ``array`` and its header; returns the payload path."""
    arr = np.asarray(array)
    is_complex = np.iscomplexobj(arr)
    flat = arr.astype(np.complex128).view(np.float64) if is_complex else arr.astype(np.float64)
    payload = np.ascontiguousarray(flat, dtype=LE_F8).tobytes()
    bin_path, json_path = _paths(stem)
    bin_path.parent.mkdir(parents=True, exist_ok=True)
    bin_path.write_bytes(payload)
    header = {
        "format": FORMAT_VERSION,
        "kind": kind,
        "dtype": "complex128-interleaved" if is_complex else "float64",
        "byte_order": "little",
        "shape": list(arr.shape),
        "sha256": hashlib.sha256(payload).hexdigest(),
        "meta": _jsonable(meta or {}),
    }
    json_path.write_text(json.dumps(header, indent=2, sort_keys=True) + "\n")
    return bin_path


def read_array(stem, kind: str = None) -> tuple[np.ndarray, dict]:
    bin_path, json_path = _paths(stem)
    try:
        header = json.loads(json_path.read_text())
        payload = bin_path.read_bytes()
    except FileNotFoundError as exc:
        raise DataError(f"missing file {exc.filename}") from exc
    except json.JSONDecodeError as exc:
        raise DataError(f"corrupt header {json_path}: {exc}") from exc
    if kind is not None and header.get("kind") != kind:
        raise DataError(f"{json_path} holds {header.get('kind')!r}, expected {kind!r}")
    if hashlib.sha256(payload).hexdigest() != header.get("sha256"):
        raise DataError(f"checksum mismatch for {bin_path}")
    shape = tuple(header["shape"])
    is_complex = header["dtype"].startswith("complex")
    count = int(np.prod(shape)) * (2 if is_complex else 1)
    if len(payload) != 8 * count:
        raise DataError(f"{bin_path}: {len(payload)} bytes, header implies {8 * count}")
    flat = np.frombuffer(payload, dtype=LE_F8).astype(np.float64)
    arr = flat.view(np.complex128).reshape(shape) if is_complex else flat.reshape(shape)
    return arr.copy(), header


# ---------------------------------------------------------------------------
# typed artifacts


def save_tensor(stem, f: SymmetricTensorField) -> Path:
    meta = {"n_x": f.grid.n_x, "n_y": f.grid.n_y, "m": f.m, "n_components": f.m + 1,
            "provenance": f.provenance}
    return write_array(stem, f.components, "tensor", meta)


def load_tensor(stem) -> SymmetricTensorField:
    arr, header = read_array(stem, "tensor")
    meta = header["meta"]
    if arr.shape != (meta["m"] + 1, meta["n_y"], meta["n_x"]) or meta["n_x"] != meta["n_y"]:
        raise DataError(f"tensor header inconsistent with payload shape {arr.shape}")
    return SymmetricTensorField(meta["m"], arr, DiscGrid(meta["n_x"]), None, meta.get("provenance", {}))


def save_attenuation(stem, a: AttenuationMap) -> Path:
    meta = {"n_x": a.grid.n_x, "n_y": a.grid.n_y, "provenance": a.provenance}
    return write_array(stem, a.values, "attenuation", meta)


def load_attenuation(stem) -> AttenuationMap:
    arr, header = read_array(stem, "attenuation")
    meta = header["meta"]
    if arr.shape != (meta["n_y"], meta["n_x"]):
        raise DataError("attenuation header inconsistent with payload")
    return AttenuationMap(arr, DiscGrid(meta["n_x"]), None, meta.get("provenance", {}))


def save_sinogram(stem, s: MomentaSinogram) -> Path:
    meta = {"m": s.m, "n_beta": s.n_beta, "n_theta": s.n_theta, "attenuated": bool(s.attenuated),
            "grid_hash": provenance_hash(s.provenance), "provenance": s.provenance}
    return write_array(stem, s.data, "sinogram", meta)


def load_sinogram(stem) -> MomentaSinogram:
    arr, header = read_array(stem, "sinogram")
    meta = header["meta"]
    if arr.shape != (meta["m"] + 1, meta["n_beta"], meta["n_theta"]):
        raise DataError(f"sinogram header expects {meta['m'] + 1} slices, payload has shape {arr.shape}")
    if provenance_hash(meta.get("provenance", {})) != meta.get("grid_hash"):
        raise DataError("sinogram provenance hash mismatch")
    return MomentaSinogram(meta["m"], arr, bool(meta["attenuated"]), meta.get("provenance", {}))


def export_sinogram_csv(path, s: MomentaSinogram) -> Path:
    """One row per (k, beta index, theta index) in payload order."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["k", "j_beta", "l_theta", "value"])
        for idx in np.ndindex(s.data.shape):
            w.writerow([*idx, repr(float(s.data[idx]))])
    return path


def save_sequence(stem, u: ModeSequenceField) -> Path:
    meta = {"N": u.N, "boundary": u.on_boundary, "grid": repr(u.grid),
            "grid_size": u.grid.n_beta if u.on_boundary else u.grid.n}
    return write_array(stem, u.values.astype(complex), "sequence", meta)


def load_sequence(stem) -> ModeSequenceField:
    from .geometry import BoundaryGrid

    arr, header = read_array(stem, "sequence")
    meta = header["meta"]
    if arr.shape[0] != meta["N"] + 1:
        raise DataError("sequence header disagrees with mode count")
    grid = BoundaryGrid(meta["grid_size"]) if meta["boundary"] else DiscGrid(meta["grid_size"])
    return ModeSequenceField(arr, grid)


def write_report(path, summary: dict) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_jsonable(summary), indent=2, sort_keys=True) + "\n")
    return path


def write_level_csv(path, level_norms, source_modes: np.ndarray, grid: DiscGrid) -> Path:
    """Per-level trace norms and per-mode L^2 norms of the recovered source."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    w = grid.area_weights
    with path.open("w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(["quantity", "index", "value"])
        for k, v in enumerate(level_norms):
            out.writerow(["level_norm", k, repr(float(v))])
        for j in range(source_modes.shape[0]):
            out.writerow(["source_mode_l2", j, repr(float(np.sqrt(np.sum(np.abs(source_modes[j]) ** 2 * w))))])
    return path


def write_pgm(path, field: np.ndarray) -> Path:
    """8-bit binary PGM of a scalar field, linearly scaled to its range, top row = max y."""
    vals = np.asarray(field, dtype=float)[::-1]
    lo, hi = float(np.nanmin(vals)), float(np.nanmax(vals))
    scale = 255.0 / (hi - lo) if hi > lo else 0.0
    img = np.clip(np.rint((vals - lo) * scale), 0, 255).astype(np.uint8)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("wb") as fh:
        fh.write(f"P5\n{img.shape[1]} {img.shape[0]}\n255\n".encode())
        fh.write(img.tobytes())
    return path
