"""On-disk formats: raw little-endian float64 with a JSON sidecar, and PGM previews."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Optional, Tuple

import numpy as np

__all__ = ["write_array", "read_array", "sidecar_path", "write_pgm", "write_profile_csv"]


def sidecar_path(path: str | Path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".json")


def write_array(path: str | Path, array: np.ndarray, **extra) -> Path:
    """Write ``array`` as row-major f64le bytes plus ``<path>.json``.

    Extra keyword arguments are stored in the sidecar (e.g. ``subbands``).
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    arr = np.ascontiguousarray(array, dtype="<f8")
    path.write_bytes(arr.tobytes(order="C"))
    meta = {"shape": list(arr.shape), "dtype": "f64le", "order": "row-major"}
    meta.update(extra)
    sidecar_path(path).write_text(json.dumps(meta, indent=2))
    return path


def read_array(path: str | Path) -> np.ndarray:
    path = Path(path)
    meta_file = sidecar_path(path)
    if not meta_file.exists():
        raise FileNotFoundError(f"missing sidecar {meta_file}")
    meta = json.loads(meta_file.read_text())
    if meta.get("dtype") != "f64le" or meta.get("order", "row-major") != "row-major":
        raise ValueError(f"unsupported array format in {meta_file}: {meta}")
    shape = tuple(int(s) for s in meta["shape"])
    data = np.frombuffer(path.read_bytes(), dtype="<f8")
    if data.size != int(np.prod(shape)):
        raise ValueError(f"{path}: {data.size} values but sidecar shape is {shape}")
    return data.reshape(shape).astype(np.float64)


def write_pgm(
    path: str | Path,
    image: np.ndarray,
    log: bool = False,
    log_offset: float = 1e-8,
    limits: Optional[Tuple[float, float]] = None,
) -> Path:
    """Binary 16-bit PGM preview, min-max scaled (after ``log10(x + offset)`` if ``log``)."""
    img = np.asarray(image, dtype=np.float64)
    if img.ndim != 2:
        raise ValueError("PGM export needs a 2-D image")
    if log:
        img = np.log10(np.maximum(img, 0.0) + log_offset)
    lo, hi = limits if limits is not None else (float(img.min()), float(img.max()))
    scale = 65535.0 / (hi - lo) if hi > lo else 0.0
    q = np.clip(np.round((img - lo) * scale), 0, 65535).astype(">u2")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = f"P5\n{img.shape[1]} {img.shape[0]}\n65535\n".encode("ascii")
    path.write_bytes(header + q.tobytes())
    return path


def read_pgm(path: str | Path) -> np.ndarray:
    raw = Path(path).read_bytes()
    parts = raw.split(b"\n", 3)
    if parts[0] != b"P5":
        raise ValueError("not a binary PGM")
    width, height = (int(v) for v in parts[1].split())
    maxval = int(parts[2])
    dtype = ">u2" if maxval > 255 else "u1"
    return np.frombuffer(parts[3], dtype=dtype).reshape(height, width)


def write_profile_csv(path: str | Path, columns: dict) -> Path:
    """Write equal-length 1-D profiles as CSV columns, headed by their keys."""
    names = list(columns)
    data = [np.asarray(columns[k], dtype=np.float64) for k in names]
    if len({d.size for d in data}) > 1:
        raise ValueError("profile columns must have equal length")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [",".join(names)]
    for row in zip(*data):
        lines.append(",".join(repr(float(v)) for v in row))
    path.write_text("\n".join(lines) + "\n")
    return path
