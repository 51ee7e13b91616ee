"""Deterministic binary checkpoints for trained labelers.

Layout: magic ``MSCK``, u32 format version, u32 header length, a JSON
header (sorted keys, no whitespace), then raw float32 little-endian
tensor data concatenated in the header's listed order.  Writing the
same model twice yields byte-identical files.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from ..errors import FormatError, ShapeError
from .config import LabelerConfig
from .model import param_names

MAGIC = b"MSCK"
VERSION = 1
_PREFIX = struct.Struct("<4sII")


def save_checkpoint(
    path: str | Path,
    cfg: LabelerConfig,
    params: dict[str, np.ndarray],
    tau: float,
    step: int,
) -> None:
    names = param_names(cfg)
    missing = [n for n in names if n not in params]
    if missing:
        raise ShapeError(f"params missing tensors: {missing}")
    tensors = []
    blobs = []
    for name in names:
        arr = np.ascontiguousarray(params[name], dtype="<f4")
        if not np.all(np.isfinite(arr)):
            raise FormatError(f"tensor {name} contains non-finite values")
        tensors.append({"name": name, "shape": list(arr.shape)})
        blobs.append(arr.tobytes())
    header = {
        "config": cfg.to_dict(),
        "step": int(step),
        "tau": float(tau),
        "tensors": tensors,
    }
    head = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
    with open(path, "wb") as fh:
        fh.write(_PREFIX.pack(MAGIC, VERSION, len(head)))
        fh.write(head)
        for blob in blobs:
            fh.write(blob)


def load_checkpoint(
    path: str | Path,
) -> tuple[LabelerConfig, dict[str, np.ndarray], float, int]:
    raw = Path(path).read_bytes()
    if len(raw) < _PREFIX.size:
        raise FormatError(f"{path}: truncated checkpoint")
    magic, version, head_len = _PREFIX.unpack_from(raw)
    if magic != MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise FormatError(f"{path}: unsupported checkpoint version {version}")
    if len(raw) < _PREFIX.size + head_len:
        raise FormatError(f"{path}: header extends past end of file")
    try:
        header = json.loads(raw[_PREFIX.size : _PREFIX.size + head_len])
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: invalid checkpoint header: {exc}") from exc
    try:
        cfg = LabelerConfig.from_dict(header["config"])
        tau = float(header["tau"])
        step = int(header["step"])
        tensors = header["tensors"]
    except (KeyError, TypeError) as exc:
        raise FormatError(f"{path}: malformed checkpoint header") from exc

    expected = param_names(cfg)
    listed = [t["name"] for t in tensors]
    if listed != expected:
        raise FormatError(f"{path}: tensor list does not match the stored config")

    params: dict[str, np.ndarray] = {}
    offset = _PREFIX.size + head_len
    for entry in tensors:
        shape = tuple(int(s) for s in entry["shape"])
        count = int(np.prod(shape, dtype=np.int64)) if shape else 1
        end = offset + 4 * count
        if end > len(raw):
            raise FormatError(f"{path}: tensor {entry['name']} overruns the file")
        arr = np.frombuffer(raw[offset:end], dtype="<f4").reshape(shape)
        if not np.all(np.isfinite(arr)):
            raise FormatError(f"{path}: tensor {entry['name']} has non-finite values")
        params[entry["name"]] = arr.astype(np.float32)
        offset = end
    if offset != len(raw):
        raise FormatError(f"{path}: {len(raw) - offset} trailing bytes")
    return cfg, params, tau, step
