"""Deterministic binary checkpoints.

Layout: magic, 8-byte little-endian header length, JSON header (sorted keys),
then raw tensor payloads in header order (data, then Adam m and v when
moments are stored). No timestamps anywhere, so save -> load -> save is
byte-identical.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import IncompatibleCheckpoint, MissingCheckpoint
from .params import ParamStore

MAGIC = b"CORALCKPT\x01"
VERSION = 1


@dataclass
class Checkpoint:
    meta: dict
    step_count: int
    arrays: dict[str, np.ndarray]
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)
    rng_state: dict | None = None


def save(path, store: ParamStore, meta: dict, rng_state: dict | None = None, with_moments: bool = True) -> None:
    path = Path(path)
    entries = []
    payload = bytearray()
    for name, t in store.items():
        arr = np.ascontiguousarray(t.data)
        entries.append({"name": name, "dtype": arr.dtype.str, "shape": list(arr.shape)})
        payload += arr.tobytes()
        if with_moments:
            payload += np.ascontiguousarray(store.m[name]).tobytes()
            payload += np.ascontiguousarray(store.v[name]).tobytes()
    header = {
        "version": VERSION,
        "meta": meta,
        "step_count": store.step_count,
        "rng_state": rng_state,
        "with_moments": with_moments,
        "tensors": entries,
    }
    blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(len(blob).to_bytes(8, "little"))
        fh.write(blob)
        fh.write(payload)


def load(path) -> Checkpoint:
    path = Path(path)
    if not path.exists():
        raise MissingCheckpoint(str(path))
    raw = path.read_bytes()
    if not raw.startswith(MAGIC):
        raise IncompatibleCheckpoint(f"{path}: bad magic")
    off = len(MAGIC)
    hlen = int.from_bytes(raw[off : off + 8], "little")
    off += 8
    header = json.loads(raw[off : off + hlen].decode())
    off += hlen
    if header["version"] != VERSION:
        raise IncompatibleCheckpoint(f"{path}: version {header['version']} unsupported")
    ck = Checkpoint(
        meta=header["meta"],
        step_count=header["step_count"],
        arrays={},
        rng_state=header.get("rng_state"),
    )
    for entry in header["tensors"]:
        dtype = np.dtype(entry["dtype"])
        shape = tuple(entry["shape"])
        nbytes = dtype.itemsize * int(np.prod(shape)) if shape else dtype.itemsize
        blocks = 3 if header["with_moments"] else 1
        arrs = []
        for _ in range(blocks):
            arrs.append(np.frombuffer(raw[off : off + nbytes], dtype=dtype).reshape(shape).copy())
            off += nbytes
        ck.arrays[entry["name"]] = arrs[0]
        if header["with_moments"]:
            ck.m[entry["name"]] = arrs[1]
            ck.v[entry["name"]] = arrs[2]
    return ck


def load_into(ck: Checkpoint, store: ParamStore, with_moments: bool = True) -> None:
    """Copy checkpoint arrays (and moments) into an existing store."""
    names = set(store.names())
    if names != set(ck.arrays):
        missing = names.symmetric_difference(ck.arrays)
        raise IncompatibleCheckpoint(f"parameter name mismatch: {sorted(missing)}")
    for name, arr in ck.arrays.items():
        if store[name].data.shape != arr.shape:
            raise IncompatibleCheckpoint(
                f"{name}: checkpoint shape {arr.shape} vs model {store[name].data.shape}"
            )
    store.load_arrays(ck.arrays)
    if with_moments and ck.m:
        for name in ck.m:
            store.m[name] = np.ascontiguousarray(ck.m[name], dtype=store.dtype)
            store.v[name] = np.ascontiguousarray(ck.v[name], dtype=store.dtype)
        store.step_count = ck.step_count


def digest(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()
