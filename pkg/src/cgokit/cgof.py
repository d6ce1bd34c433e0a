"""CGOF binary field files with JSON sidecars.

Layout (all little-endian)::

    b"CGOF" | u32 version=1 | u32 nx | u32 ny | f64 x0 | f64 y0 | f64 h |
    nx*ny pairs of f64 (re, im), row-major (index j*nx + i)
"""
from __future__ import annotations

import hashlib
import json
import struct
from pathlib import Path

import numpy as np

from .field_core import ComplexField, Grid2D

MAGIC = b"CGOF"
VERSION = 1
_HEADER = struct.Struct("<4sIII3d")


def encode_cgof(field: ComplexField) -> bytes:
    g = field.grid
    head = _HEADER.pack(MAGIC, VERSION, g.nx, g.ny, g.x0, g.y0, g.h)
    body = np.empty((g.size, 2), dtype="<f8")
    flat = field.values.ravel()
    body[:, 0] = flat.real
    body[:, 1] = flat.imag
    return head + body.tobytes()


def decode_cgof(data: bytes) -> ComplexField:
    if len(data) < _HEADER.size:
        raise ValueError("truncated CGOF header")
    magic, version, nx, ny, x0, y0, h = _HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise ValueError("not a CGOF file")
    if version != VERSION:
        raise ValueError(f"unsupported CGOF version {version}")
    n = nx * ny
    expected = _HEADER.size + 16 * n
    if len(data) != expected:
        raise ValueError(f"CGOF payload has {len(data)} bytes, expected {expected}")
    body = np.frombuffer(data, dtype="<f8", offset=_HEADER.size).reshape(n, 2)
    return ComplexField(Grid2D(nx, ny, x0, y0, h), body[:, 0] + 1j * body[:, 1])


def write_cgof(path, field: ComplexField, name=None, provenance=None, parameters=None):
    """Write ``path`` (.cgof) and ``path`` + ``.json`` sidecar; return sha256 of the field."""
    path = Path(path)
    data = encode_cgof(field)
    path.write_bytes(data)
    meta = {
        "name": name or path.stem,
        "provenance": provenance or "cgokit",
        "parameters": parameters or {},
        "grid": field.grid.to_dict(),
        "sha256": hashlib.sha256(data).hexdigest(),
    }
    sidecar = path.with_name(path.name + ".json")
    sidecar.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return meta["sha256"]


def read_cgof(path) -> ComplexField:
    return decode_cgof(Path(path).read_bytes())


def read_sidecar(path):
    path = Path(path)
    return json.loads(path.with_name(path.name + ".json").read_text())
