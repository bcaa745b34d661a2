"""Operator file formats.

JSON::

    {"space": {"factors": [{"dim": 2, "conjugate": false}, ...]},
     "data": [[re, im], ...]}          # row-major

Binary (little-endian)::

    b"MUOP" | u16 version | u16 n_factors | n_factors * (u32 dim, u8 conj)
            | rows*cols * (f64 re, f64 im)   # row-major

Both formats only carry square operators and round-trip bit-exactly.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .errors import FormatError
from .tensor import Factor, Operator, Space

MAGIC = b"MUOP"
VERSION = 1


def _space_dict(space: Space) -> dict:
    return {"factors": [{"dim": f.dim, "conjugate": f.conjugate}
                        for f in space.factors]}


def _require_square(op: Operator):
    if op.domain != op.codomain:
        raise FormatError("only operators with equal domain and codomain "
                          "can be serialized")


def to_json(op: Operator) -> str:
    _require_square(op)
    flat = op.mat.reshape(-1)
    data = [[float(z.real), float(z.imag)] for z in flat]
    return json.dumps({"space": _space_dict(op.domain), "data": data})


def from_json(text: str) -> Operator:
    try:
        obj = json.loads(text)
        factors = tuple(Factor(int(f["dim"]), bool(f["conjugate"]))
                        for f in obj["space"]["factors"])
        data = np.asarray(obj["data"], dtype=float)
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"malformed operator JSON: {exc}") from exc
    space = _parse_space(factors)
    n = space.dim
    if data.shape != (n * n, 2):
        raise FormatError(f"expected {n * n} [re, im] pairs, got shape "
                          f"{data.shape}")
    # assign parts separately: re + 1j*im would turn -0.0 into 0.0
    mat = np.empty(n * n, dtype=complex)
    mat.real, mat.imag = data[:, 0], data[:, 1]
    mat = mat.reshape(n, n)
    return Operator(mat, space)


def _parse_space(factors) -> Space:
    try:
        return Space(factors)
    except ValueError as exc:
        raise FormatError(str(exc)) from exc


def to_bytes(op: Operator) -> bytes:
    _require_square(op)
    parts = [MAGIC, struct.pack("<HH", VERSION, len(op.domain))]
    for f in op.domain.factors:
        parts.append(struct.pack("<IB", f.dim, int(f.conjugate)))
    parts.append(np.ascontiguousarray(op.mat, dtype="<c16").tobytes())
    return b"".join(parts)


def from_bytes(blob: bytes) -> Operator:
    if blob[:4] != MAGIC:
        raise FormatError("bad magic; not a MUOP file")
    try:
        version, nf = struct.unpack_from("<HH", blob, 4)
        if version != VERSION:
            raise FormatError(f"unsupported MUOP version {version}")
        off = 8
        factors = []
        for _ in range(nf):
            dim, conj = struct.unpack_from("<IB", blob, off)
            factors.append(Factor(dim, bool(conj)))
            off += 5
    except struct.error as exc:
        raise FormatError(f"truncated MUOP header: {exc}") from exc
    space = _parse_space(tuple(factors))
    n = space.dim
    payload = blob[off:]
    if len(payload) != 16 * n * n:
        raise FormatError(f"expected {16 * n * n} data bytes, got {len(payload)}")
    mat = np.frombuffer(payload, dtype="<c16").reshape(n, n)
    return Operator(mat, space)


def save(op: Operator, path, fmt: str | None = None) -> Path:
    path = Path(path)
    fmt = fmt or ("bin" if path.suffix in (".bin", ".muop") else "json")
    if fmt == "json":
        path.write_text(to_json(op))
    elif fmt == "bin":
        path.write_bytes(to_bytes(op))
    else:
        raise ValueError(f"unknown format {fmt!r}")
    return path


def load(path) -> Operator:
    """Read an operator, detecting the format from the magic bytes."""
    blob = Path(path).read_bytes()
    if blob[:4] == MAGIC:
        return from_bytes(blob)
    try:
        text = blob.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise FormatError(f"{path}: neither MUOP nor UTF-8 JSON") from exc
    return from_json(text)
