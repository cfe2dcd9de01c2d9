"""Versioned binary container of named arrays plus JSON metadata.

Layout (little endian)::

    magic   8 bytes  b"STRBIN01"
    version u32
    kind    u16 length + utf-8
    meta    u32 length + utf-8 JSON (sorted keys)
    count   u32
    entry*  name (u16 length + utf-8), dtype (1 byte: f=float64, i=int64),
            ndim u8, dims u64 * ndim, raw values
    digest  u64 blake2b-64 of everything above

Used for checkpoints, datasets, body-model assets and eval predictions.
"""

from __future__ import annotations

import hashlib
import json
import os
import struct
import tempfile
from pathlib import Path

import numpy as np

MAGIC = b"STRBIN01"
VERSION = 1


class ContainerError(IOError):
    pass


def _digest(buf: bytes) -> int:
    return struct.unpack("<Q", hashlib.blake2b(buf, digest_size=8).digest())[0]


def encode(kind: str, arrays: dict[str, np.ndarray], meta: dict | None = None) -> bytes:
    parts = [MAGIC, struct.pack("<I", VERSION)]
    kb = kind.encode()
    parts.append(struct.pack("<H", len(kb)) + kb)
    mb = json.dumps(meta or {}, sort_keys=True).encode()
    parts.append(struct.pack("<I", len(mb)) + mb)
    parts.append(struct.pack("<I", len(arrays)))
    for name, arr in arrays.items():
        arr = np.asarray(arr)
        if np.issubdtype(arr.dtype, np.integer) or arr.dtype == np.bool_:
            code, arr = b"i", arr.astype("<i8")
        else:
            code, arr = b"f", arr.astype("<f8")
        nb = name.encode()
        parts.append(struct.pack("<H", len(nb)) + nb + code + struct.pack("<B", arr.ndim))
        parts.append(struct.pack(f"<{arr.ndim}Q", *arr.shape))
        parts.append(np.ascontiguousarray(arr).tobytes())
    body = b"".join(parts)
    return body + struct.pack("<Q", _digest(body))


def decode(buf: bytes, kind: str | None = None) -> tuple[dict[str, np.ndarray], dict]:
    if len(buf) < len(MAGIC) + 12 or buf[:8] != MAGIC:
        raise ContainerError("not a STRBIN container")
    body, (stored,) = buf[:-8], struct.unpack("<Q", buf[-8:])
    if _digest(body) != stored:
        raise ContainerError("checksum mismatch")
    pos = 8
    (version,) = struct.unpack_from("<I", body, pos)
    pos += 4
    if version != VERSION:
        raise ContainerError(f"unsupported container version {version}")
    (n,) = struct.unpack_from("<H", body, pos)
    pos += 2
    file_kind = body[pos:pos + n].decode()
    pos += n
    if kind is not None and file_kind != kind:
        raise ContainerError(f"expected a {kind!r} container, found {file_kind!r}")
    (n,) = struct.unpack_from("<I", body, pos)
    pos += 4
    meta = json.loads(body[pos:pos + n].decode())
    pos += n
    (count,) = struct.unpack_from("<I", body, pos)
    pos += 4
    arrays = {}
    for _ in range(count):
        (n,) = struct.unpack_from("<H", body, pos)
        pos += 2
        name = body[pos:pos + n].decode()
        pos += n
        code = body[pos:pos + 1]
        (ndim,) = struct.unpack_from("<B", body, pos + 1)
        pos += 2
        shape = struct.unpack_from(f"<{ndim}Q", body, pos)
        pos += 8 * ndim
        dtype = "<i8" if code == b"i" else "<f8"
        size = int(np.prod(shape)) if ndim else 1
        arr = np.frombuffer(body, dtype=dtype, count=size, offset=pos).reshape(shape)
        pos += 8 * size
        arrays[name] = arr.astype(np.int64 if code == b"i" else np.float64)
    return arrays, meta


def atomic_write_bytes(path: str | os.PathLike, data: bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def save(path, kind: str, arrays: dict[str, np.ndarray], meta: dict | None = None) -> None:
    atomic_write_bytes(path, encode(kind, arrays, meta))


def load(path, kind: str | None = None) -> tuple[dict[str, np.ndarray], dict]:
    return decode(Path(path).read_bytes(), kind)
