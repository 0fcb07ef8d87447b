"""Flat binary weight files.

Layout: ``b"FIGSEP01"`` then, per tensor, ``u32 name_len``, name bytes
(UTF-8), ``u32 rank``, ``rank`` x ``u32`` dims, then ``prod(dims)``
little-endian float32 values. All integers little-endian.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

MAGIC = b"FIGSEP01"


class WeightFormatError(ValueError):
    pass


def dumps(tensors: dict[str, np.ndarray]) -> bytes:
    parts = [MAGIC]
    for name, arr in tensors.items():
        raw = name.encode("utf-8")
        arr = np.asarray(arr, dtype="<f4")
        parts.append(struct.pack("<I", len(raw)))
        parts.append(raw)
        parts.append(struct.pack("<I", arr.ndim))
        parts.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        parts.append(np.ascontiguousarray(arr).tobytes())
    return b"".join(parts)


def loads(data: bytes) -> dict[str, np.ndarray]:
    if data[:len(MAGIC)] != MAGIC:
        raise WeightFormatError("bad magic; not a FIGSEP01 weight file")
    pos = len(MAGIC)
    out: dict[str, np.ndarray] = {}
    try:
        while pos < len(data):
            (name_len,) = struct.unpack_from("<I", data, pos)
            pos += 4
            name = data[pos:pos + name_len].decode("utf-8")
            pos += name_len
            (rank,) = struct.unpack_from("<I", data, pos)
            pos += 4
            dims = struct.unpack_from(f"<{rank}I", data, pos)
            pos += 4 * rank
            count = int(np.prod(dims)) if rank else 1
            if pos + 4 * count > len(data):
                raise WeightFormatError(f"truncated tensor {name!r}")
            arr = np.frombuffer(data, dtype="<f4", count=count, offset=pos).reshape(dims)
            pos += 4 * count
            out[name] = arr.astype(np.float32)
    except struct.error as exc:
        raise WeightFormatError(f"truncated weight file: {exc}") from exc
    return out


def save_weights(path: str | Path, tensors: dict[str, np.ndarray]) -> None:
    Path(path).write_bytes(dumps(tensors))


def load_weights(path: str | Path) -> dict[str, np.ndarray]:
    return loads(Path(path).read_bytes())
