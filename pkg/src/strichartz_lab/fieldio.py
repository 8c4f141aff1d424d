"""FLD1 binary field format.

Layout: the magic bytes ``b"FLD1"``, a little-endian ``uint32`` header
length, a UTF-8 JSON header, then ``2 N^d`` little-endian float64 values with
real and imaginary parts interleaved in row-major order.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .errors import InvalidFieldError
from .spectral import Field, Grid

MAGIC = b"FLD1"
ENCODING = "f64le-interleaved"


def encode_field(field: Field) -> bytes:
    grid = field.grid
    header = {
        "version": 1,
        "d": grid.d,
        "shape": list(grid.shape),
        "extent": [grid.extent] * grid.d,
        "encoding": ENCODING,
    }
    head = json.dumps(header, sort_keys=True).encode()
    payload = np.ascontiguousarray(field.values).view(np.float64).astype("<f8").tobytes()
    return MAGIC + struct.pack("<I", len(head)) + head + payload


def decode_field(blob: bytes) -> Field:
    """Parse FLD1 bytes.

    Raises
    ------
    InvalidFieldError
        On a bad magic number, unsupported header or truncated payload.
    """
    if blob[:4] != MAGIC:
        raise InvalidFieldError("not an FLD1 file (bad magic)")
    (hlen,) = struct.unpack("<I", blob[4:8])
    header = json.loads(blob[8 : 8 + hlen].decode())
    if header.get("version") != 1 or header.get("encoding") != ENCODING:
        raise InvalidFieldError(f"unsupported FLD1 header {header}")
    shape = tuple(int(n) for n in header["shape"])
    extents = [float(e) for e in header["extent"]]
    if len(set(shape)) != 1 or len(set(extents)) != 1 or len(shape) != header["d"]:
        raise InvalidFieldError("only cubic grids are supported")
    grid = Grid(int(header["d"]), shape[0], extents[0])
    raw = np.frombuffer(blob, dtype="<f8", offset=8 + hlen)
    if raw.size != 2 * grid.size:
        raise InvalidFieldError(f"payload holds {raw.size} floats, expected {2 * grid.size}")
    return Field(grid, raw.astype(np.float64).view(np.complex128).reshape(shape))


def write_field(path: str | Path, field: Field) -> None:
    Path(path).write_bytes(encode_field(field))


def read_field(path: str | Path) -> Field:
    return decode_field(Path(path).read_bytes())


def payload_bytes(path: str | Path) -> bytes:
    """Raw payload of an FLD1 file, without magic and header."""
    blob = Path(path).read_bytes()
    (hlen,) = struct.unpack("<I", blob[4:8])
    return blob[8 + hlen :]
